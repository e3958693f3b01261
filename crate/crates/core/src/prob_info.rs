//! Gaussian-channel view of the diagonalized equation `η_k = λ_k ξ_k + ζ_k`.
//!
//! `ξ_k ~ N(0, ρ_k²)` and `ζ_k ~ N(0, ε² ν_k²)` are independent. A
//! component carries at least `½ ln 2` nats exactly when its signal
//! `λ_k ρ_k` reaches the noise `ε ν_k`; those components form the set `I`
//! and the rest form `N`. Information is in nats throughout this module.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::epsilon::Epsilon;
use crate::error::{Error, Result};
use crate::metric_info::{entropy_lower_bound, Sided};
use crate::spectral_models::{CoefficientVector, Layout, SpectrumModel};
use crate::truncation::k0;

/// `½ ln 2`, the information carried by a component at the signal/noise boundary.
pub const HALF_LN_2: f64 = 0.5 * std::f64::consts::LN_2;

/// Nats per bit.
pub const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

/// Perturbation `δ_k = 1e-9 / k` that keeps the signal-dominant extremal channel's ratios distinct.
pub const EXTREMAL_PERTURBATION: f64 = 1e-9;

/// A positive sequence `k ↦ r_k` used for prior and noise scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScaleRule {
    Constant { value: f64 },
    /// `scale · ratio^k`.
    Geometric { scale: f64, ratio: f64 },
    /// `scale · k^{-exponent}`.
    Power { scale: f64, exponent: f64 },
    /// `scale · exp(-rate k²)`.
    Gaussian { scale: f64, rate: f64 },
    /// `(1 + perturbation / k) / λ_k`.
    InverseEigen { perturbation: f64 },
    /// Explicit values for `k = 1..=len`, with an optional declared bound
    /// on `Σ_{k > len} r_k²`.
    Tabulated {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_sq_bound: Option<f64>,
    },
}

impl ScaleRule {
    pub fn value(&self, k: usize, model: &SpectrumModel) -> f64 {
        let kf = k as f64;
        match self {
            ScaleRule::Constant { value } => *value,
            ScaleRule::Geometric { scale, ratio } => scale * ratio.powf(kf),
            ScaleRule::Power { scale, exponent } => scale * kf.powf(-exponent),
            ScaleRule::Gaussian { scale, rate } => scale * (-rate * kf * kf).exp(),
            ScaleRule::InverseEigen { perturbation } => (1.0 + perturbation / kf) / model.lambda(k),
            ScaleRule::Tabulated { values, .. } => values.get(k - 1).copied().unwrap_or(f64::NAN),
        }
    }

    /// `Σ_{k > m} r_k²`, or `None` when the squares are not known to be summable.
    pub fn square_tail(&self, m: usize) -> Option<f64> {
        match self {
            ScaleRule::Constant { .. } | ScaleRule::InverseEigen { .. } => None,
            ScaleRule::Geometric { scale, ratio } => {
                let q2 = ratio * ratio;
                (q2 < 1.0).then(|| scale * scale * q2.powf((m + 1) as f64) / (1.0 - q2))
            }
            ScaleRule::Power { scale, exponent } => {
                let s = 2.0 * exponent;
                (s > 1.0).then(|| scale * scale * power_tail(s, m))
            }
            ScaleRule::Gaussian { scale, rate } => {
                if *rate <= 0.0 {
                    return None;
                }
                let mut sum = 0.0;
                let mut k = m + 1;
                loop {
                    let kf = k as f64;
                    let term = (-2.0 * rate * kf * kf).exp();
                    sum += term;
                    if term <= 1e-18 * sum || term == 0.0 {
                        break;
                    }
                    k += 1;
                }
                Some(scale * scale * sum)
            }
            ScaleRule::Tabulated { values, tail_sq_bound } => {
                let bound = (*tail_sq_bound)?;
                let listed: f64 = values.iter().skip(m).map(|v| v * v).sum();
                Some(listed + bound)
            }
        }
    }
}

/// `Σ_{k > m} k^{-s}` for `s > 1`: a block of explicit terms, then an
/// Euler–Maclaurin remainder.
fn power_tail(s: f64, m: usize) -> f64 {
    const EXPLICIT: usize = 1000;
    let explicit: f64 = (m + 1..=m + EXPLICIT).map(|k| (k as f64).powf(-s)).sum();
    let a = (m + EXPLICIT + 1) as f64;
    let integral = a.powf(1.0 - s) / (s - 1.0);
    let correction = 0.5 * a.powf(-s) + s / 12.0 * a.powf(-s - 1.0)
        - s * (s + 1.0) * (s + 2.0) / 720.0 * a.powf(-s - 3.0);
    explicit + integral + correction
}

/// The diagonal channel over one-sided labels `k = 1..=K_max`.
///
/// For Fourier models this is the `k ≥ 1` half of the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianChannel {
    pub model: SpectrumModel,
    pub rho: ScaleRule,
    pub nu: ScaleRule,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    /// Signal dominates: `λ_k ρ_k ≥ ε ν_k`.
    I,
    /// Noise dominates.
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub k: usize,
    /// `λ_k ρ_k / (ε ν_k)`.
    pub snr: f64,
    /// Squared correlation of `ξ_k` and `η_k`.
    pub r_squared: f64,
    /// `J(ξ_k, η_k) = -½ ln(1 - r²)`.
    pub j_nats: f64,
    pub membership: Membership,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Labels sorted by decreasing `λ_k ρ_k / ν_k`.
    pub ordering: Vec<usize>,
    /// Signal-dominant labels, in `ordering` order.
    pub signal: Vec<usize>,
    /// Noise-dominant labels, in `ordering` order.
    pub noise: Vec<usize>,
    /// Separating position in `ordering`: the first `k_i` labels form `I`.
    pub k_i: usize,
    /// Every retained label is signal-dominant; `I` may extend past `K_max`.
    pub saturated: bool,
}

/// Two Gaussian factors of the component posterior: the prior `p₁` and the likelihood `p₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFactors {
    pub mean1: f64,
    pub var1: f64,
    pub mean2: f64,
    pub var2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationTotals {
    /// `Σ_{k ∈ I} ½ ln(1 + snr²)`.
    pub exact_nats: f64,
    /// `Σ_{k ∈ I} ln(snr)`.
    pub approx_nats: f64,
}

/// Splits raw component triples `(λ_k, ρ_k, ν_k)` into signal- and
/// noise-dominant sets. Labels are 1-based positions in the slices.
pub fn partition_components(lambda: &[f64], rho: &[f64], nu: &[f64], eps: f64) -> Result<Partition> {
    if lambda.len() != rho.len() || lambda.len() != nu.len() {
        return Err(Error::Usage("component slices differ in length".into()));
    }
    let ratio: Vec<f64> = (0..lambda.len()).map(|i| lambda[i] * rho[i] / nu[i]).collect();
    partition_by_key(&ratio, |k| lambda[k - 1] * rho[k - 1] >= eps * nu[k - 1])
}

/// Orders labels by decreasing `key` (any increasing function of `λρ/ν`)
/// and splits off the signal-dominant prefix.
fn partition_by_key(key: &[f64], is_signal: impl Fn(usize) -> bool) -> Result<Partition> {
    let mut ordering: Vec<usize> = (1..=key.len()).collect();
    ordering.sort_by(|&a, &b| key[b - 1].partial_cmp(&key[a - 1]).unwrap_or(Ordering::Equal));
    for w in ordering.windows(2) {
        if key[w[0] - 1] == key[w[1] - 1] {
            return Err(Error::Validation(format!(
                "components {} and {} have identical ratio λρ/ν",
                w[0].min(w[1]),
                w[0].max(w[1]),
            )));
        }
    }
    let k_i = ordering.iter().take_while(|&&k| is_signal(k)).count();
    let (signal, noise): (Vec<usize>, Vec<usize>) = ordering.iter().partition(|&&k| is_signal(k));
    if signal.len() != k_i {
        return Err(Error::Numeric(
            "signal set is not a prefix of the ratio ordering".into(),
        ));
    }
    let saturated = !key.is_empty() && k_i == key.len();
    Ok(Partition { ordering, signal, noise, k_i, saturated })
}

impl GaussianChannel {
    pub fn new(model: SpectrumModel, rho: ScaleRule, nu: ScaleRule, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Domain(format!("noise scale must be non-negative, got {epsilon}")));
        }
        let ch = Self { model, rho, nu, epsilon };
        ch.validate()?;
        Ok(ch)
    }

    fn validate(&self) -> Result<()> {
        for k in 1..=self.k_max() {
            let (r, n) = (self.rho_k(k), self.nu_k(k));
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Validation(format!("ρ_{k} = {r} is not positive")));
            }
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::Validation(format!("ν_{k} = {n} is not positive")));
            }
        }
        self.partition()?;
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.model.k_max()
    }

    /// Same channel at another noise scale.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.model.clone(), self.rho.clone(), self.nu.clone(), epsilon)
    }

    pub fn lambda_k(&self, k: usize) -> f64 {
        self.model.lambda(k)
    }

    pub fn rho_k(&self, k: usize) -> f64 {
        self.rho.value(k, &self.model)
    }

    pub fn nu_k(&self, k: usize) -> f64 {
        self.nu.value(k, &self.model)
    }

    fn rhos(&self) -> Vec<f64> {
        (1..=self.k_max()).map(|k| self.rho_k(k)).collect()
    }

    /// `Tr R_ξξ = Σ_k ρ_k²`, when certified finite.
    pub fn trace(&self) -> Option<f64> {
        let tail = self.rho.square_tail(self.k_max())?;
        Some(self.rhos().iter().map(|r| r * r).sum::<f64>() + tail)
    }

    pub fn is_trace_class(&self) -> bool {
        self.rho.square_tail(self.k_max()).is_some()
    }

    fn require_trace(&self) -> Result<f64> {
        self.trace().ok_or_else(|| {
            Error::Unsupported(
                "prior covariance is not certified trace class (Σρ_k² < ∞); the mean square error is infinite"
                    .into(),
            )
        })
    }

    pub fn component_information(&self, k: usize) -> Result<ComponentInfo> {
        if k == 0 || k > self.k_max() {
            return Err(Error::Domain(format!("component {k} outside 1..={}", self.k_max())));
        }
        let signal = self.lambda_k(k) * self.rho_k(k);
        let noise = self.epsilon * self.nu_k(k);
        Ok(component_from(k, signal, noise))
    }

    pub fn components(&self) -> Vec<ComponentInfo> {
        (1..=self.k_max())
            .map(|k| component_from(k, self.lambda_k(k) * self.rho_k(k), self.epsilon * self.nu_k(k)))
            .collect()
    }

    /// Ordering uses `log₂ λ_k` from the model, so eigenvalues that
    /// underflow to zero still sort by their true size.
    pub fn partition(&self) -> Result<Partition> {
        let key: Vec<f64> = (1..=self.k_max())
            .map(|k| self.model.log2_lambda(k) + self.rho_k(k).log2() - self.nu_k(k).log2())
            .collect();
        partition_by_key(&key, |k| self.lambda_k(k) * self.rho_k(k) >= self.epsilon * self.nu_k(k))
    }

    /// Component estimate `ḡ_k / λ_k` on `I`, zero on `N`.
    pub fn posterior_estimate(&self, data: &CoefficientVector) -> Result<CoefficientVector> {
        data.check_basis(&self.model)?;
        if data.layout() != Layout::OneSided {
            return Err(Error::Usage("the channel acts on one-sided (k ≥ 1) coefficients".into()));
        }
        let part = self.partition()?;
        let mut keep = vec![false; self.k_max() + 1];
        for &k in &part.signal {
            keep[k] = true;
        }
        let entries = data
            .modes()
            .map(|(k, g)| {
                let k = k as usize;
                if k <= self.k_max() && keep[k] {
                    g / self.lambda_k(k)
                } else {
                    0.0
                }
            })
            .collect();
        data.with_entries(entries)
    }

    pub fn posterior_density_params(&self, k: usize, g_k: f64) -> Result<PosteriorFactors> {
        if k == 0 || k > self.k_max() {
            return Err(Error::Domain(format!("component {k} outside 1..={}", self.k_max())));
        }
        let (l, r, n) = (self.lambda_k(k), self.rho_k(k), self.nu_k(k));
        let sd2 = self.epsilon * n / l;
        Ok(PosteriorFactors { mean1: 0.0, var1: r * r, mean2: g_k / l, var2: sd2 * sd2 })
    }

    /// `E‖ξ - B_I η‖² = Σ_{k ∈ N} ρ_k² + Σ_{k ∈ I} (ε ν_k / λ_k)²`, with labels
    /// beyond `K_max` counted in `N`.
    pub fn mse_closed_form(&self) -> Result<f64> {
        self.require_trace()?;
        let tail = self.rho.square_tail(self.k_max()).unwrap_or_default();
        let part = self.partition()?;
        let mut in_signal = vec![false; self.k_max() + 1];
        for &k in &part.signal {
            in_signal[k] = true;
        }
        let mut total = 0.0;
        for (k, &signal) in in_signal.iter().enumerate().skip(1) {
            total += if signal {
                (self.epsilon * self.nu_k(k) / self.lambda_k(k)).powi(2)
            } else {
                self.rho_k(k).powi(2)
            };
        }
        Ok(total + tail)
    }

    /// Largest `m` with `Σ_{k ≤ m} (ρ_k² + ε² ν_k² / λ_k²) ≤ Tr R_ξξ`; `K_max` stands in for ∞.
    pub fn k_alpha(&self) -> Result<usize> {
        let gamma = self.require_trace()?;
        let mut acc = 0.0;
        for k in 1..=self.k_max() {
            acc += self.rho_k(k).powi(2);
            acc += (self.epsilon * self.nu_k(k) / self.lambda_k(k)).powi(2);
            if acc > gamma {
                return Ok(k - 1);
            }
        }
        Ok(self.k_max())
    }

    pub fn total_information(&self) -> Result<InformationTotals> {
        let part = self.partition()?;
        Ok(self.information_over(&part.signal))
    }

    fn information_over(&self, labels: &[usize]) -> InformationTotals {
        let mut exact = 0.0;
        let mut approx = 0.0;
        for &k in labels {
            let c = component_from(k, self.lambda_k(k) * self.rho_k(k), self.epsilon * self.nu_k(k));
            exact += c.j_nats;
            approx += c.snr.ln();
        }
        InformationTotals { exact_nats: exact, approx_nats: approx }
    }
}

fn component_from(k: usize, signal: f64, noise: f64) -> ComponentInfo {
    let membership = if signal >= noise { Membership::I } else { Membership::N };
    let snr = signal / noise;
    let (r_squared, j_nats) = if snr.is_finite() {
        let s2 = snr * snr;
        (s2 / (1.0 + s2), 0.5 * s2.ln_1p())
    } else {
        (1.0, f64::INFINITY)
    };
    ComponentInfo { k, snr, r_squared, j_nats, membership }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremalCase {
    /// Prior and noise scales comparable: `ρ_k = ν_k = 1`.
    Alpha,
    /// Signal comparable to noise shape: `ρ_k = (1 + δ_k)/λ_k`, `ν_k = 1`.
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalComparison {
    pub case: ExtremalCase,
    pub epsilon: f64,
    pub k0: usize,
    pub k_i: usize,
    pub exact_nats: f64,
    pub approx_nats: f64,
    /// Metric counterpart in nats: the volume lower bound (α) or `k₀ ln(1/ε)` (β).
    pub target_nats: f64,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Probabilistic information of the two extremal channels next to the matching metric quantity.
pub fn extremal_comparison(model: &SpectrumModel, eps: f64, case: ExtremalCase) -> Result<ExtremalComparison> {
    let top = model.lambda(1);
    if !(eps > 0.0 && eps < top) {
        return Err(Error::Domain(format!("need 0 < ε < λ_1 = {top}, got {eps}")));
    }
    let e = Epsilon::Value(eps);
    let cutoff = k0(model, &e)?;
    match case {
        ExtremalCase::Alpha => {
            let ch = GaussianChannel::new(
                model.clone(),
                ScaleRule::Constant { value: 1.0 },
                ScaleRule::Constant { value: 1.0 },
                eps,
            )?;
            let part = ch.partition()?;
            let totals = ch.information_over(&part.signal);
            Ok(ExtremalComparison {
                case,
                epsilon: eps,
                k0: cutoff,
                k_i: part.k_i,
                exact_nats: totals.exact_nats,
                approx_nats: totals.approx_nats,
                target_nats: NATS_PER_BIT * entropy_lower_bound(model, &e, Sided::OneSided)?,
                target: "entropy_lower_bound".into(),
                diagnostic: part.saturated.then(|| "signal set reaches K_max".to_string()),
            })
        }
        ExtremalCase::Beta => {
            let ch = GaussianChannel::new(
                model.clone(),
                ScaleRule::InverseEigen { perturbation: EXTREMAL_PERTURBATION },
                ScaleRule::Constant { value: 1.0 },
                eps,
            )?;
            let part = ch.partition()?;
            // Every component is signal-dominant here; the sum is capped at k₀(ε) terms.
            let capped: Vec<usize> = part.signal.iter().copied().take(cutoff).collect();
            let totals = ch.information_over(&capped);
            Ok(ExtremalComparison {
                case,
                epsilon: eps,
                k0: cutoff,
                k_i: capped.len(),
                exact_nats: totals.exact_nats,
                approx_nats: totals.approx_nats,
                target_nats: cutoff as f64 * (1.0 / eps).ln(),
                target: "k0_ln_inv_eps".into(),
                diagnostic: Some(
                    "ρ_k ∝ 1/λ_k is not trace class: mse and k_alpha are disabled; sum capped at k0(ε) terms"
                        .into(),
                ),
            })
        }
    }
}
