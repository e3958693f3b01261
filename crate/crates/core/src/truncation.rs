//! Spectral-cutoff regularization.
//!
//! The regularized solution keeps `ḡ_k / λ_k` for every mode with
//! `λ_k ≥ ε` and drops the rest. The cutoff boundary `λ_k = ε` is kept.

use serde::{Deserialize, Serialize};

use crate::epsilon::Epsilon;
use crate::error::{Error, Result};
use crate::spectral_models::{forward_apply, CoefficientVector, ModelKind, SpectrumModel};

/// Ratio `|ḡ_k| / λ_k` above which data is flagged as likely outside the range of the operator.
pub const RANGE_ADVISORY_RATIO: f64 = 1e12;

/// Relative slack applied to the inequality checks, covering rounding only.
const ROUNDING_SLACK: f64 = 1e-12;

/// Relative widening of a closed-form count before flooring, so that a tie
/// `λ_k = ε` computed with a few ulps of error still lands on `k`.
const TIE_SLACK: f64 = 8.0 * f64::EPSILON;

/// `k₀(ε) = max{k ≥ 1 : λ_k ≥ ε}`, 0 when `λ_1 < ε`, by direct comparison
/// against the spectrum. One-sided count.
pub fn k0(model: &SpectrumModel, eps: &Epsilon) -> Result<usize> {
    model.count_at_least(eps)
}

/// Count with multiplicity: `2 k₀ + 1` for Fourier models (the center mode
/// has `λ_0 = 1`), `k₀` otherwise.
pub fn k0_total(model: &SpectrumModel, eps: &Epsilon) -> Result<usize> {
    let k = k0(model, eps)?;
    if model.is_two_sided() {
        let center = usize::from(eps.covered_by(1.0, 0.0));
        Ok(2 * k + center)
    } else {
        Ok(k)
    }
}

/// Printed closed forms for the built-in operators:
/// `[log(1/ε) / log(b/a)]`, `[(ln(1/ε) / (D(a-b)))^{1/2}]`, `[1/(π√ε)]`.
/// Values within rounding of an integer are taken as ties and included.
pub fn k0_closed_form(model: &SpectrumModel, eps: &Epsilon) -> Result<usize> {
    let x = match model.kind() {
        ModelKind::Poisson { a, b } => eps.bits() / (b / a).log2(),
        ModelKind::Heat { diffusivity, a, b } => (-eps.ln() / (diffusivity * (a - b))).sqrt(),
        ModelKind::Green => (0.5 * eps.bits()).exp2() / std::f64::consts::PI,
        ModelKind::Tabulated { .. } => {
            return Err(Error::Unsupported("no closed form for a tabulated spectrum".into()))
        }
    };
    if x.is_nan() || x <= 0.0 {
        return Ok(0);
    }
    if !x.is_finite() || x > (1u64 << 52) as f64 {
        return Err(Error::Numeric(format!("closed-form count {x} not representable")));
    }
    Ok((x * (1.0 + TIE_SLACK)).floor() as usize)
}

/// Largest `k ≤ K_max` with `λ_k ≥ ε β_k` for a positive constraint spectrum `β`.
///
/// Fails as inconclusive when the condition still holds at `K_max`.
pub fn generalized_k0<B>(model: &SpectrumModel, beta: B, eps: f64) -> Result<usize>
where
    B: Fn(usize) -> f64,
{
    check_eps(eps)?;
    let mut last = 0;
    for k in 1..=model.k_max() {
        let b = beta(k);
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Domain(format!("β_{k} = {b} is not positive")));
        }
        if model.lambda(k) >= eps * b {
            last = k;
        }
    }
    if last == model.k_max() {
        return Err(Error::Inconclusive(format!(
            "λ_k ≥ ε β_k still holds at K_max = {}",
            model.k_max()
        )));
    }
    Ok(last)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub epsilon: f64,
    pub k0: usize,
    /// Modes kept in `f_star`, counted with multiplicity.
    pub retained_modes: usize,
    pub f_star: CoefficientVector,
    /// `‖A(f - f*)‖` for a supplied reference `f`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_y: Option<f64>,
    /// `‖f - f*‖`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_x: Option<f64>,
    /// `‖A(f - f*)‖² + ε² ‖f - f*‖²`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combined: Option<f64>,
    /// Retained indices where `|ḡ_k| / λ_k > 1e12`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub range_advisories: Vec<i64>,
}

impl TruncationReport {
    /// Fills the reference diagnostics against a known solution `f`.
    pub fn with_reference(mut self, model: &SpectrumModel, f: &CoefficientVector) -> Result<Self> {
        let diff = f.sub(&self.f_star)?;
        let residual = forward_apply(model, &diff)?.norm();
        let distance = diff.norm();
        self.residual_y = Some(residual);
        self.distance_x = Some(distance);
        self.combined = Some(residual * residual + self.epsilon * self.epsilon * distance * distance);
        Ok(self)
    }
}

/// `f* = Σ_{λ_k ≥ ε} (ḡ_k / λ_k) ψ_k`.
pub fn truncated_solution(
    model: &SpectrumModel,
    data: &CoefficientVector,
    eps: f64,
) -> Result<TruncationReport> {
    check_eps(eps)?;
    data.check_basis(model)?;
    let cutoff = k0(model, &Epsilon::Value(eps))?;
    let mut entries = Vec::with_capacity(data.len());
    let mut retained = 0;
    let mut advisories = Vec::new();
    for (k, g) in data.modes() {
        let m = k.unsigned_abs() as usize;
        let lambda = model.lambda(m);
        let keep = if m == 0 { lambda >= eps } else { m <= cutoff };
        if keep {
            retained += 1;
            if g.abs() > RANGE_ADVISORY_RATIO * lambda {
                advisories.push(k);
            }
            entries.push(g / lambda);
        } else {
            entries.push(0.0);
        }
    }
    Ok(TruncationReport {
        epsilon: eps,
        k0: cutoff,
        retained_modes: retained,
        f_star: data.with_entries(entries)?,
        residual_y: None,
        distance_x: None,
        combined: None,
        range_advisories: advisories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(value: f64, bound: f64) -> Self {
        Self { value, bound, holds: value <= bound * (1.0 + ROUNDING_SLACK) }
    }
}

/// Stability of the cutoff solution under `‖Af - ḡ‖ ≤ ε`, `‖f‖ ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    /// `‖A(f - f*)‖ ≤ √2 ε`.
    pub residual: BoundCheck,
    /// `‖f - f*‖ ≤ √2`.
    pub distance: BoundCheck,
    /// `‖A(f - f*)‖² + ε² ‖f - f*‖² ≤ 4ε²`.
    pub combined: BoundCheck,
}

impl StabilityCheck {
    pub fn all_hold(&self) -> bool {
        self.residual.holds && self.distance.holds && self.combined.holds
    }
}

pub fn lemma1_check(
    model: &SpectrumModel,
    f: &CoefficientVector,
    data: &CoefficientVector,
    eps: f64,
) -> Result<StabilityCheck> {
    check_eps(eps)?;
    check_admissible(model, f, data, eps)?;
    let report = truncated_solution(model, data, eps)?.with_reference(model, f)?;
    let (r, d, c) = (
        report.residual_y.unwrap_or_default(),
        report.distance_x.unwrap_or_default(),
        report.combined.unwrap_or_default(),
    );
    Ok(StabilityCheck {
        residual: BoundCheck::new(r, std::f64::consts::SQRT_2 * eps),
        distance: BoundCheck::new(d, std::f64::consts::SQRT_2),
        combined: BoundCheck::new(c, 4.0 * eps * eps),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakProbePoint {
    pub epsilon: f64,
    /// `|(f - f*, v)|`.
    pub value: f64,
    /// `2ε (Σ |v_k|² / (λ_k² + ε²))^{1/2}`.
    pub majorant: f64,
}

/// `|(f - f*, v)|` for each `(ε, ḡ)` pair, alongside its Schwarz majorant.
pub fn weak_convergence_probe(
    model: &SpectrumModel,
    f: &CoefficientVector,
    v: &CoefficientVector,
    runs: &[(f64, CoefficientVector)],
) -> Result<Vec<WeakProbePoint>> {
    if v.norm() > 1.0 + ROUNDING_SLACK {
        return Err(Error::Domain(format!("probe direction has norm {} > 1", v.norm())));
    }
    runs.iter()
        .map(|(eps, data)| {
            let eps = *eps;
            check_eps(eps)?;
            check_admissible(model, f, data, eps)?;
            let report = truncated_solution(model, data, eps)?;
            let value = f.sub(&report.f_star)?.dot(v)?.abs();
            let weighted: f64 = v
                .modes()
                .map(|(k, c)| {
                    let l = model.lambda(k.unsigned_abs() as usize);
                    c * c / (l * l + eps * eps)
                })
                .sum();
            Ok(WeakProbePoint { epsilon: eps, value, majorant: 2.0 * eps * weighted.sqrt() })
        })
        .collect()
}

fn check_admissible(
    model: &SpectrumModel,
    f: &CoefficientVector,
    data: &CoefficientVector,
    eps: f64,
) -> Result<()> {
    let misfit = forward_apply(model, f)?.sub(data)?.norm();
    let f_norm = f.norm();
    if misfit > eps * (1.0 + ROUNDING_SLACK) || f_norm > 1.0 + ROUNDING_SLACK {
        return Err(Error::Precondition(format!(
            "need ‖Af - ḡ‖ ≤ ε and ‖f‖ ≤ 1; measured ‖Af - ḡ‖ = {misfit:e} (ε = {eps:e}), ‖f‖ = {f_norm}"
        )));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> Epsilon {
        Epsilon::Value(x)
    }

    #[test]
    fn enumerative_examples() {
        let p = SpectrumModel::poisson(0.5, 1.0).unwrap();
        // 2^-k ≥ 0.1 for k = 1, 2, 3.
        assert_eq!(k0(&p, &v(0.1)).unwrap(), 3);
        // 1/(k²π²) ≥ 1e-3  ⇔  k² ≤ 101.32.
        assert_eq!(k0(&SpectrumModel::green(), &v(1e-3)).unwrap(), 10);
        let h = SpectrumModel::heat(1.0, 2.0, 1.0).unwrap();
        assert_eq!(k0(&h, &v((-5.0f64).exp())).unwrap(), 2);
        assert_eq!(k0(&p, &v(0.6)).unwrap(), 0);
        assert_eq!(k0_total(&p, &v(0.1)).unwrap(), 7);
        assert_eq!(k0_total(&p, &v(2.0)).unwrap(), 0);
    }

    #[test]
    fn boundary_is_included() {
        let p = SpectrumModel::poisson(0.5, 1.0).unwrap();
        assert_eq!(k0(&p, &v(0.125)).unwrap(), 3);
        assert_eq!(k0_closed_form(&p, &v(0.125)).unwrap(), 3);
        let g = SpectrumModel::green();
        let l1 = g.eigenvalue(1).unwrap();
        assert_eq!(k0(&g, &v(l1)).unwrap(), 1);
        assert_eq!(k0_closed_form(&g, &v(l1)).unwrap(), 1);
    }

    #[test]
    fn closed_form_examples() {
        let p = SpectrumModel::poisson(0.5, 1.0).unwrap();
        assert_eq!(k0_closed_form(&p, &v(0.1)).unwrap(), 3);
        let h = SpectrumModel::heat(1.0, 2.0, 1.0).unwrap();
        assert_eq!(k0_closed_form(&h, &v((-5.0f64).exp())).unwrap(), 2);
        assert_eq!(k0_closed_form(&SpectrumModel::green(), &v(1e-3)).unwrap(), 10);
        let t = SpectrumModel::tabulated(vec![0.5, 0.25]).unwrap();
        assert!(matches!(k0_closed_form(&t, &v(0.3)), Err(Error::Unsupported(_))));
        assert_eq!(k0_closed_form(&p, &v(2.0)).unwrap(), 0);
    }

    #[test]
    fn generalized_cutoff() {
        let g = SpectrumModel::green();
        assert_eq!(generalized_k0(&g, |_| 1.0, 1e-3).unwrap(), 10);
        // 1/(k³π²) ≥ 1e-3  ⇔  k³ ≤ 101.32.
        assert_eq!(generalized_k0(&g, |k| k as f64, 1e-3).unwrap(), 4);
        let eps = 1e-3;
        assert_eq!(generalized_k0(&g, |k| 2.0 * g.lambda(k) / eps, eps).unwrap(), 0);
        let short = SpectrumModel::green().with_k_max(5).unwrap();
        assert!(matches!(
            generalized_k0(&short, |_| 1.0, 1e-3),
            Err(Error::Inconclusive(_))
        ));
        assert!(matches!(generalized_k0(&g, |_| 0.0, 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_inversion_below_cutoff() {
        let g = SpectrumModel::green().with_k_max(32).unwrap();
        let data = CoefficientVector::from_fn(&g, |k| g.lambda(k as usize));
        let eps = 0.5 * g.lambda(32);
        let rep = truncated_solution(&g, &data, eps).unwrap();
        for &c in rep.f_star.entries() {
            assert!((c - 1.0).abs() < 1e-12);
        }
        assert_eq!(rep.retained_modes, 32);
    }

    #[test]
    fn cutoff_above_top_eigenvalue_gives_zero() {
        let g = SpectrumModel::green().with_k_max(8).unwrap();
        let data = CoefficientVector::from_fn(&g, |_| 1.0);
        let rep = truncated_solution(&g, &data, 1.0).unwrap();
        assert_eq!(rep.k0, 0);
        assert_eq!(rep.f_star.norm(), 0.0);
    }

    #[test]
    fn two_sided_retains_multiplicity() {
        let p = SpectrumModel::poisson(0.5, 1.0).unwrap().with_k_max(8).unwrap();
        let data = CoefficientVector::from_fn(&p, |k| p.lambda(k.unsigned_abs() as usize));
        let rep = truncated_solution(&p, &data, 0.1).unwrap();
        assert_eq!(rep.retained_modes, 7);
        let nonzero: Vec<i64> = rep.f_star.modes().filter(|(_, c)| *c != 0.0).map(|(k, _)| k).collect();
        assert_eq!(nonzero, (-3..=3).collect::<Vec<_>>());
    }

    #[test]
    fn huge_ratios_are_flagged_not_clipped() {
        let g = SpectrumModel::green().with_k_max(4).unwrap();
        let data = CoefficientVector::one_sided(&g, vec![1e12, 0.0, 0.0, 0.0]);
        let rep = truncated_solution(&g, &data, 1e-3).unwrap();
        assert_eq!(rep.range_advisories, vec![1]);
        assert!((rep.f_star.entries()[0] - 1e12 * std::f64::consts::PI.powi(2)).abs() < 1e-3);
    }

    #[test]
    fn lemma1_noiseless() {
        let g = SpectrumModel::green().with_k_max(64).unwrap();
        let f = CoefficientVector::from_fn(&g, |k| 1.0 / k as f64).scaled(0.7);
        let f = f.scaled(1.0 / f.norm());
        let data = forward_apply(&g, &f).unwrap();
        for eps in [1e-1, 1e-2, 1e-3] {
            let chk = lemma1_check(&g, &f, &data, eps).unwrap();
            assert!(chk.all_hold());
            let cut = k0(&g, &v(eps)).unwrap();
            let tail: f64 = (cut + 1..=64)
                .map(|k| (g.lambda(k) * f.get(k as i64)).powi(2))
                .sum();
            assert!((chk.residual.value.powi(2) - tail).abs() <= 1e-15 + 1e-12 * tail);
            assert!(tail <= eps * eps);
        }
    }

    #[test]
    fn lemma1_pure_noise() {
        let g = SpectrumModel::green().with_k_max(16).unwrap();
        let eps = 1e-2;
        let f = CoefficientVector::zeros(&g);
        let n = CoefficientVector::from_fn(&g, |k| if k <= 3 { 1.0 } else { 0.0 });
        let n = n.scaled(eps / n.norm());
        let chk = lemma1_check(&g, &f, &n, eps).unwrap();
        assert!(chk.all_hold());
        let expect: f64 = (1..=3).map(|k| (n.get(k) / g.lambda(k as usize)).powi(2)).sum();
        assert!((chk.distance.value.powi(2) - expect).abs() < 1e-12);
        assert!(expect <= 1.0);
    }

    #[test]
    fn lemma1_rejects_inadmissible_input() {
        let g = SpectrumModel::green().with_k_max(4).unwrap();
        let f = CoefficientVector::one_sided(&g, vec![2.0, 0.0, 0.0, 0.0]);
        let data = forward_apply(&g, &f).unwrap();
        assert!(matches!(lemma1_check(&g, &f, &data, 0.1), Err(Error::Precondition(_))));
        let f = CoefficientVector::zeros(&g);
        let data = CoefficientVector::one_sided(&g, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(lemma1_check(&g, &f, &data, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn weak_probe_noiseless_first_mode() {
        let g = SpectrumModel::green().with_k_max(16).unwrap();
        let f = CoefficientVector::from_fn(&g, |k| 0.25 / k as f64);
        let psi1 = CoefficientVector::from_fn(&g, |k| if k == 1 { 1.0 } else { 0.0 });
        let data = forward_apply(&g, &f).unwrap();
        let runs: Vec<_> = [0.05, 0.01, 0.001].iter().map(|&e| (e, data.clone())).collect();
        let pts = weak_convergence_probe(&g, &f, &psi1, &runs).unwrap();
        assert!(pts.iter().all(|p| p.value == 0.0 && p.value <= p.majorant));
    }

    #[test]
    fn weak_probe_rejects_long_direction() {
        let g = SpectrumModel::green().with_k_max(4).unwrap();
        let f = CoefficientVector::zeros(&g);
        let big = CoefficientVector::one_sided(&g, vec![2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            weak_convergence_probe(&g, &f, &big, &[]),
            Err(Error::Domain(_))
        ));
    }
}
