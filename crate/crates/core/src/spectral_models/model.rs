use std::f64::consts::{LOG2_E, PI};

use serde::{Deserialize, Serialize};

use crate::epsilon::Epsilon;
use crate::error::{Error, Result};

pub const DEFAULT_K_MAX: usize = 256;

/// Largest count the enumerative search will certify; beyond this the
/// index is no longer exactly representable alongside `f64` arithmetic.
const COUNT_LIMIT: usize = 1 << 52;

/// Closed-form eigen-systems for the built-in operators, or a tabulated spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum ModelKind {
    /// Harmonic continuation from radius `a` to radius `b`: `λ_k = (a/b)^|k|`.
    Poisson { a: f64, b: f64 },
    /// Backward heat flow on the ring from time `a` back to time `b`:
    /// `λ_k = exp(-D k² (a - b))`.
    Heat {
        #[serde(rename = "D")]
        diffusivity: f64,
        a: f64,
        b: f64,
    },
    /// Kernel `(1-x)y` for `y ≤ x`, `x(1-y)` otherwise, on `[0,1]`: `λ_k = 1/(k²π²)`.
    Green,
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexScheme {
    /// `k = 1, 2, ...`
    OneSided,
    /// Fourier index `k ∈ ℤ`; `|k| ≥ 1` has multiplicity two.
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct SpectrumModel {
    #[serde(flatten)]
    kind: ModelKind,
    #[serde(rename = "K_max")]
    k_max: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_ties: bool,
}

#[derive(Deserialize)]
struct RawModel {
    #[serde(flatten)]
    kind: ModelKind,
    #[serde(rename = "K_max", default)]
    k_max: Option<usize>,
    #[serde(default)]
    allow_ties: bool,
}

impl TryFrom<RawModel> for SpectrumModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let mut model = SpectrumModel::new(raw.kind)?;
        if raw.allow_ties {
            model = model.allowing_ties()?;
        }
        match raw.k_max {
            Some(k) => model.with_k_max(k),
            None => Ok(model),
        }
    }
}

impl SpectrumModel {
    pub fn new(kind: ModelKind) -> Result<Self> {
        let k_max = match &kind {
            ModelKind::Poisson { a, b } => {
                if !(a.is_finite() && b.is_finite() && 0.0 < *a && a < b) {
                    return Err(Error::Validation(format!(
                        "poisson model requires 0 < a < b, got a={a}, b={b}"
                    )));
                }
                DEFAULT_K_MAX
            }
            ModelKind::Heat { diffusivity, a, b } => {
                if !(diffusivity.is_finite() && *diffusivity > 0.0) {
                    return Err(Error::Validation(format!(
                        "heat model requires D > 0, got {diffusivity}"
                    )));
                }
                if !(a.is_finite() && b.is_finite() && a > b) {
                    return Err(Error::Validation(format!(
                        "heat model requires data time a > solution time b, got a={a}, b={b}"
                    )));
                }
                DEFAULT_K_MAX
            }
            ModelKind::Green => DEFAULT_K_MAX,
            ModelKind::Tabulated { values } => {
                validate_table(values, false)?;
                values.len().min(DEFAULT_K_MAX)
            }
        };
        Ok(Self { kind, k_max, allow_ties: false })
    }

    pub fn poisson(a: f64, b: f64) -> Result<Self> {
        Self::new(ModelKind::Poisson { a, b })
    }

    pub fn heat(diffusivity: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(ModelKind::Heat { diffusivity, a, b })
    }

    pub fn green() -> Self {
        Self { kind: ModelKind::Green, k_max: DEFAULT_K_MAX, allow_ties: false }
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        Self::new(ModelKind::Tabulated { values })
    }

    /// Accept tied values in a tabulated spectrum. Tied modes enter and
    /// leave every cutoff together. This is outside the strict ordering
    /// the theory assumes, so strict-decrease checks elsewhere may reject it.
    pub fn allowing_ties(mut self) -> Result<Self> {
        if let ModelKind::Tabulated { values } = &self.kind {
            validate_table(values, true)?;
        }
        self.allow_ties = true;
        Ok(self)
    }

    pub fn with_k_max(mut self, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::Validation("K_max must be at least 1".into()));
        }
        if let ModelKind::Tabulated { values } = &self.kind {
            if k_max > values.len() {
                return Err(Error::Validation(format!(
                    "K_max={k_max} exceeds the {} tabulated values",
                    values.len()
                )));
            }
        }
        self.k_max = k_max;
        Ok(self)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn allows_ties(&self) -> bool {
        self.allow_ties
    }

    pub fn index_scheme(&self) -> IndexScheme {
        match self.kind {
            ModelKind::Poisson { .. } | ModelKind::Heat { .. } => IndexScheme::TwoSided,
            ModelKind::Green | ModelKind::Tabulated { .. } => IndexScheme::OneSided,
        }
    }

    pub fn is_two_sided(&self) -> bool {
        self.index_scheme() == IndexScheme::TwoSided
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Poisson { .. } => "poisson",
            ModelKind::Heat { .. } => "heat",
            ModelKind::Green => "green",
            ModelKind::Tabulated { .. } => "tabulated",
        }
    }

    /// `λ_k`. Two-sided models accept any integer and report `λ_|k|`
    /// (with `λ_0 = 1`); one-sided models require `k ≥ 1`.
    pub fn eigenvalue(&self, k: i64) -> Result<f64> {
        if self.is_two_sided() {
            return Ok(self.lambda(k.unsigned_abs() as usize));
        }
        if k < 1 {
            return Err(Error::Domain(format!("one-sided index must be ≥ 1, got {k}")));
        }
        if let ModelKind::Tabulated { values } = &self.kind {
            if k as usize > values.len() {
                return Err(Error::Domain(format!(
                    "index {k} beyond the {} tabulated values",
                    values.len()
                )));
            }
        }
        Ok(self.lambda(k as usize))
    }

    /// `λ_k` for a non-negative index, without domain checks. Index 0 is the
    /// Fourier center mode; tabulated spectra read as 0 past their end.
    pub(crate) fn lambda(&self, k: usize) -> f64 {
        let kf = k as f64;
        match &self.kind {
            ModelKind::Poisson { a, b } => (a / b).powf(kf),
            ModelKind::Heat { diffusivity, a, b } => (-diffusivity * kf * kf * (a - b)).exp(),
            ModelKind::Green => 1.0 / (kf * kf * PI * PI),
            ModelKind::Tabulated { values } => {
                if k == 0 {
                    f64::INFINITY
                } else {
                    values.get(k - 1).copied().unwrap_or(0.0)
                }
            }
        }
    }

    /// `log2 λ_k`, finite even where `λ_k` underflows.
    pub(crate) fn log2_lambda(&self, k: usize) -> f64 {
        let kf = k as f64;
        match &self.kind {
            ModelKind::Poisson { a, b } => kf * (a / b).log2(),
            ModelKind::Heat { diffusivity, a, b } => -diffusivity * kf * kf * (a - b) * LOG2_E,
            ModelKind::Green => -2.0 * (kf * PI).log2(),
            ModelKind::Tabulated { .. } => self.lambda(k).log2(),
        }
    }

    /// Number of times the one-sided index `k` occurs in the full spectrum.
    pub fn multiplicity(&self, k: usize) -> usize {
        if self.is_two_sided() && k >= 1 {
            2
        } else {
            1
        }
    }

    /// `λ_k ≥ ε` for one-sided `k ≥ 1`.
    pub(crate) fn covers(&self, k: usize, eps: &Epsilon) -> bool {
        if let ModelKind::Tabulated { values } = &self.kind {
            if k > values.len() {
                return false;
            }
        }
        eps.covered_by(self.lambda(k), self.log2_lambda(k))
    }

    /// `log2(λ_k / ε)`.
    pub(crate) fn log2_ratio(&self, k: usize, eps: &Epsilon) -> f64 {
        eps.log2_ratio(self.lambda(k), self.log2_lambda(k))
    }

    /// Number of one-sided indices with `λ_k ≥ ε`, found by direct
    /// comparison against the spectrum (galloping then bisection over the
    /// monotone predicate).
    pub fn count_at_least(&self, eps: &Epsilon) -> Result<usize> {
        if let ModelKind::Tabulated { values } = &self.kind {
            return Ok(values.iter().take_while(|&&v| eps.covered_by(v, v.log2())).count());
        }
        if !self.covers(1, eps) {
            return Ok(0);
        }
        // Invariant: covers(lo) && !covers(hi).
        let mut lo = 1usize;
        let mut hi = 2usize;
        while self.covers(hi, eps) {
            lo = hi;
            hi *= 2;
            if hi > COUNT_LIMIT {
                return Err(Error::Numeric(format!(
                    "more than 2^52 eigenvalues lie above epsilon={eps}"
                )));
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.covers(mid, eps) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// The first `k_max` one-sided eigenvalues.
    pub fn spectrum(&self) -> Vec<f64> {
        (1..=self.k_max).map(|k| self.lambda(k)).collect()
    }

    /// CSV with header `k,lambda_k,multiplicity`; two-sided models include the `k = 0` row.
    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from("k,lambda_k,multiplicity\n");
        let start = if self.is_two_sided() { 0 } else { 1 };
        for k in start..=self.k_max {
            out.push_str(&format!(
                "{k},{},{}\n",
                crate::format::float(self.lambda(k)),
                self.multiplicity(k)
            ));
        }
        out
    }

    /// Checks `λ_1 ≤ 1` and strict decrease over the retained indices.
    pub fn check_strictly_decreasing(&self) -> Result<()> {
        let mut prev = self.lambda(1);
        if prev > 1.0 {
            return Err(Error::Validation(format!("λ_1 = {prev} exceeds 1")));
        }
        for k in 2..=self.k_max {
            let cur = self.lambda(k);
            if !(cur < prev) && !(self.allow_ties && cur == prev) {
                return Err(Error::Validation(format!(
                    "spectrum not strictly decreasing at k={k}: {prev} then {cur}"
                )));
            }
            prev = cur;
        }
        Ok(())
    }
}

fn validate_table(values: &[f64], allow_ties: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Validation("tabulated spectrum is empty".into()));
    }
    for (i, &v) in values.iter().enumerate() {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Validation(format!(
                "tabulated value #{} = {v} outside (0, 1]",
                i + 1
            )));
        }
    }
    for (i, w) in values.windows(2).enumerate() {
        let ok = if allow_ties { w[1] <= w[0] } else { w[1] < w[0] };
        if !ok {
            return Err(Error::Validation(format!(
                "tabulated values must be strictly decreasing: #{}={} then #{}={}",
                i + 1,
                w[0],
                i + 2,
                w[1]
            )));
        }
    }
    Ok(())
}
