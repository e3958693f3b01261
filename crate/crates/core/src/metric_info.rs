//! ε-entropy and ε-capacity of the image of the unit ball.
//!
//! The image is an ellipsoid with semi-axes `λ_k`. Its entropy is
//! sandwiched between a volume bound `Σ_{λ_k ≥ ε} log2(λ_k/ε)` and a
//! lattice-covering bound built on `k₀(ε/4)` axes. All quantities are in
//! bits and message lengths are only ever handled as base-2 exponents.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epsilon::Epsilon;
use crate::error::{Error, Result};
use crate::format;
use crate::spectral_models::SpectrumModel;
use crate::truncation::{k0, k0_total};

/// Growth-order fits below this exponent are treated as `ρ = 0`.
pub const ZERO_ORDER_THRESHOLD: f64 = 0.05;
pub const MIN_GRID_POINTS: usize = 8;
pub const MIN_GRID_DECADES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    /// Indices `k ≥ 1` only.
    #[default]
    OneSided,
    /// Every mode with its multiplicity, including the Fourier center.
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityBounds {
    pub epsilon: Epsilon,
    pub k0_eps: usize,
    pub k0_eps_over_4: usize,
    /// Lower bound on `H_ε`, hence on `C_ε`.
    pub lower_bits: f64,
    /// Upper bound on `H_{ε/2}`, hence on `C_ε`; `None` where the lattice
    /// bound does not apply.
    pub upper_bits: Option<f64>,
    pub sided: Sided,
}

fn count(model: &SpectrumModel, eps: &Epsilon, sided: Sided) -> Result<usize> {
    match sided {
        Sided::OneSided => k0(model, eps),
        Sided::Total => k0_total(model, eps),
    }
}

/// `Σ_{k=1}^{k₀(ε)} log2(λ_k/ε)`; zero when `ε ≥ λ_1`.
pub fn entropy_lower_bound(model: &SpectrumModel, eps: &Epsilon, sided: Sided) -> Result<f64> {
    let n = k0(model, eps)?;
    let half: f64 = (1..=n).map(|k| model.log2_ratio(k, eps)).sum();
    match sided {
        Sided::OneSided => Ok(half),
        Sided::Total if model.is_two_sided() => {
            let center = if eps.covered_by(1.0, 0.0) { eps.bits() } else { 0.0 };
            Ok(2.0 * half + center)
        }
        Sided::Total => Ok(half),
    }
}

/// `n [log2(1/ε) + log2 6 + ½ log2 n]` with `n = k₀(ε/4)`, an upper bound on `H_{ε/2}`.
pub fn entropy_upper_bound(model: &SpectrumModel, eps: &Epsilon, sided: Sided) -> Result<f64> {
    let quarter = eps.div_pow2(2);
    let n = count(model, &quarter, sided)?;
    if n == 0 {
        return Err(Error::NotApplicable(format!(
            "no eigenvalue reaches ε/4 at ε = {eps}; the lattice covering needs k₀(ε/4) ≥ 1"
        )));
    }
    let n = n as f64;
    Ok(n * (eps.bits() + 6f64.log2() + 0.5 * n.log2()))
}

pub fn capacity_interval(model: &SpectrumModel, eps: &Epsilon, sided: Sided) -> Result<CapacityBounds> {
    let upper_bits = match entropy_upper_bound(model, eps, sided) {
        Ok(u) => Some(u),
        Err(Error::NotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(CapacityBounds {
        epsilon: *eps,
        k0_eps: count(model, eps, sided)?,
        k0_eps_over_4: count(model, &eps.div_pow2(2), sided)?,
        lower_bits: entropy_lower_bound(model, eps, sided)?,
        upper_bits,
        sided,
    })
}

/// `log2 L_max ≈ k₀(ε) log2(1/ε)`, plus one bit for the two halves of a Fourier spectrum.
pub fn max_message_length_log2(model: &SpectrumModel, eps: &Epsilon, sided: Sided) -> Result<f64> {
    let n = k0(model, eps)?;
    let half = n as f64 * eps.bits();
    Ok(match sided {
        Sided::Total if model.is_two_sided() => half + 1.0,
        _ => half,
    })
}

pub const CAPACITY_CSV_HEADER: &str = "epsilon,k0,k0_quarter,lower_bits,upper_bits,logL_max";

pub fn capacity_csv_row(model: &SpectrumModel, eps: &Epsilon, sided: Sided) -> Result<String> {
    let b = capacity_interval(model, eps, sided)?;
    let l = max_message_length_log2(model, eps, sided)?;
    Ok(format!(
        "{},{},{},{},{},{}",
        eps,
        b.k0_eps,
        b.k0_eps_over_4,
        format::float(b.lower_bits),
        format::opt_float(b.upper_bits),
        format::float(l)
    ))
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

impl LinearFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        if !(sxx > 0.0) {
            return Err(Error::Validation("regression abscissae are all equal".into()));
        }
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
        Ok(Self { slope, intercept, residual: (rss / n).sqrt() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// Order of growth of the entropy, equal to the exponent of convergence.
    pub rho_hat: f64,
    /// Logarithmic order of growth, `μ̂ + 1`; only when `ρ̂ ≈ 0`.
    pub sigma_hat: Option<f64>,
    /// Slope of `ln k₀(ε)` against `ln(1/ε)`.
    pub lambda_hat: f64,
    /// Slope of `ln k₀(ε)` against `ln ln(1/ε)`.
    pub mu_hat: f64,
    /// Degree of compactness `1/ρ̂`.
    pub d_c: Option<f64>,
    /// Exponential degree of compactness `2^{1/σ̂}`.
    pub d_c_exp: Option<f64>,
    pub exponent_fit: LinearFit,
    pub log_exponent_fit: LinearFit,
}

/// Fits the growth exponents of the eigenvalue counting function `k₀(ε)`
/// over a decreasing grid.
///
/// The grid needs at least 8 points over at least 4 decades, all below `λ_1`.
pub fn growth_orders(model: &SpectrumModel, grid: &[Epsilon]) -> Result<GrowthEstimate> {
    validate_grid(model, grid)?;
    let mut x_lin = Vec::with_capacity(grid.len());
    let mut x_log = Vec::with_capacity(grid.len());
    let mut y = Vec::with_capacity(grid.len());
    for eps in grid {
        let n = k0(model, eps)?;
        let inv = -eps.ln();
        x_lin.push(inv);
        x_log.push(inv.ln());
        y.push((n as f64).ln());
    }
    let exponent_fit = LinearFit::fit(&x_lin, &y)?;
    let log_exponent_fit = LinearFit::fit(&x_log, &y)?;
    let lambda_hat = exponent_fit.slope;
    let mu_hat = log_exponent_fit.slope;
    let rho_hat = lambda_hat;
    let (sigma_hat, d_c, d_c_exp) = if rho_hat < ZERO_ORDER_THRESHOLD {
        let sigma = mu_hat + 1.0;
        (Some(sigma), None, Some((1.0 / sigma).exp2()))
    } else {
        (None, Some(1.0 / rho_hat), None)
    };
    Ok(GrowthEstimate {
        rho_hat,
        sigma_hat,
        lambda_hat,
        mu_hat,
        d_c,
        d_c_exp,
        exponent_fit,
        log_exponent_fit,
    })
}

fn validate_grid(model: &SpectrumModel, grid: &[Epsilon]) -> Result<()> {
    if grid.len() < MIN_GRID_POINTS {
        return Err(Error::Validation(format!(
            "growth fit needs at least {MIN_GRID_POINTS} grid points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1].log2() < w[0].log2())) {
        return Err(Error::Validation("epsilon grid must be strictly decreasing".into()));
    }
    let decades = (grid[0].log2() - grid[grid.len() - 1].log2()) * std::f64::consts::LOG10_2;
    if decades < MIN_GRID_DECADES {
        return Err(Error::Validation(format!(
            "epsilon grid spans {decades:.2} decades, need at least {MIN_GRID_DECADES}"
        )));
    }
    let below_top = match grid[0] {
        Epsilon::Value(e) => e < model.lambda(1),
        Epsilon::Pow2(e) => e < model.log2_lambda(1),
    };
    if !below_top {
        return Err(Error::Validation(format!(
            "grid starts at {} which is not below λ_1",
            grid[0]
        )));
    }
    Ok(())
}

/// `count` powers of two with exponents evenly spaced from `start` down to `end`.
pub fn pow2_grid(start: f64, end: f64, count: usize) -> Vec<Epsilon> {
    let step = (end - start) / (count - 1) as f64;
    (0..count).map(|i| Epsilon::Pow2(start + step * i as f64)).collect()
}

/// Log-spaced decimal grid from `hi` down to `lo`.
pub fn log_grid(hi: f64, lo: f64, count: usize) -> Vec<Epsilon> {
    let (a, b) = (hi.ln(), lo.ln());
    let step = (b - a) / (count - 1) as f64;
    (0..count).map(|i| Epsilon::Value((a + step * i as f64).exp())).collect()
}

pub const MAX_PACKING_DIM: usize = 3;

/// Size of a maximal ε-distinguishable subset (pairwise distance `> ε`)
/// of the ellipsoid with the given semi-axes, chosen greedily from the
/// grid `h ℤ^d` in lexicographic order.
///
/// Zero semi-axes collapse to the lower-dimensional problem.
pub fn greedy_packing_count(semi_axes: &[f64], eps: f64, grid_step: f64) -> Result<usize> {
    let dim = semi_axes.len();
    if dim == 0 {
        return Err(Error::Validation("need at least one semi-axis".into()));
    }
    if dim > MAX_PACKING_DIM {
        return Err(Error::Unsupported(format!(
            "packing oracle is limited to {MAX_PACKING_DIM} dimensions, got {dim}"
        )));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    if !(grid_step > 0.0 && grid_step <= 0.25 * eps * (1.0 + 1e-12)) {
        return Err(Error::Validation(format!(
            "grid step {grid_step} must lie in (0, ε/4 = {}]",
            0.25 * eps
        )));
    }
    if semi_axes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::Domain("semi-axes must be finite and non-negative".into()));
    }

    let extents: Vec<i64> = semi_axes
        .iter()
        .map(|a| (a / grid_step + 1e-9).floor() as i64)
        .collect();
    let mut shape = [1i64; MAX_PACKING_DIM];
    for (s, m) in shape.iter_mut().zip(&extents) {
        *s = 2 * m + 1;
    }
    let total: i64 = shape.iter().product();

    // Candidate filtering in parallel; selection below is sequential in scan order.
    let candidates: Vec<[f64; MAX_PACKING_DIM]> = (0..total)
        .into_par_iter()
        .filter_map(|flat| {
            let mut rest = flat;
            let mut point = [0.0; MAX_PACKING_DIM];
            for axis in (0..dim).rev() {
                let i = rest % shape[axis];
                rest /= shape[axis];
                point[axis] = (i - extents[axis]) as f64 * grid_step;
            }
            let q: f64 = (0..dim)
                .filter(|&i| semi_axes[i] > 0.0)
                .map(|i| (point[i] / semi_axes[i]).powi(2))
                .sum();
            (q <= 1.0 + 1e-12).then_some(point)
        })
        .collect();

    let cell_of = |p: &[f64; MAX_PACKING_DIM]| -> [i64; MAX_PACKING_DIM] {
        let mut c = [0i64; MAX_PACKING_DIM];
        for i in 0..dim {
            c[i] = (p[i] / eps).floor() as i64;
        }
        c
    };
    let eps_sq = eps * eps;
    let mut cells: HashMap<[i64; MAX_PACKING_DIM], Vec<[f64; MAX_PACKING_DIM]>> = HashMap::new();
    let mut chosen = 0usize;
    for p in candidates {
        let c = cell_of(&p);
        let mut separated = true;
        'scan: for dx in -1..=1 {
            for dy in if dim > 1 { -1..=1 } else { 0..=0 } {
                for dz in if dim > 2 { -1..=1 } else { 0..=0 } {
                    let key = [c[0] + dx, c[1] + dy, c[2] + dz];
                    if let Some(points) = cells.get(&key) {
                        for q in points {
                            let d2: f64 = (0..dim).map(|i| (p[i] - q[i]).powi(2)).sum();
                            if d2 <= eps_sq {
                                separated = false;
                                break 'scan;
                            }
                        }
                    }
                }
            }
        }
        if separated {
            cells.entry(c).or_default().push(p);
            chosen += 1;
        }
    }
    Ok(chosen)
}
