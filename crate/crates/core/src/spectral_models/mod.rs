//! Eigen-systems of the supported operators and the diagonal forward map.

mod coefficients;
mod model;
mod nystrom;

pub use coefficients::{forward_apply, CoefficientVector, Layout};
pub use model::{IndexScheme, ModelKind, SpectrumModel, DEFAULT_K_MAX};
pub use nystrom::{nystrom_decompose, EigenSystem, QuadratureRule, MIN_NODES};

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Complex;

use crate::error::{Error, Result};

/// Kernel of the `green` model: `(1-x)y` for `y ≤ x`, `x(1-y)` otherwise.
pub fn green_kernel(x: f64, y: f64) -> f64 {
    if y <= x {
        (1.0 - x) * y
    } else {
        x * (1.0 - y)
    }
}

/// Value of eigenfunction `ψ_k` at `x`.
///
/// Fourier models use `e^{-ikθ}` on `θ ∈ [-π, π]`; `green` uses
/// `√2 sin(kπx)` on `[0, 1]`, unit norm in `L²[0, 1]`.
pub fn eigenfunction_value(model: &SpectrumModel, k: i64, x: f64) -> Result<Complex<f64>> {
    match model.kind() {
        ModelKind::Poisson { .. } | ModelKind::Heat { .. } => {
            if !(-PI..=PI).contains(&x) {
                return Err(Error::Domain(format!("θ = {x} outside [-π, π]")));
            }
            let phase = -(k as f64) * x;
            Ok(Complex::new(phase.cos(), phase.sin()))
        }
        ModelKind::Green => {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
            }
            if k < 1 {
                return Err(Error::Domain(format!("one-sided index must be ≥ 1, got {k}")));
            }
            Ok(Complex::new(SQRT_2 * (k as f64 * PI * x).sin(), 0.0))
        }
        ModelKind::Tabulated { .. } => Err(Error::Unsupported(
            "tabulated spectra carry no eigenfunctions".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fourier_center() {
        let p = SpectrumModel::poisson(0.5, 1.0).unwrap();
        let v = eigenfunction_value(&p, 1, 0.0).unwrap();
        assert_eq!(v, Complex::new(1.0, 0.0));
        let v = eigenfunction_value(&p, 1, PI / 2.0).unwrap();
        assert_abs_diff_eq!(v.im, -1.0, epsilon = 1e-15);
        assert!(eigenfunction_value(&p, 1, 4.0).is_err());
    }

    #[test]
    fn green_sines() {
        let g = SpectrumModel::green();
        assert_abs_diff_eq!(eigenfunction_value(&g, 1, 0.5).unwrap().re, SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(eigenfunction_value(&g, 2, 0.5).unwrap().re, 0.0, epsilon = 1e-15);
        assert!(eigenfunction_value(&g, 1, 1.5).is_err());
        assert!(eigenfunction_value(&g, 0, 0.5).is_err());
    }

    #[test]
    fn tabulated_has_no_eigenfunctions() {
        let t = SpectrumModel::tabulated(vec![0.5]).unwrap();
        assert!(matches!(eigenfunction_value(&t, 1, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn green_kernel_is_symmetric() {
        for (x, y) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            assert_eq!(green_kernel(x, y), green_kernel(y, x));
        }
    }
}
