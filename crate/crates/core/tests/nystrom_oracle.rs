//! The closed-form eigen-system of the Green's-function kernel checked
//! against quadrature computed independently of the library's spectrum.

use std::f64::consts::{PI, SQRT_2};
use std::num::NonZeroUsize;

use fredinfo::spectral_models::{
    eigenfunction_value, forward_apply, green_kernel, nystrom_decompose, CoefficientVector, QuadratureRule,
    SpectrumModel,
};
use gauss_quad::GaussLegendre;

#[test]
fn nystrom_eigenfunctions_match_sine_basis() {
    let sys = nystrom_decompose(green_kernel, 1000, QuadratureRule::Trapezoid).unwrap();
    assert!(sys.orthonormality_defect(8) < 1e-10);
    for j in 0..6 {
        let k = (j + 1) as f64;
        let phi = sys.eigenfunction(j);
        let exact: Vec<f64> = sys.nodes.iter().map(|x| SQRT_2 * (k * PI * x).sin()).collect();
        // Sign fixed by the solver: first clearly nonzero node value positive.
        let overlap = sys.inner(&phi, &exact);
        assert!(overlap > 0.0, "mode {k} has the wrong sign");
        let worst = phi.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "mode {k}: max deviation {worst}");
    }
}

#[test]
fn gauss_legendre_nodes_give_same_leading_spectrum() {
    let sys = nystrom_decompose(green_kernel, 400, QuadratureRule::GaussLegendre).unwrap();
    for k in 1..=5 {
        let exact = 1.0 / ((k * k) as f64 * PI * PI);
        let rel = (sys.eigenvalues[k - 1] - exact).abs() / exact;
        assert!(rel < 1e-3, "k={k}: rel err {rel}");
    }
}

/// `(Af)(x) = ∫₀¹ K(x, y) f(y) dy`, split at the kink `y = x` so that
/// Gauss–Legendre sees only smooth integrands.
fn apply_kernel(quad: &GaussLegendre, x: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    quad.integrate(0.0, x, |y| green_kernel(x, y) * f(y)) + quad.integrate(x, 1.0, |y| green_kernel(x, y) * f(y))
}

#[test]
fn forward_map_matches_kernel_quadrature() {
    let model = SpectrumModel::green().with_k_max(12).unwrap();
    let coeffs = CoefficientVector::from_fn(&model, |k| (-1.0f64).powi(k as i32) / (k * k) as f64);
    let series = |c: &CoefficientVector, x: f64| -> f64 {
        c.modes().map(|(k, v)| v * eigenfunction_value(&model, k, x).unwrap().re).sum()
    };
    let image = forward_apply(&model, &coeffs).unwrap();
    let quad = GaussLegendre::new(NonZeroUsize::new(2048).unwrap());
    let f = |y: f64| series(&coeffs, y);
    for i in 1..20 {
        let x = i as f64 / 20.0;
        let direct = apply_kernel(&quad, x, &f);
        let diag = series(&image, x);
        assert!((direct - diag).abs() < 1e-6, "x={x}: {direct} vs {diag}");
    }
}

#[test]
fn parseval_for_sine_expansion() {
    // f(x) = x(1 - x): coefficients by quadrature, norm² = 1/30.
    let quad = GaussLegendre::new(NonZeroUsize::new(256).unwrap());
    let model = SpectrumModel::green().with_k_max(200).unwrap();
    let coeffs = CoefficientVector::from_fn(&model, |k| {
        quad.integrate(0.0, 1.0, |x| x * (1.0 - x) * SQRT_2 * (k as f64 * PI * x).sin())
    });
    assert!((coeffs.norm_sq() - 1.0 / 30.0).abs() < 1e-9);
}

#[test]
fn green_kernel_is_its_own_eigen_expansion() {
    // K(x, y) = Σ λ_k ψ_k(x) ψ_k(y) pointwise.
    for &(x, y) in &[(0.3, 0.7), (0.5, 0.5), (0.9, 0.1)] {
        let series: f64 = (1..=20_000)
            .map(|k| {
                let kf = k as f64;
                SQRT_2 * (kf * PI * x).sin() * SQRT_2 * (kf * PI * y).sin() / (kf * kf * PI * PI)
            })
            .sum();
        assert!((series - green_kernel(x, y)).abs() < 1e-5);
    }
}
