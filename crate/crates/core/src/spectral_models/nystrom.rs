//! Nyström discretization of symmetric kernels on `[0, 1]`.
//!
//! The kernel is sampled on quadrature nodes and symmetrized with the
//! `√w` similarity transform, `M_ij = √w_i K(x_i, x_j) √w_j`, so a dense
//! symmetric eigen-solver applies. Eigenvectors of `M` divided by `√w`
//! give node values of the eigenfunctions, orthonormal under the
//! quadrature inner product.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 8;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    Trapezoid,
    GaussLegendre,
}

impl QuadratureRule {
    /// Nodes and weights on `[0, 1]`, nodes ascending.
    pub fn nodes_weights(self, n: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            QuadratureRule::Trapezoid => {
                let h = 1.0 / (n - 1) as f64;
                let nodes = (0..n).map(|i| i as f64 * h).collect();
                let weights = (0..n)
                    .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                    .collect();
                (nodes, weights)
            }
            QuadratureRule::GaussLegendre => {
                let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("n ≥ 1"));
                let mut pairs: Vec<(f64, f64)> = rule
                    .as_node_weight_pairs()
                    .iter()
                    .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                    .collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                pairs.into_iter().unzip()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Column `j` holds eigenfunction `j` at the nodes.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Node values of the `j`-th eigenfunction (0-based).
    pub fn eigenfunction(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.column(j).iter().copied().collect()
    }

    /// `Σ w_i f_i g_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    /// Largest entry of `|Φᵀ W Φ - I|` over the first `count` eigenfunctions.
    pub fn orthonormality_defect(&self, count: usize) -> f64 {
        let count = count.min(self.len());
        let w = DVector::from_column_slice(&self.weights);
        let phi = self.eigenvectors.columns(0, count);
        let weighted = DMatrix::from_fn(phi.nrows(), count, |i, j| w[i] * phi[(i, j)]);
        let gram = phi.transpose() * weighted;
        let mut worst = 0.0f64;
        for i in 0..count {
            for j in 0..count {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Eigen-decomposition of `(Af)(x) = ∫₀¹ K(x, y) f(y) dy` on `n_nodes` quadrature nodes.
///
/// Eigenvalues within `1e-12 · max|λ|` of zero are reported as zero; a
/// clearly negative eigenvalue means the kernel is not positive
/// semidefinite and is rejected.
pub fn nystrom_decompose<K>(kernel: K, n_nodes: usize, rule: QuadratureRule) -> Result<EigenSystem>
where
    K: Fn(f64, f64) -> f64,
{
    if n_nodes < MIN_NODES {
        return Err(Error::Validation(format!(
            "need at least {MIN_NODES} nodes, got {n_nodes}"
        )));
    }
    let (nodes, weights) = rule.nodes_weights(n_nodes);
    let samples = DMatrix::from_fn(n_nodes, n_nodes, |i, j| kernel(nodes[i], nodes[j]));
    check_symmetry(&samples, &nodes)?;

    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut m = DMatrix::from_fn(n_nodes, n_nodes, |i, j| sqrt_w[i] * samples[(i, j)] * sqrt_w[j]);
    // Exact symmetry for the solver.
    for i in 0..n_nodes {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("kernel produced non-finite values".into()));
    }

    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let scale = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut eigenvalues = Vec::with_capacity(n_nodes);
    let mut eigenvectors = DMatrix::zeros(n_nodes, n_nodes);
    for (col, &j) in order.iter().enumerate() {
        let mut lambda = eig.eigenvalues[j];
        if !lambda.is_finite() {
            return Err(Error::Numeric("eigen-solver returned a non-finite value".into()));
        }
        if lambda < 0.0 {
            if lambda < -floor {
                return Err(Error::Validation(format!(
                    "kernel is not positive semidefinite (eigenvalue {lambda:e})"
                )));
            }
            lambda = 0.0;
        } else if lambda < floor {
            lambda = 0.0;
        }
        eigenvalues.push(lambda);

        let u = eig.eigenvectors.column(j);
        let mut phi: Vec<f64> = u.iter().zip(&sqrt_w).map(|(v, s)| v / s).collect();
        // Sign: first clearly nonzero node value positive.
        let peak = phi.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if let Some(first) = phi.iter().find(|v| v.abs() > 1e-8 * peak) {
            if *first < 0.0 {
                phi.iter_mut().for_each(|v| *v = -*v);
            }
        }
        eigenvectors.set_column(col, &DVector::from_vec(phi));
    }

    Ok(EigenSystem { nodes, weights, eigenvalues, eigenvectors })
}

fn check_symmetry(samples: &DMatrix<f64>, nodes: &[f64]) -> Result<()> {
    let n = samples.nrows();
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (samples[(i, j)], samples[(j, i)]);
            if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::Validation(format!(
                    "kernel is not symmetric: K({}, {}) = {a} but K({}, {}) = {b}",
                    nodes[i], nodes[j], nodes[j], nodes[i]
                )));
            }
        }
    }
    Ok(())
}
