use serde::{Deserialize, Serialize};

use super::model::{ModelKind, SpectrumModel};
use crate::error::{Error, Result};

/// How entries map to eigen-indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `entries[i]` is the coefficient of index `i + 1`. Against a
    /// two-sided model this is the `k ≥ 1` half of the expansion.
    OneSided,
    /// `entries[i]` is the coefficient of index `i - half`, `half = (len - 1) / 2`.
    TwoSided,
}

/// Expansion coefficients against the eigenbasis of one model.
///
/// The basis is orthonormal, so the `ℓ²` norm of the entries is the `L²`
/// norm of the represented function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    basis: ModelKind,
    layout: Layout,
    entries: Vec<f64>,
}

impl CoefficientVector {
    pub fn one_sided(model: &SpectrumModel, entries: Vec<f64>) -> Self {
        Self { basis: model.kind().clone(), layout: Layout::OneSided, entries }
    }

    /// `entries` must have odd length `2K + 1` and the model must be two-sided.
    pub fn two_sided(model: &SpectrumModel, entries: Vec<f64>) -> Result<Self> {
        if !model.is_two_sided() {
            return Err(Error::Usage(format!(
                "{} model has a one-sided index scheme",
                model.name()
            )));
        }
        if entries.len().is_multiple_of(2) {
            return Err(Error::Usage(format!(
                "two-sided coefficients need odd length, got {}",
                entries.len()
            )));
        }
        Ok(Self { basis: model.kind().clone(), layout: Layout::TwoSided, entries })
    }

    /// Zero vector with the model's natural layout and `K_max` retained indices.
    pub fn zeros(model: &SpectrumModel) -> Self {
        if model.is_two_sided() {
            let n = 2 * model.k_max() + 1;
            Self { basis: model.kind().clone(), layout: Layout::TwoSided, entries: vec![0.0; n] }
        } else {
            Self::one_sided(model, vec![0.0; model.k_max()])
        }
    }

    /// Builds a vector in the model's natural layout from a rule `k ↦ c_k`.
    pub fn from_fn(model: &SpectrumModel, mut f: impl FnMut(i64) -> f64) -> Self {
        let mut v = Self::zeros(model);
        let idx: Vec<i64> = v.indices().collect();
        for (e, k) in v.entries.iter_mut().zip(idx) {
            *e = f(k);
        }
        v
    }

    /// Same layout and basis, different entries.
    pub fn with_entries(&self, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != self.entries.len() {
            return Err(Error::Usage(format!(
                "length mismatch: {} vs {}",
                entries.len(),
                self.entries.len()
            )));
        }
        Ok(Self { basis: self.basis.clone(), layout: self.layout, entries })
    }

    pub fn basis(&self) -> &ModelKind {
        &self.basis
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn offset(&self) -> i64 {
        match self.layout {
            Layout::OneSided => -1,
            Layout::TwoSided => ((self.entries.len() - 1) / 2) as i64,
        }
    }

    /// Eigen-index of each entry, in storage order.
    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        let off = self.offset();
        (0..self.entries.len() as i64).map(move |i| i - off)
    }

    /// `(k, c_k)` pairs in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.indices().zip(self.entries.iter().copied())
    }

    /// Coefficient of index `k`, zero when not stored.
    pub fn get(&self, k: i64) -> f64 {
        let i = k + self.offset();
        if i < 0 {
            return 0.0;
        }
        self.entries.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { basis: self.basis.clone(), layout: self.layout, entries })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self { basis: self.basis.clone(), layout: self.layout, entries })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            layout: self.layout,
            entries: self.entries.iter().map(|c| c * s).collect(),
        }
    }

    /// Errors unless this vector is expanded against `model`'s eigenbasis.
    pub fn check_basis(&self, model: &SpectrumModel) -> Result<()> {
        if &self.basis != model.kind() {
            return Err(Error::Usage(format!(
                "coefficients expanded against {:?}, not {:?}",
                self.basis,
                model.kind()
            )));
        }
        if self.layout == Layout::TwoSided && !model.is_two_sided() {
            return Err(Error::Usage("two-sided layout against a one-sided model".into()));
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis || self.layout != other.layout || self.len() != other.len() {
            return Err(Error::Usage(
                "coefficient vectors differ in basis, layout or length".into(),
            ));
        }
        Ok(())
    }
}

/// `λ_k f_k` entrywise.
pub fn forward_apply(model: &SpectrumModel, f: &CoefficientVector) -> Result<CoefficientVector> {
    f.check_basis(model)?;
    let entries = f
        .modes()
        .map(|(k, c)| model.lambda(k.unsigned_abs() as usize) * c)
        .collect();
    f.with_entries(entries)
}
