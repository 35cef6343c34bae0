//! Dense parameter vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{Error, Result};
use crate::math;

/// A dense vector of model parameters or parameter deltas.
///
/// Entries are always finite. Construction from untrusted data goes through
/// [`ModelVector::new`], which rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelVector(Vec<f64>);

impl ModelVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Internal constructor for arithmetic results on finite inputs.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sq())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        Error::check_dim(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_raw(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Error::check_dim(self.dim(), other.dim())?;
        Ok(Self::from_raw(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Error::check_dim(self.dim(), other.dim())?;
        Ok(Self::from_raw(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: f64, other: &Self) -> Result<()> {
        Error::check_dim(self.dim(), other.dim())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn distance_sq(&self, other: &Self) -> Result<f64> {
        Error::check_dim(self.dim(), other.dim())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl Index<usize> for ModelVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ModelVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl AsRef<[f64]> for ModelVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity in `[-1, 1]`.
///
/// A zero-norm argument yields `0.0`: zero updates show up legitimately once
/// a model has converged and should read as neutral rather than fail.
pub fn cosine_similarity(a: &ModelVector, b: &ModelVector) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(&a.0, &b.0) / denom).clamp(-1.0, 1.0))
}

/// Element-wise mean of a non-empty set of equally sized vectors.
pub fn mean(vectors: &[ModelVector]) -> Result<ModelVector> {
    let first = vectors.first().ok_or(Error::EmptyCohort)?;
    let mut acc = vec![0.0; first.dim()];
    for v in vectors {
        Error::check_dim(first.dim(), v.dim())?;
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
    }
    let inv = 1.0 / vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(ModelVector::from_raw(acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> ModelVector {
        ModelVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            ModelVector::new(alloc::vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        );
        assert!(ModelVector::new(alloc::vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn cosine_identity() {
        let a = v(&[1.0, 2.0, 3.0]);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_orthogonal() {
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn cosine_diagonal() {
        let c = cosine_similarity(&v(&[1.0, 1.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((c - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_norm_is_neutral() {
        assert_eq!(cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn cosine_dimension_mismatch() {
        assert_eq!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn mean_of_empty_is_error() {
        assert_eq!(mean(&[]), Err(Error::EmptyCohort));
    }
}
