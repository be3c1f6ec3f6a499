use serde::{Deserialize, Serialize};

use super::{Result, VectorStoreError};

/// Allowed deviation of a normalized vector's Euclidean norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// A dense sentence embedding.
///
/// Components are stored as `f32` (the on-disk width); every reduction over
/// them is carried out in `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector {
    values: Vec<f32>,
    normalized: bool,
}

impl EmbeddingVector {
    /// Builds a vector, rejecting empty input and non-finite components.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(VectorStoreError::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorStoreError::NonFinite { index });
        }
        let mut v = EmbeddingVector {
            values,
            normalized: false,
        };
        v.normalized = (v.norm() - 1.0).abs() <= NORM_TOLERANCE;
        Ok(v)
    }

    /// Converts from `f64` components, rounding each to `f32`.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorStoreError::NonFinite { index });
        }
        let narrowed: Vec<f32> = values.iter().map(|&v| v as f32).collect();
        if let Some(index) = narrowed.iter().position(|v| !v.is_finite()) {
            return Err(VectorStoreError::NonFinite { index });
        }
        Self::new(narrowed)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// True when the Euclidean norm is within [`NORM_TOLERANCE`] of 1.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Unit-norm copy of this vector.
    pub fn normalize(&self) -> Result<Self> {
        normalize(self)
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = VectorStoreError;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        EmbeddingVector::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.values
    }
}

/// Dot product with sequential `f64` accumulation.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (&x, &y)| acc + f64::from(x) * f64::from(y))
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    let norm = v.norm();
    if norm == 0.0 {
        return Err(VectorStoreError::ZeroVector);
    }
    let values: Vec<f32> = v
        .values
        .iter()
        .map(|&x| (f64::from(x) / norm) as f32)
        .collect();
    let mut out = EmbeddingVector {
        values,
        normalized: false,
    };
    out.normalized = (out.norm() - 1.0).abs() <= NORM_TOLERANCE;
    debug_assert!(out.normalized, "normalization drifted: {}", out.norm());
    Ok(out)
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(VectorStoreError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(VectorStoreError::ZeroVector);
    }
    let cos = dot(&a.values, &b.values) / (na * nb);
    Ok(cos.clamp(-1.0, 1.0))
}
