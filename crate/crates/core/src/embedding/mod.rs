//! Sentence embeddings behind a provider contract.
//!
//! Two providers ship: [`HashingEmbedder`], a deterministic offline
//! feature-hashing embedder used for reproducible runs, and
//! [`ServiceEmbedder`], an HTTP client for an external sentence encoder.

mod offline;
mod service;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use offline::HashingEmbedder;
pub use service::{ServiceConfig, ServiceEmbedder};

/// Output width shared by both providers.
pub const DEFAULT_DIMENSION: usize = 384;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("embedding service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("no texts to embed")]
    EmptyInput,
}

impl EmbedError {
    pub fn kind(&self) -> &'static str {
        match self {
            EmbedError::ServiceUnavailable(_) => "service_unavailable",
            EmbedError::DimensionMismatch { .. } => "dimension_mismatch",
            EmbedError::EmptyInput => "empty_input",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm_sq: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        let norm_sq = dot(&values, &values);
        EmbeddingVector { values, norm_sq }
    }

    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector::new(vec![0.0; dimension])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.norm_sq == 0.0
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(values: Vec<f64>) -> Self {
        EmbeddingVector::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(vector: EmbeddingVector) -> Self {
        vector.values
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity in `[-1, 1]`; 0.0 when either vector is zero.
///
/// The denominator is `sqrt(|a|² |b|²)` so that a vector compared with itself
/// yields exactly 1.0.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dimension(),
            actual: b.dimension(),
        });
    }
    if a.is_zero() || b.is_zero() {
        return Ok(0.0);
    }
    let value = dot(&a.values, &b.values) / (a.norm_sq * b.norm_sq).sqrt();
    Ok(value.clamp(-1.0, 1.0))
}

/// A source of sentence embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    /// Identical texts map to identical vectors.
    fn deterministic(&self) -> bool;

    /// One vector per text, in input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts)
    }
}
