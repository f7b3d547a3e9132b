//! Text embeddings and the cosine kernel used for note deduplication.

mod mock;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{MockEmbedder, MOCK_DIMENSION};
pub use remote::HttpEmbedder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector has zero or non-finite norm")]
    Degenerate,
    #[error("empty pool")]
    EmptyPool,
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Transport { .. })
    }
}

/// A unit-normalized embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalize raw provider output. Any positive rescaling of `raw` yields
    /// the same vector up to rounding.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self, EmbedError> {
        if raw.is_empty() {
            return Err(EmbedError::Degenerate);
        }
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(EmbedError::Degenerate);
        }
        Ok(Self {
            values: raw.into_iter().map(|x| x / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        (**self).embed(text)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        (**self).embed(text)
    }
}

/// Dot product of two unit vectors, clamped to [-1, 1]. Exactly symmetric.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbedError> {
    if u.dimension() != v.dimension() {
        return Err(EmbedError::DimensionMismatch {
            left: u.dimension(),
            right: v.dimension(),
        });
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Maximum cosine between `candidate` and any pool vector (linear scan).
pub fn max_similarity<'a>(
    candidate: &EmbeddingVector,
    pool: impl IntoIterator<Item = &'a EmbeddingVector>,
) -> Result<f64, EmbedError> {
    let mut best: Option<f64> = None;
    for p in pool {
        let s = cosine_similarity(candidate, p)?;
        best = Some(best.map_or(s, |b: f64| b.max(s)));
    }
    best.ok_or(EmbedError::EmptyPool)
}
