//! Embedding vectors and the deterministic mock encoder backend.
//!
//! Every backend emits L2-normalized 32-bit float vectors; the one
//! exception is the all-zero vector (produced by the mock backend for an
//! all-black image), which is kept as-is and defined to have cosine 0
//! against everything. Similarity math accumulates in f64.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Smallest dimension the mock encoder accepts.
pub const MOCK_MIN_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("embedding dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// A fixed-length real vector emitted by an encoder backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
    /// True when the vector was L2-normalized at the backend boundary.
    pub normalized: bool,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self {
            values,
            normalized: false,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            normalized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|&v| (v as f64) * (v as f64)).sum();
        libm::sqrt(sum)
    }

    /// L2-normalize in f64, storing back to f32. The zero vector is
    /// returned unchanged with `normalized` still false.
    pub fn into_normalized(mut self) -> Self {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return self;
        }
        for v in &mut self.values {
            *v = ((*v as f64) / norm) as f32;
        }
        self.normalized = true;
        self
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// Cosine similarity against another vector, accumulated in f64.
    pub fn cosine(&self, other: &EmbeddingVector) -> Result<f64, DimensionMismatch> {
        cosine_f64(&self.to_f64(), &other.to_f64())
    }
}

/// Cosine similarity `dot(a,b) / (|a| |b|)`, clamped to [-1, 1].
///
/// Returns exactly 0 when either vector is zero, so composition with
/// blacked-out subimages reduces cleanly to the baseline score.
pub fn cosine_f64(a: &[f64], b: &[f64]) -> Result<f64, DimensionMismatch> {
    if a.len() != b.len() {
        return Err(DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let cos = dot / (libm::sqrt(na) * libm::sqrt(nb));
    Ok(cos.clamp(-1.0, 1.0))
}

/// Deterministic pseudo-random unit vector seeded by sha256 of the input.
///
/// Expansion rule: `seed = sha256(input)`; block `i` is
/// `sha256(seed || u32_le(i))`, read as eight little-endian u32 words; each
/// word maps to `(w / 2^32) * 2 - 1`. The first `dim` values are
/// L2-normalized in f64 and stored as f32.
///
/// Special case: empty or all-zero input (an all-black image) maps to the
/// zero vector with `normalized = false`.
///
/// Panics if `dim < MOCK_MIN_DIM`.
pub fn mock_encode(input: &[u8], dim: usize) -> EmbeddingVector {
    assert!(
        dim >= MOCK_MIN_DIM,
        "mock encoder dimension must be >= {MOCK_MIN_DIM}, got {dim}"
    );
    if input.iter().all(|&b| b == 0) {
        return EmbeddingVector::zero(dim);
    }
    let seed = Sha256::digest(input);
    let mut raw = Vec::with_capacity(dim);
    let mut counter: u32 = 0;
    while raw.len() < dim {
        let mut hasher = Sha256::new();
        hasher.update(seed);
        hasher.update(counter.to_le_bytes());
        let block = hasher.finalize();
        for chunk in block.chunks_exact(4) {
            if raw.len() == dim {
                break;
            }
            let word = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            raw.push((word as f64 / 4294967296.0) * 2.0 - 1.0);
        }
        counter += 1;
    }
    let norm = libm::sqrt(raw.iter().map(|v| v * v).sum::<f64>());
    let values = raw.iter().map(|&v| (v / norm) as f32).collect();
    EmbeddingVector {
        values,
        normalized: true,
    }
}
