//! Encoder backend contract and its implementations.
//!
//! Backends turn images and texts into L2-normalized f32 vectors. The
//! mock backend is fully deterministic and model-free (the test oracle
//! path); the remote backend speaks the `/encode` wire contract of an
//! out-of-process CLIP-style service. A backend's `id` keys the embedding
//! cache, so the same id must mean the same embedding function forever.

use std::collections::HashMap;

use comclip_core::embed::{mock_encode, EmbeddingVector};
use comclip_core::image::ImageBuf;

use crate::cache::text_content_hash;
use crate::client::{ClientError, EncoderClient};

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("input decode error: {0}")]
    Decode(String),
    #[error("text is empty")]
    EmptyText,
    #[error("backend emitted dim {got}, declared {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait EncoderBackend: Send + Sync {
    /// Stable identity used for cache keys.
    fn id(&self) -> &str;
    /// Embedding dimensionality.
    fn dim(&self) -> usize;
    /// Human-readable preprocessing descriptor.
    fn preprocessing(&self) -> &str;
    /// Backends that cannot take concurrent encode calls return true and
    /// the evaluation harness serializes instance scoring for them.
    fn single_threaded(&self) -> bool {
        false
    }
    fn encode_image(&self, image: &ImageBuf) -> Result<EmbeddingVector, EncoderError>;
    fn encode_text(&self, text: &str) -> Result<EmbeddingVector, EncoderError>;
}

/// Deterministic hash-based backend; an all-black image maps to the zero
/// vector so blacked-out subimages vanish from the composition.
pub struct MockBackend {
    id: String,
    dim: usize,
}

impl MockBackend {
    pub fn new(dim: usize) -> Self {
        Self {
            id: format!("mock-{dim}"),
            dim,
        }
    }
}

impl EncoderBackend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn preprocessing(&self) -> &str {
        "identity-rgb8"
    }

    fn encode_image(&self, image: &ImageBuf) -> Result<EmbeddingVector, EncoderError> {
        Ok(mock_encode(image.pixels(), self.dim))
    }

    fn encode_text(&self, text: &str) -> Result<EmbeddingVector, EncoderError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(EncoderError::EmptyText);
        }
        Ok(mock_encode(trimmed.as_bytes(), self.dim))
    }
}

/// Backend serving preset vectors, for tests that pin embeddings exactly.
#[derive(Default)]
pub struct FixedBackend {
    pub id: String,
    pub dim: usize,
    images: HashMap<[u8; 32], EmbeddingVector>,
    texts: HashMap<String, EmbeddingVector>,
}

impl FixedBackend {
    pub fn new(id: &str, dim: usize) -> Self {
        Self {
            id: id.to_string(),
            dim,
            ..Default::default()
        }
    }

    pub fn set_image(&mut self, image: &ImageBuf, emb: EmbeddingVector) {
        self.images.insert(image.content_hash(), emb);
    }

    pub fn set_text(&mut self, text: &str, emb: EmbeddingVector) {
        self.texts.insert(text.trim().to_string(), emb);
    }
}

impl EncoderBackend for FixedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn preprocessing(&self) -> &str {
        "fixed-vectors"
    }

    fn encode_image(&self, image: &ImageBuf) -> Result<EmbeddingVector, EncoderError> {
        self.images
            .get(&image.content_hash())
            .cloned()
            .ok_or_else(|| EncoderError::Unavailable("no fixed vector for image".into()))
    }

    fn encode_text(&self, text: &str) -> Result<EmbeddingVector, EncoderError> {
        self.texts
            .get(text.trim())
            .cloned()
            .ok_or_else(|| EncoderError::Unavailable(format!("no fixed vector for '{text}'")))
    }
}

/// Out-of-process encoder behind the `/encode` wire contract. Emitted
/// vectors are L2-normalized at this boundary (zero vectors pass through).
pub struct RemoteBackend {
    id: String,
    dim: usize,
    preprocessing: String,
    client: EncoderClient,
}

impl RemoteBackend {
    pub fn new(id: String, dim: usize, preprocessing: String, client: EncoderClient) -> Self {
        Self {
            id,
            dim,
            preprocessing,
            client,
        }
    }

    fn check_dim(&self, values: Vec<f32>) -> Result<EmbeddingVector, EncoderError> {
        if values.len() != self.dim {
            return Err(EncoderError::DimMismatch {
                expected: self.dim,
                got: values.len(),
            });
        }
        Ok(EmbeddingVector::new(values).into_normalized())
    }
}

impl EncoderBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn preprocessing(&self) -> &str {
        &self.preprocessing
    }

    fn encode_image(&self, image: &ImageBuf) -> Result<EmbeddingVector, EncoderError> {
        let key = hex::encode(image.content_hash());
        let values = self.client.encode_image(image, &key)?;
        self.check_dim(values)
    }

    fn encode_text(&self, text: &str) -> Result<EmbeddingVector, EncoderError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(EncoderError::EmptyText);
        }
        let key = hex::encode(text_content_hash(trimmed));
        let values = self.client.encode_text(trimmed, &key)?;
        self.check_dim(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_with(byte: u8) -> ImageBuf {
        ImageBuf::new(4, 4, vec![byte; 48]).unwrap()
    }

    #[test]
    fn mock_image_determinism() {
        let b = MockBackend::new(12);
        let img = image_with(3);
        assert_eq!(b.encode_image(&img).unwrap(), b.encode_image(&img).unwrap());
    }

    #[test]
    fn mock_black_image_is_zero_unnormalized() {
        let b = MockBackend::new(12);
        let v = b.encode_image(&image_with(0)).unwrap();
        assert!(v.is_zero());
        assert!(!v.normalized);
    }

    #[test]
    fn mock_text_trims_before_hashing() {
        let b = MockBackend::new(16);
        assert_eq!(
            b.encode_text("man").unwrap(),
            b.encode_text("man ").unwrap()
        );
        assert!(matches!(
            b.encode_text("   "),
            Err(EncoderError::EmptyText)
        ));
    }

    #[test]
    fn mock_text_unit_norm() {
        let b = MockBackend::new(32);
        let v = b.encode_text("a cat sits on a table").unwrap();
        assert!((v.l2_norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fixed_backend_serves_preset_vectors() {
        let mut b = FixedBackend::new("fixed-a", 2);
        let img = image_with(5);
        b.set_image(&img, EmbeddingVector::new(vec![1.0, 0.0]));
        b.set_text("hello", EmbeddingVector::new(vec![0.0, 1.0]));
        assert_eq!(b.encode_image(&img).unwrap().values, vec![1.0, 0.0]);
        assert_eq!(b.encode_text(" hello ").unwrap().values, vec![0.0, 1.0]);
        assert!(b.encode_text("other").is_err());
    }
}
