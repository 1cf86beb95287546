//! Content-addressed embedding cache.
//!
//! Keys are `sha256(backend_id || "|" || modality || "|" || content_hash)`,
//! one record per file named `<hex key>.emb`. Record format: magic "CEMB",
//! version byte 0x01, u32 little-endian dim, then dim IEEE-754
//! little-endian f32 values. Writes go to a temp file and are renamed into
//! place; corrupt records are recomputed and overwritten with a warning.
//! A process-local memo layer sits in front of the disk.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use comclip_core::embed::EmbeddingVector;
use sha2::{Digest, Sha256};

pub const CACHE_MAGIC: [u8; 4] = *b"CEMB";
pub const CACHE_VERSION: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Image,
    Text,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
        }
    }
}

pub type CacheKey = [u8; 32];

/// Cache key for one (backend, modality, content) triple.
pub fn cache_key(backend_id: &str, modality: Modality, content_hash: &[u8; 32]) -> CacheKey {
    let mut h = Sha256::new();
    h.update(backend_id.as_bytes());
    h.update(b"|");
    h.update(modality.as_str().as_bytes());
    h.update(b"|");
    h.update(content_hash);
    h.finalize().into()
}

/// Canonical content hash for text inputs ("TXT1" ++ trimmed UTF-8).
pub fn text_content_hash(text: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"TXT1");
    h.update(text.trim().as_bytes());
    h.finalize().into()
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("record too short")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("dim {dim} does not match payload of {got} bytes")]
    LengthMismatch { dim: u32, got: usize },
}

pub fn encode_record(emb: &EmbeddingVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + emb.values.len() * 4);
    out.extend_from_slice(&CACHE_MAGIC);
    out.push(CACHE_VERSION);
    out.extend_from_slice(&(emb.values.len() as u32).to_le_bytes());
    for v in &emb.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_record(bytes: &[u8]) -> Result<EmbeddingVector, RecordError> {
    if bytes.len() < 9 {
        return Err(RecordError::Truncated);
    }
    if bytes[0..4] != CACHE_MAGIC {
        return Err(RecordError::BadMagic);
    }
    if bytes[4] != CACHE_VERSION {
        return Err(RecordError::BadVersion(bytes[4]));
    }
    let dim = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    let payload = &bytes[9..];
    if payload.len() != dim as usize * 4 {
        return Err(RecordError::LengthMismatch {
            dim,
            got: payload.len(),
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    // The flag is derived: unit norm within the backend tolerance.
    let mut emb = EmbeddingVector::new(values);
    emb.normalized = !emb.is_zero() && (emb.l2_norm() - 1.0).abs() <= 1e-6;
    Ok(emb)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
    pub hits: u64,
    pub misses: u64,
}

/// Disk-backed cache with a process-local memo. `disabled()` computes
/// everything fresh, which must produce bit-identical results.
pub struct EmbeddingCache {
    dir: Option<PathBuf>,
    memo: Option<Mutex<HashMap<CacheKey, EmbeddingVector>>>,
    hits: AtomicU64,
    misses: AtomicU64,
    tmp_counter: AtomicU64,
}

impl EmbeddingCache {
    pub fn new(dir: PathBuf) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            memo: Some(Mutex::new(HashMap::new())),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn disabled() -> Self {
        Self {
            dir: None,
            memo: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            tmp_counter: AtomicU64::new(0),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.dir.is_some()
    }

    fn record_path(dir: &Path, key: &CacheKey) -> PathBuf {
        dir.join(format!("{}.emb", hex::encode(key)))
    }

    pub fn get(&self, key: &CacheKey) -> Option<EmbeddingVector> {
        if let Some(memo) = &self.memo {
            if let Some(hit) = memo.lock().unwrap().get(key) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Some(hit.clone());
            }
        }
        let dir = self.dir.as_ref()?;
        let path = Self::record_path(dir, key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!("cache read failed for {}: {e}", path.display());
                return None;
            }
        };
        match decode_record(&bytes) {
            Ok(emb) => {
                if let Some(memo) = &self.memo {
                    memo.lock().unwrap().insert(*key, emb.clone());
                }
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(emb)
            }
            Err(e) => {
                log::warn!(
                    "corrupt cache record {} ({e}); recomputing",
                    path.display()
                );
                None
            }
        }
    }

    pub fn put(&self, key: &CacheKey, emb: &EmbeddingVector) -> std::io::Result<()> {
        if let Some(memo) = &self.memo {
            memo.lock().unwrap().insert(*key, emb.clone());
        }
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let final_path = Self::record_path(dir, key);
        let tmp_path = dir.join(format!(
            "{}.tmp-{}-{}",
            hex::encode(key),
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp_path, encode_record(emb))?;
        std::fs::rename(&tmp_path, &final_path)?;
        Ok(())
    }

    /// Cached vector if present (bit-identical to what was stored), else
    /// compute, persist atomically, and return.
    pub fn get_or_compute<E: From<std::io::Error>>(
        &self,
        key: &CacheKey,
        compute: impl FnOnce() -> Result<EmbeddingVector, E>,
    ) -> Result<EmbeddingVector, E> {
        if let Some(hit) = self.get(key) {
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let emb = compute()?;
        self.put(key, &emb)?;
        Ok(emb)
    }

    pub fn stats(&self) -> std::io::Result<CacheStats> {
        let mut stats = CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            ..Default::default()
        };
        if let Some(dir) = &self.dir {
            for entry in std::fs::read_dir(dir)? {
                let entry = entry?;
                if entry.path().extension().map(|e| e == "emb").unwrap_or(false) {
                    stats.entries += 1;
                    stats.bytes += entry.metadata()?.len();
                }
            }
        }
        Ok(stats)
    }

    /// Delete all records; returns how many were removed.
    pub fn clear(&self) -> std::io::Result<usize> {
        if let Some(memo) = &self.memo {
            memo.lock().unwrap().clear();
        }
        let mut removed = 0;
        if let Some(dir) = &self.dir {
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().map(|e| e == "emb").unwrap_or(false) {
                    std::fs::remove_file(&path)?;
                    removed += 1;
                }
            }
        }
        Ok(removed)
    }
}
