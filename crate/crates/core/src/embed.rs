//! Text embeddings and cosine similarity.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::remote::{RemoteClient, RemoteError};

pub const LEXICAL_DIMENSION: usize = 256;
const REMOTE_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding service unavailable: {0}")]
    Unavailable(#[from] RemoteError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingKind {
    RemoteEmbedding,
    LexicalFallback,
}

#[derive(Debug, Clone)]
pub enum EmbeddingProvider {
    /// Hashed character trigrams, L2-normalized.
    Lexical { dimension: usize },
    Remote {
        client: RemoteClient,
        dimension: usize,
        cache: Arc<Mutex<HashMap<String, Vec<f64>>>>,
    },
}

impl Default for EmbeddingProvider {
    fn default() -> Self {
        Self::lexical()
    }
}

impl EmbeddingProvider {
    pub fn lexical() -> Self {
        EmbeddingProvider::Lexical { dimension: LEXICAL_DIMENSION }
    }

    pub fn remote(client: RemoteClient, dimension: usize) -> Self {
        EmbeddingProvider::Remote {
            client,
            dimension,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn kind(&self) -> EmbeddingKind {
        match self {
            EmbeddingProvider::Lexical { .. } => EmbeddingKind::LexicalFallback,
            EmbeddingProvider::Remote { .. } => EmbeddingKind::RemoteEmbedding,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            EmbeddingProvider::Lexical { dimension } | EmbeddingProvider::Remote { dimension, .. } => *dimension,
        }
    }

    pub fn embed_one(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(self.embed(&[text])?.remove(0))
    }

    pub fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        match self {
            EmbeddingProvider::Lexical { dimension } => {
                Ok(texts.iter().map(|t| lexical_embedding(t, *dimension)).collect())
            }
            EmbeddingProvider::Remote { client, dimension, cache } => {
                let missing: Vec<&str> = {
                    let cache = cache.lock().unwrap();
                    let mut seen = std::collections::HashSet::new();
                    texts
                        .iter()
                        .copied()
                        .filter(|t| !cache.contains_key(*t) && seen.insert(*t))
                        .collect()
                };
                for chunk in missing.chunks(REMOTE_BATCH) {
                    let vectors = client.embed(chunk)?;
                    for v in &vectors {
                        if v.len() != *dimension {
                            return Err(EmbedError::DimensionMismatch { left: *dimension, right: v.len() });
                        }
                    }
                    let mut cache = cache.lock().unwrap();
                    for (t, v) in chunk.iter().zip(vectors) {
                        cache.insert(t.to_string(), v);
                    }
                }
                let cache = cache.lock().unwrap();
                Ok(texts.iter().map(|t| cache[*t].clone()).collect())
            }
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Lowercases, maps punctuation to spaces, pads with one space each side
/// and counts hashed character trigrams.
pub fn lexical_embedding(text: &str, dimension: usize) -> Vec<f64> {
    let mut v = vec![0.0; dimension];
    let normalized: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let words: Vec<&str> = normalized.split_whitespace().collect();
    if words.is_empty() {
        return v;
    }
    let padded: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
    let mut buf = [0u8; 16];
    for window in padded.windows(3) {
        let mut len = 0;
        for c in window {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let bucket = (fnv1a(&buf[..len]) % dimension as u64) as usize;
        v[bucket] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Cosine of the angle between two vectors; 0 when either is the zero
/// vector.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
