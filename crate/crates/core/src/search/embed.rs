//! Embedding providers.

use serde::{Deserialize, Serialize};

use crate::provider::{CallCounter, HttpEndpoint, JsonClient, ProviderError};
use crate::text::tokenize;

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dim],
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Cosine similarity; 0 when either side is the zero vector or the
    /// dimensions differ.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        if self.values.len() != other.values.len() {
            return 0.0;
        }
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// Stable name recorded next to persisted vectors; vectors from a
    /// different identity are recomputed rather than mixed.
    fn identity(&self) -> String;

    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

/// Deterministic feature-hashing embedder.
///
/// Each token (see [`tokenize`]) is hashed with 64-bit FNV-1a; the hash
/// modulo `dim` picks the bucket and bit 32 of the hash picks the sign
/// (set means -1). The summed vector is L2-normalized; text without tokens
/// embeds to the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: DEFAULT_DIM }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim }
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 32) & 1 == 1 { -1.0 } else { 1.0 };
            values[bucket] += sign;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        EmbeddingVector { values }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn identity(&self) -> String {
        format!("fnv1a-hash/{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        Ok(self.embed_text(text))
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
    dim: usize,
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// Embedder reached over HTTP: posts `{text, dim}`, expects `{vector}`.
pub struct RemoteEmbedder {
    name: String,
    dim: usize,
    client: JsonClient,
}

impl RemoteEmbedder {
    pub fn new(name: impl Into<String>, dim: usize, endpoint: HttpEndpoint, counter: CallCounter) -> Self {
        RemoteEmbedder {
            name: name.into(),
            dim,
            client: JsonClient::new(endpoint, counter),
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn identity(&self) -> String {
        format!("remote:{}/{}", self.name, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let response: EmbedResponse = self.client.post(&EmbedRequest { text, dim: self.dim })?;
        if response.vector.len() != self.dim || response.vector.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::InvalidResponse(format!(
                "expected {} finite components, got {}",
                self.dim,
                response.vector.len()
            )));
        }
        Ok(EmbeddingVector {
            values: response.vector,
        })
    }
}

/// Tries `primary`, answering with the hash embedder of the same dimension
/// when it fails.
pub struct EmbedWithFallback<E> {
    primary: E,
    fallback: HashEmbedder,
}

impl<E: EmbeddingProvider> EmbedWithFallback<E> {
    pub fn new(primary: E) -> Self {
        let fallback = HashEmbedder::new(primary.dim());
        EmbedWithFallback { primary, fallback }
    }
}

impl<E: EmbeddingProvider> EmbeddingProvider for EmbedWithFallback<E> {
    fn identity(&self) -> String {
        format!("{}+{}", self.primary.identity(), self.fallback.identity())
    }

    fn dim(&self) -> usize {
        self.fallback.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        self.primary.embed(text).or_else(|e| {
            tracing::warn!(error = %e, "embedder unavailable, using hash fallback");
            self.fallback.embed(text)
        })
    }
}
