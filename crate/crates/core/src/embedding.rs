//! Embedding vectors, similarity kernels, and a text-to-vector cache with a
//! pluggable provider for misses.
//!
//! Every vector entering the cache is unit-normalized, which makes cosine
//! similarity and Euclidean distance monotonically related
//! (`d² = 2 − 2·cos` on unit vectors), so clustering thresholds and the
//! digression thresholds live on compatible scales. Lookups are exact-string
//! matches; the cache records which provider produced it and refuses to mix
//! vectors from a differently-tagged provider.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

/// Errors from vector construction, similarity kernels, and cache access.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    /// Tried to embed an empty string.
    #[error("cannot embed empty text")]
    EmptyText,
    /// A vector had no components.
    #[error("embedding vector is empty")]
    EmptyVector,
    /// A vector contained a NaN or infinite component.
    #[error("embedding vector contains a non-finite component")]
    NotFinite,
    /// A vector had (near-)zero norm and cannot be normalized.
    #[error("embedding vector has zero norm")]
    ZeroNorm,
    /// Two vectors (or a vector and a cache) disagreed on dimension.
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Dimension required by the context.
        expected: usize,
        /// Dimension actually supplied.
        got: usize,
    },
    /// Text was not cached and no provider was configured.
    #[error("no cached embedding for {text:?} and no provider configured")]
    CacheMiss {
        /// The text that missed.
        text: String,
    },
    /// The provider's tag did not match the cache's tag.
    #[error("provider tag {provider_tag:?} does not match cache tag {cache_tag:?}")]
    ProviderMismatch {
        /// Tag recorded in the cache.
        cache_tag: String,
        /// Tag reported by the provider.
        provider_tag: String,
    },
    /// The provider returned the wrong number of vectors for a batch.
    #[error("provider returned {got} vectors for {expected} texts")]
    ProviderShape {
        /// Number of texts requested.
        expected: usize,
        /// Number of vectors returned.
        got: usize,
    },
    /// The provider itself failed.
    #[error("embedding provider: {0}")]
    Provider(#[from] ProviderError),
}

/// Transport or service failure reported by an [`EmbeddingProvider`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{message}")]
pub struct ProviderError {
    /// Human-readable failure description.
    pub message: String,
}

impl ProviderError {
    /// Builds a provider error from any displayable message.
    pub fn new(message: impl core::fmt::Display) -> Self {
        ProviderError {
            message: message.to_string(),
        }
    }
}

/// A source of raw embedding vectors for uncached texts.
///
/// Implementations receive a batch of texts and must return one vector per
/// text, in order. Returned vectors need not be normalized; the cache layer
/// normalizes at ingestion.
pub trait EmbeddingProvider {
    /// Embeds a batch of texts, one vector per text, in order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError>;

    /// Identifies the model/source, e.g. `"minilm-l6"`. Caches refuse to mix
    /// vectors from providers with different tags.
    fn provider_tag(&self) -> &str;
}

/// A fixed-dimension real vector; components are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Builds a vector from raw components, rejecting empty or non-finite
    /// input. Does not normalize.
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::EmptyVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NotFinite);
        }
        Ok(EmbeddingVector { values })
    }

    /// Builds a unit-normalized vector from raw components.
    pub fn unit_normalized(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        let v = EmbeddingVector::new(values)?;
        let norm = v.norm();
        if norm <= f64::EPSILON {
            return Err(EmbeddingError::ZeroNorm);
        }
        EmbeddingVector::new(v.values.iter().map(|x| x / norm).collect())
    }

    /// Number of components.
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The components.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// L2 norm.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }
}

/// Cosine similarity, clamped into `[-1, 1]`.
///
/// Computed as the dot product over the product of norms, so it is exact for
/// unit vectors and still correct for raw ones. Symmetric in its arguments.
pub fn cosine_similarity(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x * y)
        .sum();
    let denom = a.norm() * b.norm();
    if denom <= f64::EPSILON {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

/// Euclidean (L2) distance between two vectors of equal dimension.
///
/// For unit vectors this equals `sqrt(2 − 2·cosine_similarity(a, b))`.
pub fn euclidean_distance(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let sum: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    Ok(libm::sqrt(sum))
}

/// Exact-text cache of unit-normalized embedding vectors.
///
/// All entries share one dimension and one provider tag. The pipeline
/// accesses the cache single-threaded between stages, so a text is fetched
/// from the provider at most once: `embed` checks the cache before calling
/// out and inserts before returning.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    entries: BTreeMap<String, EmbeddingVector>,
    dim: usize,
    provider_tag: String,
}

impl EmbeddingCache {
    /// Creates an empty cache for vectors of dimension `dim` produced by the
    /// provider identified by `provider_tag`.
    pub fn new(dim: usize, provider_tag: &str) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::EmptyVector);
        }
        Ok(EmbeddingCache {
            entries: BTreeMap::new(),
            dim,
            provider_tag: provider_tag.to_string(),
        })
    }

    /// Rebuilds a cache from stored entries, validating dimensions.
    pub fn from_entries(
        dim: usize,
        provider_tag: &str,
        entries: Vec<(String, EmbeddingVector)>,
    ) -> Result<Self, EmbeddingError> {
        let mut cache = EmbeddingCache::new(dim, provider_tag)?;
        for (text, vector) in entries {
            cache.insert(&text, vector)?;
        }
        Ok(cache)
    }

    /// The shared dimension of all vectors in this cache.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The tag of the provider whose vectors this cache holds.
    pub fn provider_tag(&self) -> &str {
        &self.provider_tag
    }

    /// Number of cached texts.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Whether the cache is empty.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact-string lookup.
    pub fn get(&self, text: &str) -> Option<&EmbeddingVector> {
        self.entries.get(text)
    }

    /// Inserts a vector under `text`, enforcing the shared dimension.
    pub fn insert(&mut self, text: &str, vector: EmbeddingVector) -> Result<(), EmbeddingError> {
        if text.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        if vector.dim() != self.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dim,
                got: vector.dim(),
            });
        }
        self.entries.insert(text.to_string(), vector);
        Ok(())
    }

    /// Iterates entries in lexicographic text order (deterministic).
    pub fn entries(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Returns the unit-normalized embedding of `text`, fetching on a miss.
///
/// Cache hits return the stored vector. On a miss the provider (if any) is
/// called, the result is unit-normalized and inserted into the cache, and
/// then returned — so repeated calls never fetch the same text twice. With
/// no provider, a miss is an error naming the text.
pub fn embed(
    text: &str,
    cache: &mut EmbeddingCache,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<EmbeddingVector, EmbeddingError> {
    if text.is_empty() {
        return Err(EmbeddingError::EmptyText);
    }
    if let Some(v) = cache.get(text) {
        return Ok(v.clone());
    }
    let provider = provider.ok_or_else(|| EmbeddingError::CacheMiss {
        text: text.to_string(),
    })?;
    prefetch(&[text.to_string()], cache, provider)?;
    // Just inserted by prefetch.
    Ok(cache
        .get(text)
        .cloned()
        .expect("prefetch inserts every requested text"))
}

/// Fetches all uncached `texts` in one provider batch and caches them.
///
/// Duplicate and already-cached texts are skipped; the provider sees each
/// missing text exactly once, in first-occurrence order.
pub fn prefetch(
    texts: &[String],
    cache: &mut EmbeddingCache,
    provider: &dyn EmbeddingProvider,
) -> Result<(), EmbeddingError> {
    if provider.provider_tag() != cache.provider_tag() {
        return Err(EmbeddingError::ProviderMismatch {
            cache_tag: cache.provider_tag.clone(),
            provider_tag: provider.provider_tag().to_string(),
        });
    }
    let mut missing: Vec<&str> = Vec::new();
    for text in texts {
        if text.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        if cache.get(text).is_none() && !missing.contains(&text.as_str()) {
            missing.push(text);
        }
    }
    if missing.is_empty() {
        return Ok(());
    }
    let raw = provider.embed_batch(&missing)?;
    if raw.len() != missing.len() {
        return Err(EmbeddingError::ProviderShape {
            expected: missing.len(),
            got: raw.len(),
        });
    }
    let mut normalized = Vec::with_capacity(raw.len());
    for values in raw {
        if values.len() != cache.dim() {
            return Err(EmbeddingError::DimensionMismatch {
                expected: cache.dim(),
                got: values.len(),
            });
        }
        normalized.push(EmbeddingVector::unit_normalized(values)?);
    }
    for (text, vector) in missing.into_iter().zip(normalized) {
        cache.insert(text, vector)?;
    }
    Ok(())
}
