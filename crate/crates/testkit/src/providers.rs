//! Deterministic embedding providers for tests.

use flowmine_core::embedding::{EmbeddingProvider, ProviderError};
use std::cell::RefCell;
use std::collections::HashMap;

/// Assigns every distinct text its own standard-basis axis.
///
/// The first text seen gets axis 0, the next new text axis 1, and so on;
/// repeated texts keep their axis. Cosine similarity between two texts is
/// therefore exactly one when they are equal and exactly zero otherwise,
/// which makes similarity-thresholded behavior reduce to exact matching.
pub struct OneHotProvider {
    dim: usize,
    assigned: RefCell<HashMap<String, usize>>,
}

impl OneHotProvider {
    /// A provider with capacity for `dim` distinct texts.
    pub fn new(dim: usize) -> Self {
        OneHotProvider {
            dim,
            assigned: RefCell::new(HashMap::new()),
        }
    }

    /// The tag an [`flowmine_core::embedding::EmbeddingCache`] must carry
    /// to accept this provider.
    pub const TAG: &'static str = "one-hot-test";
}

impl EmbeddingProvider for OneHotProvider {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        texts
            .iter()
            .map(|text| {
                let mut assigned = self.assigned.borrow_mut();
                let next = assigned.len();
                let axis = *assigned.entry((*text).to_string()).or_insert(next);
                if axis >= self.dim {
                    return Err(ProviderError::new(format!(
                        "one-hot capacity {} exhausted by {text:?}",
                        self.dim
                    )));
                }
                let mut vector = vec![0.0; self.dim];
                vector[axis] = 1.0;
                Ok(vector)
            })
            .collect()
    }

    fn provider_tag(&self) -> &str {
        OneHotProvider::TAG
    }
}

/// Serves a fixed table of raw vectors; unknown texts are errors.
pub struct FixedProvider {
    tag: String,
    vectors: HashMap<String, Vec<f64>>,
}

impl FixedProvider {
    /// A provider answering with exactly the given vectors under `tag`.
    pub fn new(tag: &str, entries: &[(&str, &[f64])]) -> Self {
        FixedProvider {
            tag: tag.to_string(),
            vectors: entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_vec()))
                .collect(),
        }
    }
}

impl EmbeddingProvider for FixedProvider {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        texts
            .iter()
            .map(|text| {
                self.vectors
                    .get(*text)
                    .cloned()
                    .ok_or_else(|| ProviderError::new(format!("no fixed vector for {text:?}")))
            })
            .collect()
    }

    fn provider_tag(&self) -> &str {
        &self.tag
    }
}
