//! Deterministic offline embedding provider.
//!
//! Real pipelines embed intents with a sentence-encoder service; for fully
//! offline runs — tests, demos, the bundled synthetic corpus — this
//! provider derives a vector from the text alone. Each text maps to the
//! indicator vector of its distinct lowercase whitespace tokens over a
//! vocabulary collected from a reference corpus, so the cosine similarity
//! of two texts is the token-set overlap
//! `|A ∩ B| / sqrt(|A| · |B|)`: identical phrasings score 1, disjoint
//! phrasings score 0, and related step sequences land in between. Tokens
//! outside the vocabulary fall into one of sixteen trailing hash slots so
//! unseen words still embed instead of failing.
//!
//! The vocabulary is rebuilt from the configured corpus file at every
//! stage, as a sorted set, so every stage of a pipeline — and any
//! permutation of the corpus — sees the same vector space.

use std::collections::BTreeSet;

use flowmine_core::corpus::Corpus;
use flowmine_core::embedding::{EmbeddingProvider, ProviderError};

/// How many trailing slots catch tokens outside the vocabulary.
const OVERFLOW_SLOTS: usize = 16;

/// The provider tag recorded in caches fed by this embedder.
pub const SYNTHETIC_TAG: &str = "synthetic-v1";

/// Token-set indicator embedder over a corpus-derived vocabulary.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    vocabulary: BTreeSet<String>,
    dim: usize,
}

fn fnv1a(token: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in token.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn tokens_of(text: &str) -> BTreeSet<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

impl SyntheticProvider {
    /// Builds the vocabulary from every turn text and canonical form in
    /// `corpus`, plus the role prefix tokens used in graph node names.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut vocabulary = BTreeSet::new();
        vocabulary.insert("user".to_string());
        vocabulary.insert("bot".to_string());
        for conversation in corpus.conversations() {
            for turn in conversation.turns() {
                vocabulary.extend(tokens_of(turn.text()));
                if let Some(form) = turn.canonical_form() {
                    vocabulary.extend(tokens_of(form));
                }
            }
        }
        let dim = vocabulary.len() + OVERFLOW_SLOTS;
        SyntheticProvider { vocabulary, dim }
    }

    /// The vector dimension: vocabulary size plus the overflow slots.
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index_of(&self, token: &str) -> usize {
        match self.vocabulary.iter().position(|t| t == token) {
            Some(index) => index,
            None => self.vocabulary.len() + (fnv1a(token) % OVERFLOW_SLOTS as u64) as usize,
        }
    }

    fn embed_one(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let tokens = tokens_of(text);
        if tokens.is_empty() {
            return Err(ProviderError::new(format!(
                "cannot embed text without tokens: {text:?}"
            )));
        }
        let mut vector = vec![0.0; self.dim];
        for token in &tokens {
            vector[self.index_of(token)] = 1.0;
        }
        Ok(vector)
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        texts.iter().map(|text| self.embed_one(text)).collect()
    }

    fn provider_tag(&self) -> &str {
        SYNTHETIC_TAG
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowmine_core::corpus::{Conversation, SpeakerRole, Turn};
    use flowmine_core::embedding::{cosine_similarity, EmbeddingCache, EmbeddingVector};

    fn small_corpus() -> Corpus {
        let turns = vec![
            Turn::annotated(SpeakerRole::User, "hello there", "express greeting").unwrap(),
            Turn::annotated(SpeakerRole::Agent, "welcome in", "return greeting").unwrap(),
        ];
        let conversation = Conversation::new("c1", turns, None).unwrap();
        Corpus::new(vec![conversation]).unwrap()
    }

    fn unit(provider: &SyntheticProvider, text: &str) -> EmbeddingVector {
        let raw = provider.embed_batch(&[text]).unwrap().remove(0);
        EmbeddingVector::unit_normalized(raw).unwrap()
    }

    #[test]
    fn cosine_equals_token_set_overlap() {
        let provider = SyntheticProvider::from_corpus(&small_corpus());
        let a = unit(&provider, "user express greeting");
        let b = unit(&provider, "user return greeting");
        // Overlap {user, greeting} of two three-token sets: 2 / sqrt(9).
        let sim = cosine_similarity(&a, &b).unwrap();
        assert!((sim - 2.0 / 3.0).abs() < 1e-12, "sim {sim}");
        let c = unit(&provider, "express greeting");
        let d = unit(&provider, "welcome in");
        assert_eq!(cosine_similarity(&c, &d).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&c, &c).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_tokens_do_not_change_the_vector() {
        let provider = SyntheticProvider::from_corpus(&small_corpus());
        let once = provider.embed_batch(&["hello there"]).unwrap();
        let twice = provider.embed_batch(&["hello hello there"]).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn out_of_vocabulary_tokens_land_in_overflow_slots() {
        let provider = SyntheticProvider::from_corpus(&small_corpus());
        let vector = provider.embed_batch(&["zyzzyva"]).unwrap().remove(0);
        let vocabulary_len = provider.dim() - OVERFLOW_SLOTS;
        let hot: Vec<usize> = vector
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(hot.len(), 1);
        assert!(hot[0] >= vocabulary_len, "index {} below vocabulary", hot[0]);
    }

    #[test]
    fn vocabulary_is_order_independent() {
        let corpus = small_corpus();
        let reversed = {
            let turns = vec![
                Turn::annotated(SpeakerRole::Agent, "welcome in", "return greeting").unwrap(),
                Turn::annotated(SpeakerRole::User, "hello there", "express greeting").unwrap(),
            ];
            let conversation = Conversation::new("c1", turns, None).unwrap();
            Corpus::new(vec![conversation]).unwrap()
        };
        let a = SyntheticProvider::from_corpus(&corpus);
        let b = SyntheticProvider::from_corpus(&reversed);
        assert_eq!(a.dim(), b.dim());
        assert_eq!(
            a.embed_batch(&["hello greeting"]).unwrap(),
            b.embed_batch(&["hello greeting"]).unwrap()
        );
    }

    #[test]
    fn works_through_the_embedding_cache() {
        let provider = SyntheticProvider::from_corpus(&small_corpus());
        let mut cache = EmbeddingCache::new(provider.dim(), SYNTHETIC_TAG).unwrap();
        let v =
            flowmine_core::embedding::embed("user express greeting", &mut cache, Some(&provider))
                .unwrap();
        assert_eq!(v.dim(), provider.dim());
        assert_eq!(cache.len(), 1);
    }
}
