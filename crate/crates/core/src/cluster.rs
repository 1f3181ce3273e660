//! Intent normalization by per-role agglomerative clustering.
//!
//! Free-form annotation produces near-duplicate canonical forms ("express
//! greeting" vs "send greeting"). Normalization clusters each role's forms
//! bottom-up by the Euclidean distance between their unit embeddings,
//! merging the closest pair while that distance stays within a threshold,
//! then rewrites every form to its cluster's representative — the member
//! occurring most often in the corpus.
//!
//! Everything is deterministic: forms are indexed in lexicographic order,
//! linkage values are accumulated over members in ascending index order,
//! and tied merges pick the lexicographically smallest cluster pair.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::corpus::{Conversation, Corpus, SpeakerRole, Turn};
use crate::embedding::{
    embed, euclidean_distance, prefetch, EmbeddingCache, EmbeddingError, EmbeddingProvider,
    EmbeddingVector,
};

/// Errors from clustering and normalization.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    /// The merge threshold is not a finite, non-negative number.
    #[error("merge threshold {value} must be finite and non-negative")]
    InvalidThreshold {
        /// The rejected value.
        value: f64,
    },
    /// Embedding lookups failed.
    #[error("embedding failure: {0}")]
    Embedding(#[from] EmbeddingError),
    /// A turn carries a form the normalization mapping does not cover.
    #[error("no normalization mapping for {role} form {form:?}")]
    UnmappedForm {
        /// Role token of the turn ("user" or "bot").
        role: &'static str,
        /// The uncovered canonical form.
        form: String,
    },
}

/// How the distance between two clusters is derived from point distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    /// Arithmetic mean over all cross-cluster point pairs.
    #[default]
    Average,
    /// Maximum over all cross-cluster point pairs.
    Complete,
    /// Minimum over all cross-cluster point pairs.
    Single,
}

/// One cluster of canonical forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Member forms in lexicographic order.
    pub members: Vec<String>,
    /// The member with the highest corpus frequency (ties: lexicographically
    /// smallest).
    pub representative: String,
}

/// Counts how often each canonical form occurs for `role` across the corpus.
///
/// Unannotated turns are skipped; the stored (unprefixed) form is counted.
pub fn form_frequencies(corpus: &Corpus, role: SpeakerRole) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for conversation in corpus.conversations() {
        for turn in conversation.turns() {
            if turn.role() != role {
                continue;
            }
            if let Some(form) = turn.canonical_form() {
                *counts.entry(form.to_string()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Linkage between two member sets, from the base point-distance matrix.
///
/// The average variant accumulates cross distances over members in
/// ascending index order, so any implementation following the same order
/// produces bit-identical values.
fn linkage_distance(
    linkage: Linkage,
    base: &[Vec<f64>],
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
) -> f64 {
    match linkage {
        Linkage::Average => {
            let mut sum = 0.0;
            for &x in a {
                for &y in b {
                    sum += base[x][y];
                }
            }
            sum / ((a.len() * b.len()) as f64)
        }
        Linkage::Complete => {
            let mut max = f64::NEG_INFINITY;
            for &x in a {
                for &y in b {
                    if base[x][y] > max {
                        max = base[x][y];
                    }
                }
            }
            max
        }
        Linkage::Single => {
            let mut min = f64::INFINITY;
            for &x in a {
                for &y in b {
                    if base[x][y] < min {
                        min = base[x][y];
                    }
                }
            }
            min
        }
    }
}

/// Clusters the given forms agglomeratively.
///
/// Forms are indexed in ascending lexicographic order and embedded through
/// the cache. Starting from singletons, the pair of clusters with the
/// smallest linkage distance merges while that distance is at most
/// `threshold`; a tie picks the pair whose smallest members come first.
/// Each result cluster's representative is its most frequent member
/// (frequency ties pick the lexicographically smallest), and clusters are
/// returned ordered by their smallest member.
pub fn cluster_forms(
    frequencies: &BTreeMap<String, u64>,
    threshold: f64,
    linkage: Linkage,
    cache: &mut EmbeddingCache,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Vec<Cluster>, ClusterError> {
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(ClusterError::InvalidThreshold { value: threshold });
    }
    let forms: Vec<&str> = frequencies.keys().map(String::as_str).collect();
    if let Some(p) = provider {
        let texts: Vec<String> = forms.iter().map(|f| f.to_string()).collect();
        prefetch(&texts, cache, p)?;
    }
    let vectors: Vec<EmbeddingVector> = forms
        .iter()
        .map(|f| embed(f, cache, provider))
        .collect::<Result<_, _>>()?;

    let m = forms.len();
    let mut base = alloc::vec![alloc::vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d = euclidean_distance(&vectors[i], &vectors[j])?;
            base[i][j] = d;
            base[j][i] = d;
        }
    }

    // Cluster id == smallest member index, which keeps id order and
    // lexicographic member order aligned.
    let mut clusters: BTreeMap<usize, BTreeSet<usize>> = (0..m)
        .map(|i| (i, BTreeSet::from([i])))
        .collect();

    loop {
        let ids: Vec<usize> = clusters.keys().copied().collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for (a_pos, &a) in ids.iter().enumerate() {
            for &b in &ids[a_pos + 1..] {
                let d = linkage_distance(linkage, &base, &clusters[&a], &clusters[&b]);
                let is_better = match best {
                    None => true,
                    Some((best_d, _, _)) => d.total_cmp(&best_d) == core::cmp::Ordering::Less,
                };
                if is_better {
                    best = Some((d, a, b));
                }
            }
        }
        match best {
            Some((d, a, b)) if d <= threshold => {
                let absorbed = clusters.remove(&b).expect("b is a live cluster id");
                clusters
                    .get_mut(&a)
                    .expect("a is a live cluster id")
                    .extend(absorbed);
            }
            _ => break,
        }
    }

    Ok(clusters
        .into_values()
        .map(|member_ids| {
            let members: Vec<String> = member_ids.iter().map(|&i| forms[i].to_string()).collect();
            let representative = members
                .iter()
                .max_by(|x, y| {
                    frequencies[*x]
                        .cmp(&frequencies[*y])
                        // On equal frequency prefer the lexicographically
                        // smaller form, i.e. treat it as the "greater" pick.
                        .then_with(|| y.cmp(x))
                })
                .expect("clusters are never empty")
                .clone();
            Cluster {
                members,
                representative,
            }
        })
        .collect())
}

/// The per-role clustering outcome used to rewrite a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalization {
    /// Clusters over user-turn forms.
    pub user: Vec<Cluster>,
    /// Clusters over agent-turn forms.
    pub agent: Vec<Cluster>,
}

impl Normalization {
    /// The form-to-representative mapping for one role.
    pub fn mapping(&self, role: SpeakerRole) -> BTreeMap<&str, &str> {
        let clusters = match role {
            SpeakerRole::User => &self.user,
            SpeakerRole::Agent => &self.agent,
        };
        let mut map = BTreeMap::new();
        for cluster in clusters {
            for member in &cluster.members {
                map.insert(member.as_str(), cluster.representative.as_str());
            }
        }
        map
    }

    /// Rewrites every annotated turn's form to its cluster representative.
    ///
    /// The mapping must cover every annotated form of its role — a form
    /// outside the clustering is an error naming the form and role.
    /// Unannotated turns pass through; the input corpus is not mutated.
    pub fn apply(&self, corpus: &Corpus) -> Result<Corpus, ClusterError> {
        let user_map = self.mapping(SpeakerRole::User);
        let agent_map = self.mapping(SpeakerRole::Agent);
        let mut conversations = Vec::with_capacity(corpus.len());
        for conversation in corpus.conversations() {
            let mut turns = Vec::with_capacity(conversation.turns().len());
            for turn in conversation.turns() {
                match turn.canonical_form() {
                    Some(form) => {
                        let map = match turn.role() {
                            SpeakerRole::User => &user_map,
                            SpeakerRole::Agent => &agent_map,
                        };
                        let rewritten = map.get(form).copied().ok_or_else(|| {
                            ClusterError::UnmappedForm {
                                role: turn.role().prefix_token(),
                                form: form.to_string(),
                            }
                        })?;
                        turns.push(
                            Turn::annotated(turn.role(), turn.text(), rewritten)
                                .expect("representatives are validated forms"),
                        );
                    }
                    None => turns.push(turn.clone()),
                }
            }
            conversations.push(
                Conversation::new(
                    conversation.id(),
                    turns,
                    conversation.domain().map(String::from),
                )
                .expect("rewriting forms preserves conversation validity"),
            );
        }
        Ok(Corpus::new(conversations).expect("rewriting forms preserves corpus validity"))
    }
}

/// Clusters both roles' forms and packages the outcome.
///
/// User and agent forms cluster independently, each with its own threshold,
/// sharing one linkage rule, embedding cache, and provider.
pub fn build_normalization(
    corpus: &Corpus,
    user_threshold: f64,
    agent_threshold: f64,
    linkage: Linkage,
    cache: &mut EmbeddingCache,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Normalization, ClusterError> {
    let user_freq = form_frequencies(corpus, SpeakerRole::User);
    let agent_freq = form_frequencies(corpus, SpeakerRole::Agent);
    Ok(Normalization {
        user: cluster_forms(&user_freq, user_threshold, linkage, cache, provider)?,
        agent: cluster_forms(&agent_freq, agent_threshold, linkage, cache, provider)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::ProviderError;
    use alloc::vec;

    /// Maps exact strings to fixed raw vectors.
    struct MapProvider(BTreeMap<String, Vec<f64>>);

    impl MapProvider {
        fn new(entries: &[(&str, &[f64])]) -> Self {
            MapProvider(
                entries
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.to_vec()))
                    .collect(),
            )
        }
    }

    impl EmbeddingProvider for MapProvider {
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
            texts
                .iter()
                .map(|t| {
                    self.0
                        .get(*t)
                        .cloned()
                        .ok_or_else(|| ProviderError::new(alloc::format!("no vector for {t:?}")))
                })
                .collect()
        }

        fn provider_tag(&self) -> &str {
            "map-test"
        }
    }

    fn freq(entries: &[(&str, u64)]) -> BTreeMap<String, u64> {
        entries.iter().map(|(f, c)| (f.to_string(), *c)).collect()
    }

    fn member_sets(clusters: &[Cluster]) -> Vec<Vec<&str>> {
        clusters
            .iter()
            .map(|c| c.members.iter().map(String::as_str).collect())
            .collect()
    }

    #[test]
    fn identical_embeddings_merge_and_frequency_picks_the_representative() {
        let provider = MapProvider::new(&[
            ("ask help", &[1.0, 0.0]),
            ("request help", &[1.0, 0.0]),
            ("say goodbye", &[0.0, 1.0]),
        ]);
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let clusters = cluster_forms(
            &freq(&[("ask help", 2), ("request help", 5), ("say goodbye", 1)]),
            0.5,
            Linkage::Average,
            &mut cache,
            Some(&provider),
        )
        .unwrap();
        assert_eq!(
            member_sets(&clusters),
            vec![vec!["ask help", "request help"], vec!["say goodbye"]]
        );
        assert_eq!(clusters[0].representative, "request help");
        assert_eq!(clusters[1].representative, "say goodbye");
    }

    #[test]
    fn representative_frequency_ties_pick_the_lexicographically_smallest() {
        let provider =
            MapProvider::new(&[("alpha", &[1.0, 0.0]), ("beta", &[1.0, 0.0])]);
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let clusters = cluster_forms(
            &freq(&[("alpha", 3), ("beta", 3)]),
            0.5,
            Linkage::Average,
            &mut cache,
            Some(&provider),
        )
        .unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].representative, "alpha");
    }

    #[test]
    fn merges_happen_at_the_threshold_but_not_above_it() {
        // Orthogonal unit vectors sit at distance sqrt(2); IEEE sqrt is
        // exactly rounded, so equality against the same expression is exact.
        let provider = MapProvider::new(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let boundary = libm::sqrt(2.0);

        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let merged = cluster_forms(
            &freq(&[("a", 1), ("b", 1)]),
            boundary,
            Linkage::Average,
            &mut cache,
            Some(&provider),
        )
        .unwrap();
        assert_eq!(merged.len(), 1);

        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let apart = cluster_forms(
            &freq(&[("a", 1), ("b", 1)]),
            boundary * 0.999,
            Linkage::Average,
            &mut cache,
            Some(&provider),
        )
        .unwrap();
        assert_eq!(apart.len(), 2);
    }

    #[test]
    fn single_linkage_chains_where_complete_linkage_stops() {
        // Three unit vectors at 0, 60 and 120 degrees: adjacent pairs sit at
        // distance ~1.0, the outer pair at ~1.73.
        let entries: &[(&str, &[f64])] = &[
            ("fa", &[1.0, 0.0]),
            ("fb", &[0.5, 0.866_025_403_784_438_6]),
            ("fc", &[-0.5, 0.866_025_403_784_438_6]),
        ];
        let frequencies = freq(&[("fa", 1), ("fb", 1), ("fc", 1)]);

        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let chained = cluster_forms(
            &frequencies,
            1.1,
            Linkage::Single,
            &mut cache,
            Some(&MapProvider::new(entries)),
        )
        .unwrap();
        assert_eq!(member_sets(&chained), vec![vec!["fa", "fb", "fc"]]);

        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let complete = cluster_forms(
            &frequencies,
            1.1,
            Linkage::Complete,
            &mut cache,
            Some(&MapProvider::new(entries)),
        )
        .unwrap();
        // The tied adjacent pairs resolve to the smallest index pair, so
        // fa and fb merge; the stricter linkages then see the far fc.
        assert_eq!(member_sets(&complete), vec![vec!["fa", "fb"], vec!["fc"]]);

        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let average = cluster_forms(
            &frequencies,
            1.1,
            Linkage::Average,
            &mut cache,
            Some(&MapProvider::new(entries)),
        )
        .unwrap();
        assert_eq!(member_sets(&average), vec![vec!["fa", "fb"], vec!["fc"]]);
    }

    #[test]
    fn clusters_come_back_ordered_by_smallest_member() {
        let provider = MapProvider::new(&[
            ("delta", &[0.0, 1.0]),
            ("echo", &[0.0, 1.0]),
            ("alpha", &[1.0, 0.0]),
            ("bravo", &[1.0, 0.0]),
        ]);
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let clusters = cluster_forms(
            &freq(&[("delta", 1), ("echo", 1), ("alpha", 1), ("bravo", 1)]),
            0.5,
            Linkage::Average,
            &mut cache,
            Some(&provider),
        )
        .unwrap();
        assert_eq!(
            member_sets(&clusters),
            vec![vec!["alpha", "bravo"], vec!["delta", "echo"]]
        );
    }

    #[test]
    fn empty_and_singleton_inputs_are_fine() {
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let none = cluster_forms(
            &BTreeMap::new(),
            0.9,
            Linkage::Average,
            &mut cache,
            None,
        )
        .unwrap();
        assert!(none.is_empty());

        let provider = MapProvider::new(&[("only", &[1.0, 0.0])]);
        let one = cluster_forms(
            &freq(&[("only", 4)]),
            0.9,
            Linkage::Average,
            &mut cache,
            Some(&provider),
        )
        .unwrap();
        assert_eq!(member_sets(&one), vec![vec!["only"]]);
        assert_eq!(one[0].representative, "only");
    }

    #[test]
    fn bad_thresholds_are_rejected() {
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        for bad in [f64::NAN, f64::INFINITY, -0.5] {
            let err = cluster_forms(
                &BTreeMap::new(),
                bad,
                Linkage::Average,
                &mut cache,
                None,
            )
            .unwrap_err();
            assert!(matches!(err, ClusterError::InvalidThreshold { .. }));
        }
    }

    #[test]
    fn frequencies_count_per_role_and_skip_unannotated_turns() {
        let c1 = Conversation::new(
            "c1",
            vec![
                Turn::annotated(SpeakerRole::User, "hi", "greet").unwrap(),
                Turn::annotated(SpeakerRole::Agent, "hello", "welcome").unwrap(),
                Turn::annotated(SpeakerRole::User, "bye", "farewell").unwrap(),
                Turn::new(SpeakerRole::Agent, "later").unwrap(),
            ],
            None,
        )
        .unwrap();
        let c2 = Conversation::new(
            "c2",
            vec![Turn::annotated(SpeakerRole::User, "hey", "greet").unwrap()],
            None,
        )
        .unwrap();
        let corpus = Corpus::new(vec![c1, c2]).unwrap();
        assert_eq!(
            form_frequencies(&corpus, SpeakerRole::User),
            freq(&[("greet", 2), ("farewell", 1)])
        );
        assert_eq!(
            form_frequencies(&corpus, SpeakerRole::Agent),
            freq(&[("welcome", 1)])
        );
    }

    #[test]
    fn applying_a_normalization_rewrites_forms_per_role() {
        let normalization = Normalization {
            user: vec![Cluster {
                members: vec!["ask help".to_string(), "request help".to_string()],
                representative: "request help".to_string(),
            }],
            // The same string clusters separately on the agent side and
            // keeps itself as representative there.
            agent: vec![Cluster {
                members: vec!["ask help".to_string()],
                representative: "ask help".to_string(),
            }],
        };
        let conv = Conversation::new(
            "c1",
            vec![
                Turn::annotated(SpeakerRole::User, "help me", "ask help").unwrap(),
                Turn::annotated(SpeakerRole::Agent, "sure", "ask help").unwrap(),
                Turn::new(SpeakerRole::User, "thanks").unwrap(),
            ],
            None,
        )
        .unwrap();
        let corpus = Corpus::new(vec![conv]).unwrap();
        let rewritten = normalization.apply(&corpus).unwrap();
        let turns = rewritten.conversations()[0].turns();
        assert_eq!(turns[0].canonical_form(), Some("request help"));
        assert_eq!(turns[1].canonical_form(), Some("ask help"));
        // Unannotated turns pass through unchanged.
        assert_eq!(turns[2].canonical_form(), None);
        // Texts and the input corpus stay untouched.
        assert_eq!(turns[0].text(), "help me");
        assert_eq!(
            corpus.conversations()[0].turns()[0].canonical_form(),
            Some("ask help")
        );
    }

    #[test]
    fn applying_a_normalization_rejects_uncovered_forms() {
        let normalization = Normalization {
            user: vec![],
            agent: vec![],
        };
        let conv = Conversation::new(
            "c1",
            vec![Turn::annotated(SpeakerRole::User, "hi", "stray form").unwrap()],
            None,
        )
        .unwrap();
        let corpus = Corpus::new(vec![conv]).unwrap();
        assert_eq!(
            normalization.apply(&corpus),
            Err(ClusterError::UnmappedForm {
                role: "user",
                form: "stray form".to_string()
            })
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// From-scratch reference: clusters as sorted index vectors, linkage
        /// recomputed from the embeddings (not a cached matrix) each step.
        fn reference_cluster(
            vectors: &[EmbeddingVector],
            threshold: f64,
            linkage: Linkage,
        ) -> Vec<Vec<usize>> {
            let mut clusters: Vec<Vec<usize>> = (0..vectors.len()).map(|i| vec![i]).collect();
            loop {
                let mut best: Option<(f64, usize, usize)> = None;
                for a in 0..clusters.len() {
                    for b in (a + 1)..clusters.len() {
                        let mut sum = 0.0;
                        let mut max = f64::NEG_INFINITY;
                        let mut min = f64::INFINITY;
                        for &x in &clusters[a] {
                            for &y in &clusters[b] {
                                let d =
                                    euclidean_distance(&vectors[x], &vectors[y]).unwrap();
                                sum += d;
                                if d > max {
                                    max = d;
                                }
                                if d < min {
                                    min = d;
                                }
                            }
                        }
                        let d = match linkage {
                            Linkage::Average => {
                                sum / ((clusters[a].len() * clusters[b].len()) as f64)
                            }
                            Linkage::Complete => max,
                            Linkage::Single => min,
                        };
                        let better = match best {
                            None => true,
                            Some((bd, _, _)) => {
                                d.total_cmp(&bd) == core::cmp::Ordering::Less
                            }
                        };
                        if better {
                            best = Some((d, a, b));
                        }
                    }
                }
                match best {
                    Some((d, a, b)) if d <= threshold => {
                        let absorbed = clusters.remove(b);
                        clusters[a].extend(absorbed);
                        clusters[a].sort_unstable();
                        // Keep clusters ordered by smallest member so tied
                        // linkage picks the lexicographically smallest pair.
                        clusters.sort_by_key(|c| c[0]);
                    }
                    _ => break,
                }
            }
            clusters
        }

        fn arbitrary_points() -> impl Strategy<Value = Vec<Vec<f64>>> {
            proptest::collection::vec(
                proptest::collection::vec(-2i8..=2, 3).prop_filter(
                    "nonzero vector",
                    |v| v.iter().any(|&c| c != 0),
                ),
                1..8,
            )
            .prop_map(|points| {
                points
                    .into_iter()
                    .map(|p| p.into_iter().map(f64::from).collect())
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn clustering_matches_the_from_scratch_reference(
                points in arbitrary_points(),
                threshold in proptest::sample::select(&[0.3f64, 0.7, 1.1, 2.5][..]),
                linkage in proptest::sample::select(
                    &[Linkage::Average, Linkage::Complete, Linkage::Single][..]
                ),
            ) {
                // Name forms so lexicographic order equals index order.
                let forms: Vec<String> = (0..points.len())
                    .map(|i| alloc::format!("form {i:02}"))
                    .collect();
                let frequencies: BTreeMap<String, u64> =
                    forms.iter().map(|f| (f.clone(), 1)).collect();
                let mut cache = EmbeddingCache::new(3, "map-test").unwrap();
                let entries: Vec<(&str, &[f64])> = forms
                    .iter()
                    .zip(points.iter())
                    .map(|(f, p)| (f.as_str(), p.as_slice()))
                    .collect();
                let provider = MapProvider::new(&entries);
                let clusters = cluster_forms(
                    &frequencies,
                    threshold,
                    linkage,
                    &mut cache,
                    Some(&provider),
                )
                .unwrap();

                let vectors: Vec<EmbeddingVector> = forms
                    .iter()
                    .map(|f| cache.get(f).unwrap().clone())
                    .collect();
                let expected = reference_cluster(&vectors, threshold, linkage);
                let expected_forms: Vec<Vec<&str>> = expected
                    .iter()
                    .map(|c| c.iter().map(|&i| forms[i].as_str()).collect())
                    .collect();
                prop_assert_eq!(member_sets(&clusters), expected_forms);
            }
        }
    }
}
