//! Flow quality metrics.
//!
//! A mined flow is scored against held-out conversations two ways. Token
//! overlap metrics — BLEU (up to 4-grams, add-one smoothed, with a brevity
//! penalty), ROUGE-L (LCS F1), and a light METEOR variant (exact unigram
//! alignment with a fragmentation penalty) — compare the flow's flattened
//! token sequence with each conversation's canonical-form tokens. Step
//! subsequence metrics treat whole canonical forms as atomic symbols: an
//! exact longest-common-subsequence count and a soft variant where two
//! steps match when their embeddings' cosine similarity reaches a
//! threshold. Separately, human step-to-turn alignments yield micro
//! precision and recall, overall and split by speaker role.
//!
//! All scores are percentages in `[0, 100]` except the LCS counts, which
//! are lengths.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, SpeakerRole};
use crate::embedding::{
    cosine_similarity, embed, prefetch, EmbeddingCache, EmbeddingError, EmbeddingProvider,
    EmbeddingVector,
};
use crate::extract::DialogueFlow;

/// Errors from flow scoring.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    /// The held-out corpus has no conversations.
    #[error("held-out corpus is empty")]
    EmptyCorpus,
    /// The similarity threshold is not a finite number.
    #[error("similarity threshold {value} must be finite")]
    InvalidThreshold {
        /// The rejected value.
        value: f64,
    },
    /// A held-out conversation is missing annotations.
    #[error("held-out corpus is not fully annotated: {0}")]
    Unannotated(#[from] CorpusError),
    /// Embedding lookups failed.
    #[error("embedding failure: {0}")]
    Embedding(#[from] EmbeddingError),
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], u64> {
    let mut counts: BTreeMap<&[String], u64> = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// The reference length closest to the hypothesis length (ties: shorter).
fn closest_reference_length(hyp_len: usize, references: &[Vec<String>]) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&l| (l.abs_diff(hyp_len), l))
        .unwrap_or(0)
}

/// BLEU score of a hypothesis against one or more references, in
/// `[0, 100]`.
///
/// Uses modified n-gram precision up to order `min(4, hypothesis length)`,
/// clipping each n-gram's count at its maximum count in any single
/// reference. Orders with zero matches are add-one smoothed (numerator and
/// denominator) instead of zeroing the whole score. The order precisions
/// combine by geometric mean; a brevity penalty of
/// `exp(1 - ref_len / hyp_len)` applies when the hypothesis is shorter
/// than the closest reference length. Empty hypotheses or reference sets
/// score zero.
pub fn bleu(hypothesis: &[String], references: &[Vec<String>]) -> f64 {
    let hyp_len = hypothesis.len();
    if hyp_len == 0 || references.is_empty() {
        return 0.0;
    }
    let max_order = core::cmp::min(4, hyp_len);
    let mut log_sum = 0.0;
    for n in 1..=max_order {
        let hyp_counts = ngram_counts(hypothesis, n);
        let reference_counts: Vec<BTreeMap<&[String], u64>> =
            references.iter().map(|r| ngram_counts(r, n)).collect();
        let mut matches = 0u64;
        for (gram, &count) in &hyp_counts {
            let best = reference_counts
                .iter()
                .map(|rc| rc.get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            matches += core::cmp::min(count, best);
        }
        let denom = (hyp_len - n + 1) as u64;
        let (numerator, denominator) = if matches == 0 {
            (1, denom + 1)
        } else {
            (matches, denom)
        };
        log_sum += libm::log(numerator as f64 / denominator as f64);
    }
    let ref_len = closest_reference_length(hyp_len, references);
    let brevity = if hyp_len < ref_len {
        libm::exp(1.0 - ref_len as f64 / hyp_len as f64)
    } else {
        1.0
    };
    brevity * libm::exp(log_sum / max_order as f64) * 100.0
}

/// LCS length with a pluggable position-match predicate.
fn lcs_length_by(
    a_len: usize,
    b_len: usize,
    mut matches: impl FnMut(usize, usize) -> bool,
) -> usize {
    if a_len == 0 || b_len == 0 {
        return 0;
    }
    let mut prev = alloc::vec![0usize; b_len + 1];
    let mut curr = alloc::vec![0usize; b_len + 1];
    for i in 0..a_len {
        for j in 0..b_len {
            curr[j + 1] = if matches(i, j) {
                prev[j] + 1
            } else {
                core::cmp::max(prev[j + 1], curr[j])
            };
        }
        core::mem::swap(&mut prev, &mut curr);
    }
    prev[b_len]
}

/// Length of the longest common subsequence under exact symbol equality.
pub fn lcs_exact(a: &[String], b: &[String]) -> usize {
    lcs_length_by(a.len(), b.len(), |i, j| a[i] == b[j])
}

/// ROUGE-L: the LCS F1 of hypothesis versus reference tokens, in
/// `[0, 100]`.
///
/// Precision is LCS over the hypothesis length, recall LCS over the
/// reference length. Zero LCS (or an empty side) scores zero.
pub fn rouge_l(hypothesis: &[String], reference: &[String]) -> f64 {
    if hypothesis.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_exact(hypothesis, reference);
    if lcs == 0 {
        return 0.0;
    }
    let precision = lcs as f64 / hypothesis.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall) * 100.0
}

/// Light METEOR variant: exact unigram alignment with a fragmentation
/// penalty, in `[0, 100]`.
///
/// Hypothesis tokens align greedily left to right; each token prefers the
/// reference position continuing the previous match (previous index plus
/// one) and otherwise takes the leftmost unused occurrence. The harmonic
/// mean weights recall nine to one, and the penalty is half the cubed
/// fragmentation ratio (chunks over matches), where a new chunk starts
/// whenever either side's adjacency breaks. No matches scores zero.
pub fn meteor(hypothesis: &[String], reference: &[String]) -> f64 {
    if hypothesis.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut used = alloc::vec![false; reference.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut prev_ref: Option<usize> = None;
    for (i, token) in hypothesis.iter().enumerate() {
        let continuation = prev_ref
            .map(|p| p + 1)
            .filter(|&c| c < reference.len() && !used[c] && reference[c] == *token);
        let chosen = continuation
            .or_else(|| (0..reference.len()).find(|&j| !used[j] && reference[j] == *token));
        if let Some(j) = chosen {
            used[j] = true;
            pairs.push((i, j));
            prev_ref = Some(j);
        }
    }
    let matches = pairs.len();
    if matches == 0 {
        return 0.0;
    }
    let precision = matches as f64 / hypothesis.len() as f64;
    let recall = matches as f64 / reference.len() as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let mut chunks = 1usize;
    for window in pairs.windows(2) {
        let (h0, r0) = window[0];
        let (h1, r1) = window[1];
        if !(h1 == h0 + 1 && r1 == r0 + 1) {
            chunks += 1;
        }
    }
    let penalty = 0.5 * libm::pow(chunks as f64 / matches as f64, 3.0);
    f_mean * (1.0 - penalty) * 100.0
}

/// LCS length where two symbols match when their embeddings' cosine
/// similarity is at least `threshold`.
///
/// Symbols are embedded through the cache (one provider batch for all
/// distinct symbols); each distinct symbol pair's similarity is computed
/// once per call. With identical-vector symbols and a threshold of one,
/// this reduces to [`lcs_exact`].
pub fn lcs_similarity(
    a: &[String],
    b: &[String],
    threshold: f64,
    cache: &mut EmbeddingCache,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<usize, MetricsError> {
    if !threshold.is_finite() {
        return Err(MetricsError::InvalidThreshold { value: threshold });
    }
    if a.is_empty() || b.is_empty() {
        return Ok(0);
    }
    let mut symbol_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut distinct: Vec<String> = Vec::new();
    for symbol in a.iter().chain(b.iter()) {
        if !symbol_ids.contains_key(symbol.as_str()) {
            symbol_ids.insert(symbol, distinct.len());
            distinct.push(symbol.clone());
        }
    }
    if let Some(p) = provider {
        prefetch(&distinct, cache, p)?;
    }
    let vectors: Vec<EmbeddingVector> = distinct
        .iter()
        .map(|s| embed(s, cache, provider))
        .collect::<Result<_, _>>()?;
    let a_ids: Vec<usize> = a.iter().map(|s| symbol_ids[s.as_str()]).collect();
    let b_ids: Vec<usize> = b.iter().map(|s| symbol_ids[s.as_str()]).collect();
    let mut memo: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    Ok(lcs_length_by(a.len(), b.len(), |i, j| {
        let key = (a_ids[i], b_ids[j]);
        *memo.entry(key).or_insert_with(|| {
            let similarity = cosine_similarity(&vectors[key.0], &vectors[key.1])
                .expect("cached vectors share one dimension and are unit scaled");
            similarity >= threshold
        })
    }))
}

/// Per-conversation scores of one flow against one held-out conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowScores {
    /// The held-out conversation.
    pub conversation_id: String,
    /// Token BLEU, `[0, 100]`.
    pub bleu: f64,
    /// Token ROUGE-L F1, `[0, 100]`.
    pub rouge_l: f64,
    /// Token METEOR variant, `[0, 100]`.
    pub meteor: f64,
    /// Step LCS length under exact form equality.
    pub lcs_exact: usize,
    /// Step LCS length under embedding similarity.
    pub lcs_similarity: usize,
}

/// Mean scores across the held-out corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    /// Mean token BLEU.
    pub mean_bleu: f64,
    /// Mean token ROUGE-L.
    pub mean_rouge_l: f64,
    /// Mean token METEOR variant.
    pub mean_meteor: f64,
    /// Mean exact step LCS length.
    pub mean_lcs_exact: f64,
    /// Mean similarity step LCS length.
    pub mean_lcs_similarity: f64,
}

/// Scores for a flow against every held-out conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEvaluation {
    /// One row per conversation, sorted by conversation id.
    pub per_conversation: Vec<FlowScores>,
    /// Means over the rows.
    pub summary: ScoreSummary,
}

fn lowercase_tokens(steps: &[String]) -> Vec<String> {
    steps
        .iter()
        .flat_map(|s| s.split_whitespace())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Scores `flow` against every conversation of the held-out corpus.
///
/// Token metrics compare the flow's flattened lowercase tokens with each
/// conversation's canonical-form tokens; step metrics compare the step
/// sequences as atomic symbols. Rows come back sorted by conversation id
/// and the summary holds their means, accumulated in that order.
pub fn score_flow(
    flow: &DialogueFlow,
    heldout: &Corpus,
    similarity_threshold: f64,
    cache: &mut EmbeddingCache,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<CorpusEvaluation, MetricsError> {
    if heldout.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    if !similarity_threshold.is_finite() {
        return Err(MetricsError::InvalidThreshold {
            value: similarity_threshold,
        });
    }
    let steps = flow.step_sequence();
    let hyp_tokens = flow.token_sequence();
    let mut rows: Vec<FlowScores> = Vec::with_capacity(heldout.len());
    for conversation in heldout.conversations() {
        let ref_steps = conversation.canonical_sequence()?;
        let ref_tokens = lowercase_tokens(&ref_steps);
        rows.push(FlowScores {
            conversation_id: conversation.id().to_string(),
            bleu: bleu(&hyp_tokens, core::slice::from_ref(&ref_tokens)),
            rouge_l: rouge_l(&hyp_tokens, &ref_tokens),
            meteor: meteor(&hyp_tokens, &ref_tokens),
            lcs_exact: lcs_exact(&steps, &ref_steps),
            lcs_similarity: lcs_similarity(
                &steps,
                &ref_steps,
                similarity_threshold,
                cache,
                provider,
            )?,
        });
    }
    rows.sort_by(|a, b| a.conversation_id.cmp(&b.conversation_id));
    let n = rows.len() as f64;
    let mut sums = [0.0f64; 5];
    for row in &rows {
        sums[0] += row.bleu;
        sums[1] += row.rouge_l;
        sums[2] += row.meteor;
        sums[3] += row.lcs_exact as f64;
        sums[4] += row.lcs_similarity as f64;
    }
    Ok(CorpusEvaluation {
        per_conversation: rows,
        summary: ScoreSummary {
            mean_bleu: sums[0] / n,
            mean_rouge_l: sums[1] / n,
            mean_meteor: sums[2] / n,
            mean_lcs_exact: sums[3] / n,
            mean_lcs_similarity: sums[4] / n,
        },
    })
}

/// How well a flow step covers an aligned conversation turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relevance {
    /// The step does not describe the turn.
    Zero,
    /// The step partially describes the turn.
    Half,
    /// The step fully describes the turn.
    One,
}

impl Relevance {
    /// The numeric credit this judgment contributes.
    pub fn value(self) -> f64 {
        match self {
            Relevance::Zero => 0.0,
            Relevance::Half => 0.5,
            Relevance::One => 1.0,
        }
    }
}

/// One judged step-to-turn link inside a conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepAlignment {
    /// Index into the flow's step sequence.
    pub step_index: usize,
    /// Index of the aligned turn, or `None` when the step matched nothing.
    pub turn_index: Option<usize>,
    /// The judged relevance.
    pub relevance: Relevance,
}

/// All judged links for one held-out conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationAlignment {
    /// The held-out conversation the links refer to.
    pub conversation_id: String,
    /// The judged links. Steps and turns absent here count as unmatched.
    pub entries: Vec<StepAlignment>,
}

/// Errors from alignment validation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignmentError {
    /// The flow has no steps to align.
    #[error("flow has no steps")]
    EmptyFlow,
    /// The held-out corpus has no conversations.
    #[error("held-out corpus is empty")]
    EmptyCorpus,
    /// An alignment names a conversation absent from the corpus.
    #[error("alignment references unknown conversation {id:?}")]
    UnknownConversation {
        /// The unknown id.
        id: String,
    },
    /// Two alignments name the same conversation.
    #[error("conversation {id:?} is aligned twice")]
    DuplicateConversation {
        /// The repeated id.
        id: String,
    },
    /// A step index is outside the flow.
    #[error("conversation {id:?}: step index {step_index} is out of range (flow has {steps} steps)")]
    StepOutOfRange {
        /// Conversation id.
        id: String,
        /// The offending index.
        step_index: usize,
        /// Flow step count.
        steps: usize,
    },
    /// A turn index is outside the conversation.
    #[error("conversation {id:?}: turn index {turn_index} is out of range ({turns} turns)")]
    TurnOutOfRange {
        /// Conversation id.
        id: String,
        /// The offending index.
        turn_index: usize,
        /// Conversation turn count.
        turns: usize,
    },
    /// A step is aligned twice within one conversation.
    #[error("conversation {id:?}: step {step_index} is aligned twice")]
    DuplicateStep {
        /// Conversation id.
        id: String,
        /// The repeated step index.
        step_index: usize,
    },
    /// A turn is claimed by two steps within one conversation.
    #[error("conversation {id:?}: turn {turn_index} is aligned twice")]
    DuplicateTurn {
        /// Conversation id.
        id: String,
        /// The repeated turn index.
        turn_index: usize,
    },
    /// A step aligned to no turn claims positive relevance.
    #[error("conversation {id:?}: step {step_index} has no turn but positive relevance")]
    NullTurnWithRelevance {
        /// Conversation id.
        id: String,
        /// The offending step index.
        step_index: usize,
    },
}

/// Micro-averaged precision and recall, as percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    /// Relevance credit over judged step slots, `[0, 100]`.
    pub precision: f64,
    /// Relevance credit over turns, `[0, 100]`.
    pub recall: f64,
}

/// Precision/recall of one conversation's alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationPrecisionRecall {
    /// The conversation.
    pub conversation_id: String,
    /// Its precision and recall against the flow.
    pub scores: PrecisionRecall,
}

/// The precision/recall report over a whole alignment set.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    /// Micro scores over all steps and turns.
    pub overall: PrecisionRecall,
    /// Micro scores restricted to user steps and user turns.
    pub user: PrecisionRecall,
    /// Micro scores restricted to bot steps and agent turns.
    pub bot: PrecisionRecall,
    /// One row per held-out conversation, sorted by id.
    pub per_conversation: Vec<ConversationPrecisionRecall>,
}

fn ratio(sum: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        0.0
    } else {
        sum / denom * 100.0
    }
}

/// Computes micro precision and recall of a flow from judged alignments.
///
/// Precision divides the total relevance credit by the number of step slots
/// judged — flow steps times conversations — and recall divides it by the
/// number of turns. The per-role scores restrict both to steps with the
/// matching role prefix and turns with the matching role. Conversations
/// without an alignment entry contribute zero credit but keep their full
/// denominators, so leaving a conversation unjudged lowers the scores
/// rather than hiding it.
pub fn evaluate_alignments(
    flow: &DialogueFlow,
    alignments: &[ConversationAlignment],
    heldout: &Corpus,
) -> Result<AlignmentReport, AlignmentError> {
    let steps = flow.step_sequence();
    if steps.is_empty() {
        return Err(AlignmentError::EmptyFlow);
    }
    if heldout.is_empty() {
        return Err(AlignmentError::EmptyCorpus);
    }
    let step_count = steps.len();
    let user_steps = steps.iter().filter(|s| s.starts_with("user ")).count();
    let bot_steps = steps.iter().filter(|s| s.starts_with("bot ")).count();

    let mut credit_by_conversation: BTreeMap<&str, f64> = BTreeMap::new();
    let mut total_credit = 0.0f64;
    let mut user_credit = 0.0f64;
    let mut bot_credit = 0.0f64;

    let mut seen_conversations: BTreeMap<&str, ()> = BTreeMap::new();
    for alignment in alignments {
        let id = alignment.conversation_id.as_str();
        let conversation = heldout
            .get(id)
            .ok_or_else(|| AlignmentError::UnknownConversation { id: id.to_string() })?;
        if seen_conversations.insert(id, ()).is_some() {
            return Err(AlignmentError::DuplicateConversation { id: id.to_string() });
        }
        let turn_count = conversation.turns().len();
        let mut seen_steps: BTreeMap<usize, ()> = BTreeMap::new();
        let mut seen_turns: BTreeMap<usize, ()> = BTreeMap::new();
        for entry in &alignment.entries {
            if entry.step_index >= step_count {
                return Err(AlignmentError::StepOutOfRange {
                    id: id.to_string(),
                    step_index: entry.step_index,
                    steps: step_count,
                });
            }
            if seen_steps.insert(entry.step_index, ()).is_some() {
                return Err(AlignmentError::DuplicateStep {
                    id: id.to_string(),
                    step_index: entry.step_index,
                });
            }
            match entry.turn_index {
                Some(turn_index) => {
                    if turn_index >= turn_count {
                        return Err(AlignmentError::TurnOutOfRange {
                            id: id.to_string(),
                            turn_index,
                            turns: turn_count,
                        });
                    }
                    if seen_turns.insert(turn_index, ()).is_some() {
                        return Err(AlignmentError::DuplicateTurn {
                            id: id.to_string(),
                            turn_index,
                        });
                    }
                }
                None => {
                    if entry.relevance != Relevance::Zero {
                        return Err(AlignmentError::NullTurnWithRelevance {
                            id: id.to_string(),
                            step_index: entry.step_index,
                        });
                    }
                }
            }
            let credit = entry.relevance.value();
            total_credit += credit;
            *credit_by_conversation.entry(id).or_insert(0.0) += credit;
            let step = &steps[entry.step_index];
            if step.starts_with("user ") {
                user_credit += credit;
            } else if step.starts_with("bot ") {
                bot_credit += credit;
            }
        }
    }

    let conversation_count = heldout.len();
    let mut total_turns = 0usize;
    let mut user_turns = 0usize;
    let mut agent_turns = 0usize;
    for conversation in heldout.conversations() {
        total_turns += conversation.turns().len();
        for turn in conversation.turns() {
            match turn.role() {
                SpeakerRole::User => user_turns += 1,
                SpeakerRole::Agent => agent_turns += 1,
            }
        }
    }

    let mut per_conversation: Vec<ConversationPrecisionRecall> = heldout
        .conversations()
        .iter()
        .map(|conversation| {
            let credit = credit_by_conversation
                .get(conversation.id())
                .copied()
                .unwrap_or(0.0);
            ConversationPrecisionRecall {
                conversation_id: conversation.id().to_string(),
                scores: PrecisionRecall {
                    precision: ratio(credit, step_count as f64),
                    recall: ratio(credit, conversation.turns().len() as f64),
                },
            }
        })
        .collect();
    per_conversation.sort_by(|a, b| a.conversation_id.cmp(&b.conversation_id));

    Ok(AlignmentReport {
        overall: PrecisionRecall {
            precision: ratio(total_credit, (step_count * conversation_count) as f64),
            recall: ratio(total_credit, total_turns as f64),
        },
        user: PrecisionRecall {
            precision: ratio(user_credit, (user_steps * conversation_count) as f64),
            recall: ratio(user_credit, user_turns as f64),
        },
        bot: PrecisionRecall {
            precision: ratio(bot_credit, (bot_steps * conversation_count) as f64),
            recall: ratio(bot_credit, agent_turns as f64),
        },
        per_conversation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Conversation, Turn};
    use crate::embedding::ProviderError;
    use crate::extract::DialoguePath;
    use alloc::vec;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn bleu_of_identical_sequences_is_one_hundred() {
        let tokens = toks(&["a", "b", "c", "d", "e"]);
        assert_eq!(bleu(&tokens, &[tokens.clone()]), 100.0);
    }

    #[test]
    fn bleu_of_disjoint_sequences_is_tiny_but_positive_via_smoothing() {
        let hyp = toks(&["a", "b", "c", "d"]);
        let reference = toks(&["w", "x", "y", "z"]);
        let score = bleu(&hyp, &[reference]);
        assert!(score > 0.0);
        // All four orders smoothed: numerators 1 over denominators 5..2.
        let expected = 100.0
            * libm::exp(
                (libm::log(1.0 / 5.0)
                    + libm::log(1.0 / 4.0)
                    + libm::log(1.0 / 3.0)
                    + libm::log(1.0 / 2.0))
                    / 4.0,
            );
        assert_eq!(score, expected);
    }

    #[test]
    fn bleu_smooths_only_the_zero_match_orders() {
        let hyp = toks(&["a", "b", "c", "d"]);
        let reference = toks(&["a", "b", "c", "x"]);
        // p1 = 3/4; p2 = 2/3 (ab and bc match, cd does not); p3 = 1/2 (abc
        // matches, bcd does not); p4 has zero matches and smooths to 1/2.
        let expected = 100.0
            * libm::exp(
                (libm::log(3.0 / 4.0)
                    + libm::log(2.0 / 3.0)
                    + libm::log(1.0 / 2.0)
                    + libm::log(1.0 / 2.0))
                    / 4.0,
            );
        assert_eq!(bleu(&hyp, &[reference]), expected);
    }

    #[test]
    fn bleu_clips_repeated_ngrams_at_the_reference_count() {
        // Hypothesis repeats one token beyond its reference support.
        let hyp = toks(&["a", "a"]);
        let reference = toks(&["a", "b"]);
        // p1 = min(2, 1) / 2; the single 2-gram "a a" is unmatched.
        let expected =
            100.0 * libm::exp((libm::log(1.0 / 2.0) + libm::log(1.0 / 2.0)) / 2.0);
        assert_eq!(bleu(&hyp, &[reference]), expected);
    }

    #[test]
    fn bleu_takes_the_best_count_across_references() {
        let hyp = toks(&["a", "b"]);
        let r1 = toks(&["a"]);
        let r2 = toks(&["b"]);
        // Unigrams both match via different references; the 2-gram smooths.
        let expected = 100.0 * libm::exp((libm::log(1.0) + libm::log(1.0 / 2.0)) / 2.0);
        assert_eq!(bleu(&hyp, &[r1, r2]), expected);
    }

    #[test]
    fn bleu_applies_the_brevity_penalty_only_when_short() {
        let hyp = toks(&["a", "b"]);
        let reference = toks(&["a", "b", "c", "d"]);
        // Both orders are perfect; only brevity reduces the score.
        let expected = 100.0 * libm::exp(1.0 - 4.0 / 2.0);
        assert_eq!(bleu(&hyp, &[reference]), expected);

        // A hypothesis longer than the reference pays no penalty.
        let long_hyp = toks(&["a", "b", "c"]);
        let short_ref = toks(&["a", "b"]);
        let score = bleu(&long_hyp, &[short_ref]);
        let no_bp = 100.0
            * libm::exp(
                (libm::log(2.0 / 3.0) + libm::log(1.0 / 2.0) + libm::log(1.0 / 2.0)) / 3.0,
            );
        assert_eq!(score, no_bp);
    }

    #[test]
    fn bleu_uses_the_reference_length_closest_to_the_hypothesis() {
        let hyp = toks(&["a", "b", "c"]);
        // Lengths 2 and 7: 2 is closer to 3, so no brevity penalty... the
        // hypothesis (3) is longer than the closest reference (2).
        let r1 = toks(&["a", "b"]);
        let r2 = toks(&["a", "b", "c", "d", "e", "f", "g"]);
        let with_close_short = bleu(&hyp, &[r1.clone(), r2.clone()]);
        // Against only the long reference the penalty applies.
        let with_long_only = bleu(&hyp, &[r2]);
        assert!(with_close_short > with_long_only);
    }

    #[test]
    fn bleu_shorter_than_four_tokens_uses_fewer_orders() {
        let hyp = toks(&["a", "b"]);
        assert_eq!(bleu(&hyp, &[hyp.clone()]), 100.0);
        let single = toks(&["a"]);
        assert_eq!(bleu(&single, &[single.clone()]), 100.0);
    }

    #[test]
    fn bleu_empty_inputs_score_zero() {
        assert_eq!(bleu(&[], &[toks(&["a"])]), 0.0);
        assert_eq!(bleu(&toks(&["a"]), &[]), 0.0);
    }

    #[test]
    fn lcs_exact_matches_hand_computed_cases() {
        assert_eq!(lcs_exact(&toks(&["a", "b", "c"]), &toks(&["a", "c"])), 2);
        assert_eq!(lcs_exact(&toks(&["a", "b"]), &toks(&["b", "a"])), 1);
        assert_eq!(lcs_exact(&toks(&["x"]), &toks(&["y"])), 0);
        assert_eq!(lcs_exact(&[], &toks(&["a"])), 0);
        let seq = toks(&["a", "b", "c", "d"]);
        assert_eq!(lcs_exact(&seq, &seq), 4);
    }

    #[test]
    fn rouge_l_is_the_lcs_f1() {
        let hyp = toks(&["a", "b", "c"]);
        let reference = toks(&["a", "c"]);
        let precision = 2.0 / 3.0;
        let recall = 2.0 / 2.0;
        assert_eq!(
            rouge_l(&hyp, &reference),
            2.0 * precision * recall / (precision + recall) * 100.0
        );
        assert_eq!(rouge_l(&hyp, &hyp), 100.0);
        assert_eq!(rouge_l(&hyp, &toks(&["x", "y"])), 0.0);
        assert_eq!(rouge_l(&[], &reference), 0.0);
    }

    #[test]
    fn meteor_swapped_pair_scores_fifty() {
        assert_eq!(meteor(&toks(&["a", "b"]), &toks(&["b", "a"])), 50.0);
    }

    #[test]
    fn meteor_identical_four_tokens_scores_ninety_nine_and_change() {
        let tokens = toks(&["a", "b", "c", "d"]);
        assert_eq!(meteor(&tokens, &tokens), 99.21875);
    }

    #[test]
    fn meteor_prefers_continuing_the_previous_match() {
        // "a" matches ref position 1; "b" then prefers position 2 over the
        // leftmost occurrence at 0, keeping one chunk.
        let hyp = toks(&["a", "b"]);
        let reference = toks(&["b", "a", "b"]);
        let precision = 2.0 / 2.0;
        let recall = 2.0 / 3.0;
        let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
        let penalty = 0.5 * libm::pow(1.0 / 2.0, 3.0);
        assert_eq!(meteor(&hyp, &reference), f_mean * (1.0 - penalty) * 100.0);
    }

    #[test]
    fn meteor_counts_a_chunk_break_on_either_side() {
        // Matches at hyp 0,2 (not hyp-adjacent) though ref-adjacent: 2 chunks.
        let hyp = toks(&["a", "x", "b"]);
        let reference = toks(&["a", "b"]);
        let precision = 2.0 / 3.0;
        let recall = 2.0 / 2.0;
        let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
        let penalty = 0.5 * libm::pow(2.0 / 2.0, 3.0);
        assert_eq!(meteor(&hyp, &reference), f_mean * (1.0 - penalty) * 100.0);
    }

    #[test]
    fn meteor_no_match_and_empty_inputs_score_zero() {
        assert_eq!(meteor(&toks(&["a"]), &toks(&["b"])), 0.0);
        assert_eq!(meteor(&[], &toks(&["b"])), 0.0);
        assert_eq!(meteor(&toks(&["a"]), &[]), 0.0);
    }

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

    #[test]
    fn lcs_similarity_with_orthogonal_symbols_equals_lcs_exact() {
        let provider = MapProvider::new(&[
            ("p", &[1.0, 0.0, 0.0]),
            ("q", &[0.0, 1.0, 0.0]),
            ("r", &[0.0, 0.0, 1.0]),
        ]);
        let mut cache = EmbeddingCache::new(3, "map-test").unwrap();
        let a = toks(&["p", "q", "r", "p"]);
        let b = toks(&["q", "p", "r"]);
        let soft = lcs_similarity(&a, &b, 1.0, &mut cache, Some(&provider)).unwrap();
        assert_eq!(soft, lcs_exact(&a, &b));
    }

    #[test]
    fn lcs_similarity_counts_near_synonyms_that_exact_matching_misses() {
        let provider = MapProvider::new(&[
            ("ask help", &[1.0, 0.0]),
            ("request help", &[1.0, 0.0]),
            ("say goodbye", &[0.0, 1.0]),
        ]);
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let a = toks(&["ask help", "say goodbye"]);
        let b = toks(&["request help", "say goodbye"]);
        assert_eq!(lcs_exact(&a, &b), 1);
        let soft = lcs_similarity(&a, &b, 0.9, &mut cache, Some(&provider)).unwrap();
        assert_eq!(soft, 2);
    }

    #[test]
    fn lcs_similarity_threshold_is_inclusive() {
        // Identical unit vectors have cosine exactly one, and one is the
        // highest possible threshold, so matching at the boundary proves
        // the comparison admits equality.
        let provider = MapProvider::new(&[("x", &[1.0, 0.0]), ("y", &[1.0, 0.0])]);
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let count =
            lcs_similarity(&toks(&["x"]), &toks(&["y"]), 1.0, &mut cache, Some(&provider))
                .unwrap();
        assert_eq!(count, 1);
    }

    #[test]
    fn lcs_similarity_rejects_non_finite_thresholds() {
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let err = lcs_similarity(&toks(&["x"]), &toks(&["y"]), f64::NAN, &mut cache, None)
            .unwrap_err();
        assert!(matches!(err, MetricsError::InvalidThreshold { .. }));
    }

    #[test]
    fn lcs_similarity_embeds_each_distinct_symbol_once() {
        use core::cell::Cell;

        struct CountingProvider(Cell<usize>);

        impl EmbeddingProvider for CountingProvider {
            fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
                self.0.set(self.0.get() + texts.len());
                Ok(texts.iter().map(|_| vec![1.0, 0.0]).collect())
            }

            fn provider_tag(&self) -> &str {
                "map-test"
            }
        }

        let provider = CountingProvider(Cell::new(0));
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let a = toks(&["s1", "s2", "s1", "s2"]);
        let b = toks(&["s2", "s3"]);
        lcs_similarity(&a, &b, 0.5, &mut cache, Some(&provider)).unwrap();
        assert_eq!(provider.0.get(), 3); // s1, s2, s3
    }

    fn flow_of(steps: &[&str]) -> DialogueFlow {
        DialogueFlow {
            main: DialoguePath {
                nodes: steps.iter().map(|s| s.to_string()).collect(),
                bottleneck: 1,
                total_weight: 1,
            },
            digressions: vec![],
            method_tag: "widest".to_string(),
        }
    }

    fn annotated_conv(id: &str, forms: &[&str]) -> Conversation {
        let turns = forms
            .iter()
            .enumerate()
            .map(|(i, form)| {
                let role = if i % 2 == 0 {
                    SpeakerRole::User
                } else {
                    SpeakerRole::Agent
                };
                Turn::annotated(role, form, form).unwrap()
            })
            .collect();
        Conversation::new(id, turns, None).unwrap()
    }

    #[test]
    fn score_flow_rows_are_sorted_and_averaged() {
        let flow = flow_of(&["user a", "bot b"]);
        let heldout = Corpus::new(vec![
            annotated_conv("z2", &["a", "b"]),
            annotated_conv("a1", &["a", "x"]),
        ])
        .unwrap();
        let provider = MapProvider::new(&[
            ("user a", &[1.0, 0.0]),
            ("bot b", &[0.0, 1.0]),
            ("bot x", &[0.0, 1.0]),
        ]);
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        let result = score_flow(&flow, &heldout, 1.0, &mut cache, Some(&provider)).unwrap();
        let ids: Vec<&str> = result
            .per_conversation
            .iter()
            .map(|r| r.conversation_id.as_str())
            .collect();
        assert_eq!(ids, ["a1", "z2"]);
        // z2 reproduces the flow exactly.
        assert_eq!(result.per_conversation[1].bleu, 100.0);
        assert_eq!(result.per_conversation[1].rouge_l, 100.0);
        assert_eq!(result.per_conversation[1].lcs_exact, 2);
        assert_eq!(
            result.summary.mean_bleu,
            (result.per_conversation[0].bleu + result.per_conversation[1].bleu) / 2.0
        );
        assert_eq!(
            result.summary.mean_lcs_exact,
            (result.per_conversation[0].lcs_exact as f64
                + result.per_conversation[1].lcs_exact as f64)
                / 2.0
        );
    }

    #[test]
    fn score_flow_requires_a_non_empty_annotated_corpus() {
        let flow = flow_of(&["user a"]);
        let empty = Corpus::new(vec![]).unwrap();
        let mut cache = EmbeddingCache::new(2, "map-test").unwrap();
        assert_eq!(
            score_flow(&flow, &empty, 1.0, &mut cache, None),
            Err(MetricsError::EmptyCorpus)
        );

        let unannotated = Corpus::new(vec![Conversation::new(
            "c1",
            vec![Turn::new(SpeakerRole::User, "hi").unwrap()],
            None,
        )
        .unwrap()])
        .unwrap();
        let err = score_flow(&flow, &unannotated, 1.0, &mut cache, None).unwrap_err();
        assert!(matches!(err, MetricsError::Unannotated(_)));
    }

    fn four_step_flow() -> DialogueFlow {
        flow_of(&["user a", "bot b", "user c", "bot d"])
    }

    fn five_turn_corpus() -> Corpus {
        Corpus::new(vec![annotated_conv("c1", &["a", "b", "c", "d", "e"])]).unwrap()
    }

    #[test]
    fn alignment_micro_scores_match_the_worked_example() {
        // Four flow steps against one five-turn conversation: three fully
        // relevant matches and one half-relevant match.
        let alignments = vec![ConversationAlignment {
            conversation_id: "c1".to_string(),
            entries: vec![
                StepAlignment {
                    step_index: 0,
                    turn_index: Some(0),
                    relevance: Relevance::One,
                },
                StepAlignment {
                    step_index: 1,
                    turn_index: Some(1),
                    relevance: Relevance::One,
                },
                StepAlignment {
                    step_index: 2,
                    turn_index: Some(2),
                    relevance: Relevance::One,
                },
                StepAlignment {
                    step_index: 3,
                    turn_index: Some(3),
                    relevance: Relevance::Half,
                },
            ],
        }];
        let report =
            evaluate_alignments(&four_step_flow(), &alignments, &five_turn_corpus()).unwrap();
        assert_eq!(report.overall.precision, 3.5 / 4.0 * 100.0);
        assert_eq!(report.overall.precision, 87.5);
        assert_eq!(report.overall.recall, 3.5 / 5.0 * 100.0);
        // User steps 0 and 2 earn 2.0 of 2 slots; user turns: indices 0, 2, 4.
        assert_eq!(report.user.precision, 2.0 / 2.0 * 100.0);
        assert_eq!(report.user.recall, 2.0 / 3.0 * 100.0);
        // Bot steps 1 and 3 earn 1.5 of 2 slots; agent turns: indices 1, 3.
        assert_eq!(report.bot.precision, 1.5 / 2.0 * 100.0);
        assert_eq!(report.bot.recall, 1.5 / 2.0 * 100.0);
        assert_eq!(report.per_conversation.len(), 1);
        assert_eq!(report.per_conversation[0].scores.precision, 87.5);
    }

    #[test]
    fn unaligned_conversations_keep_their_denominators() {
        let heldout = Corpus::new(vec![
            annotated_conv("c1", &["a", "b"]),
            annotated_conv("c2", &["a", "b"]),
        ])
        .unwrap();
        let flow = flow_of(&["user a", "bot b"]);
        let alignments = vec![ConversationAlignment {
            conversation_id: "c1".to_string(),
            entries: vec![
                StepAlignment {
                    step_index: 0,
                    turn_index: Some(0),
                    relevance: Relevance::One,
                },
                StepAlignment {
                    step_index: 1,
                    turn_index: Some(1),
                    relevance: Relevance::One,
                },
            ],
        }];
        let report = evaluate_alignments(&flow, &alignments, &heldout).unwrap();
        // Two credits over 2 steps x 2 conversations, and over 4 turns.
        assert_eq!(report.overall.precision, 2.0 / 4.0 * 100.0);
        assert_eq!(report.overall.recall, 2.0 / 4.0 * 100.0);
        assert_eq!(report.per_conversation[1].scores.precision, 0.0);
        assert_eq!(report.per_conversation[1].scores.recall, 0.0);
    }

    #[test]
    fn null_turn_alignments_carry_no_relevance() {
        let alignments = vec![ConversationAlignment {
            conversation_id: "c1".to_string(),
            entries: vec![StepAlignment {
                step_index: 0,
                turn_index: None,
                relevance: Relevance::Half,
            }],
        }];
        let err = evaluate_alignments(&four_step_flow(), &alignments, &five_turn_corpus())
            .unwrap_err();
        assert_eq!(
            err,
            AlignmentError::NullTurnWithRelevance {
                id: "c1".to_string(),
                step_index: 0
            }
        );

        // A zero-relevance null turn is fine.
        let ok = vec![ConversationAlignment {
            conversation_id: "c1".to_string(),
            entries: vec![StepAlignment {
                step_index: 0,
                turn_index: None,
                relevance: Relevance::Zero,
            }],
        }];
        assert!(evaluate_alignments(&four_step_flow(), &ok, &five_turn_corpus()).is_ok());
    }

    #[test]
    fn alignment_validation_rejects_bad_indices_and_duplicates() {
        let flow = four_step_flow();
        let heldout = five_turn_corpus();
        let entry = |step, turn, relevance| StepAlignment {
            step_index: step,
            turn_index: turn,
            relevance,
        };
        let with = |entries| {
            vec![ConversationAlignment {
                conversation_id: "c1".to_string(),
                entries,
            }]
        };

        let err = evaluate_alignments(
            &flow,
            &with(vec![entry(4, Some(0), Relevance::One)]),
            &heldout,
        )
        .unwrap_err();
        assert!(matches!(err, AlignmentError::StepOutOfRange { step_index: 4, .. }));

        let err = evaluate_alignments(
            &flow,
            &with(vec![entry(0, Some(5), Relevance::One)]),
            &heldout,
        )
        .unwrap_err();
        assert!(matches!(err, AlignmentError::TurnOutOfRange { turn_index: 5, .. }));

        let err = evaluate_alignments(
            &flow,
            &with(vec![
                entry(0, Some(0), Relevance::One),
                entry(0, Some(1), Relevance::One),
            ]),
            &heldout,
        )
        .unwrap_err();
        assert!(matches!(err, AlignmentError::DuplicateStep { step_index: 0, .. }));

        let err = evaluate_alignments(
            &flow,
            &with(vec![
                entry(0, Some(1), Relevance::One),
                entry(1, Some(1), Relevance::One),
            ]),
            &heldout,
        )
        .unwrap_err();
        assert!(matches!(err, AlignmentError::DuplicateTurn { turn_index: 1, .. }));

        let err = evaluate_alignments(
            &flow,
            &[ConversationAlignment {
                conversation_id: "zz".to_string(),
                entries: vec![],
            }],
            &heldout,
        )
        .unwrap_err();
        assert!(matches!(err, AlignmentError::UnknownConversation { .. }));

        let err = evaluate_alignments(
            &flow,
            &[
                ConversationAlignment {
                    conversation_id: "c1".to_string(),
                    entries: vec![],
                },
                ConversationAlignment {
                    conversation_id: "c1".to_string(),
                    entries: vec![],
                },
            ],
            &heldout,
        )
        .unwrap_err();
        assert!(matches!(err, AlignmentError::DuplicateConversation { .. }));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn token_seq() -> impl Strategy<Value = Vec<String>> {
            proptest::collection::vec(
                proptest::sample::select(&["a", "b", "c", "d", "e"][..])
                    .prop_map(|s| s.to_string()),
                0..10,
            )
        }

        proptest! {
            #[test]
            fn scores_stay_within_percentage_bounds(
                hyp in token_seq(),
                reference in token_seq(),
            ) {
                for score in [
                    bleu(&hyp, core::slice::from_ref(&reference)),
                    rouge_l(&hyp, &reference),
                    meteor(&hyp, &reference),
                ] {
                    prop_assert!((0.0..=100.0 + 1e-9).contains(&score));
                }
            }

            #[test]
            fn lcs_exact_is_symmetric_and_bounded(
                a in token_seq(),
                b in token_seq(),
            ) {
                let forward = lcs_exact(&a, &b);
                prop_assert_eq!(forward, lcs_exact(&b, &a));
                prop_assert!(forward <= core::cmp::min(a.len(), b.len()));
                prop_assert_eq!(lcs_exact(&a, &a), a.len());
            }

            #[test]
            fn identical_nonempty_sequences_score_perfect_bleu_and_rouge(
                a in token_seq().prop_filter("non-empty", |v| !v.is_empty()),
            ) {
                prop_assert_eq!(bleu(&a, core::slice::from_ref(&a)), 100.0);
                prop_assert_eq!(rouge_l(&a, &a), 100.0);
            }
        }
    }
}
