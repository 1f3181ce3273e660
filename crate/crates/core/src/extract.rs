//! Path extraction over the interaction graph.
//!
//! The main policy is the *widest* source-to-target path: the one whose
//! weakest edge is as strong as possible, i.e. the route supported by the
//! most conversations at its thinnest point. Two baselines — the longest
//! simple path and the maximum-total-weight simple path — share the same
//! exhaustive search core. Digression detection then inspects the chosen
//! main path for off-path branches that express a different intent and
//! rejoin the target along a dissimilar route.
//!
//! All searches enumerate simple paths only, ignore self-loops, and take an
//! explicit node-count bound; exceeding the bound aborts the search with an
//! error rather than silently returning a truncated answer.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Reverse;
use thiserror::Error;

use crate::embedding::{
    cosine_similarity, embed, EmbeddingCache, EmbeddingError, EmbeddingProvider,
};
use crate::graph::InteractionGraph;

/// Errors from path search and digression detection.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    /// An endpoint is not a node of the graph.
    #[error("node {node:?} is not in the graph")]
    UnknownNode {
        /// The missing node.
        node: String,
    },
    /// No simple path connects the endpoints.
    #[error("no path from {from:?} to {to:?}")]
    NoPath {
        /// Requested source node.
        from: String,
        /// Requested target node.
        to: String,
    },
    /// The search found a path with more than `bound` nodes and gave up.
    #[error("path search exceeded the bound of {bound} nodes")]
    SearchBound {
        /// The configured node-count limit.
        bound: usize,
    },
    /// Embedding lookups failed during digression detection.
    #[error("embedding failure: {0}")]
    Embedding(#[from] EmbeddingError),
}

/// A simple path through the graph with its weight summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialoguePath {
    /// Node sequence from source to target inclusive.
    pub nodes: Vec<String>,
    /// Minimum edge weight along the path; `u64::MAX` for a zero-edge path.
    pub bottleneck: u64,
    /// Sum of edge weights along the path.
    pub total_weight: u64,
}

/// A kept digression: an off-path branch that rejoins the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Digression {
    /// Main-path node the branch leaves from.
    pub branch_from: String,
    /// First node of the branch.
    pub branch_head: String,
    /// Widest path from the branch head to the target.
    pub path: DialoguePath,
    /// Cosine similarity between the expected next step and the branch head.
    pub candidate_similarity: f64,
    /// Cosine similarity between the remaining main path and the branch path.
    pub path_similarity: f64,
}

/// A branch that looked like a digression but cannot reach the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnreachableBranch {
    /// Main-path node the branch leaves from.
    pub branch_from: String,
    /// First node of the branch.
    pub branch_head: String,
}

/// Result of scanning a main path for digressions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DigressionScan {
    /// Kept digressions, strongest first.
    pub digressions: Vec<Digression>,
    /// Branches that passed the candidate test but cannot rejoin the target.
    pub unreachable: Vec<UnreachableBranch>,
}

/// A complete mined flow: the main path plus its kept digressions.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueFlow {
    /// The main source-to-target path.
    pub main: DialoguePath,
    /// Digressions branching off the main path, strongest first.
    pub digressions: Vec<Digression>,
    /// Which extraction method produced the main path.
    pub method_tag: String,
}

impl DialogueFlow {
    /// The flow flattened to its step sequence: the main path's nodes, then
    /// for each digression its branch point followed by the branch path.
    pub fn step_sequence(&self) -> Vec<String> {
        let mut steps = self.main.nodes.clone();
        for digression in &self.digressions {
            steps.push(digression.branch_from.clone());
            steps.extend(digression.path.nodes.iter().cloned());
        }
        steps
    }

    /// The step sequence flattened to lowercase whitespace tokens.
    pub fn token_sequence(&self) -> Vec<String> {
        self.step_sequence()
            .iter()
            .flat_map(|s| s.split_whitespace())
            .map(|t| t.to_lowercase())
            .collect()
    }
}

/// A candidate path during search: nodes, bottleneck, and total weight.
type Candidate = (Vec<String>, u64, u64);

fn check_endpoints(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
) -> Result<(), ExtractError> {
    for node in [source, target] {
        if !graph.contains_node(node) {
            return Err(ExtractError::UnknownNode {
                node: node.to_string(),
            });
        }
    }
    Ok(())
}

fn zero_edge_path(node: &str) -> DialoguePath {
    DialoguePath {
        nodes: alloc::vec![node.to_string()],
        bottleneck: u64::MAX,
        total_weight: 0,
    }
}

fn no_path(source: &str, target: &str) -> ExtractError {
    ExtractError::NoPath {
        from: source.to_string(),
        to: target.to_string(),
    }
}

/// Exhaustively enumerates simple `source -> target` paths over edges of
/// weight at least `min_edge`, keeping the candidate whose `prefer` key is
/// smallest.
///
/// Paths never revisit a node, self-loops are skipped, and reaching the
/// target ends a path (a simple path cannot leave the target and produce a
/// second candidate). Any path growing beyond `bound` nodes aborts the whole
/// search, so a returned answer is always exact. Neighbor expansion follows
/// the graph's lexicographic edge order, making the traversal — and with it
/// any tie-breaking inside equal keys — fully deterministic.
fn enumerate_paths<K: Ord>(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
    min_edge: u64,
    bound: usize,
    prefer: impl Fn(&Candidate) -> K,
) -> Result<Option<Candidate>, ExtractError> {
    if bound < 1 {
        return Err(ExtractError::SearchBound { bound });
    }
    if source == target {
        let path = zero_edge_path(source);
        return Ok(Some((path.nodes, path.bottleneck, path.total_weight)));
    }

    let neighbors_of = |node: &str| -> Vec<(String, u64)> {
        graph
            .out_neighbors(node)
            .filter(|(to, w)| *to != node && *w >= min_edge)
            .map(|(to, w)| (to.to_string(), w))
            .collect()
    };

    struct Frame {
        neighbors: Vec<(String, u64)>,
        next: usize,
    }

    let mut stack = alloc::vec![Frame {
        neighbors: neighbors_of(source),
        next: 0,
    }];
    let mut path: Vec<String> = alloc::vec![source.to_string()];
    let mut edge_weights: Vec<u64> = Vec::new();
    let mut on_path: BTreeSet<String> = BTreeSet::new();
    on_path.insert(source.to_string());
    let mut best: Option<(K, Candidate)> = None;

    while let Some(frame) = stack.last_mut() {
        if frame.next >= frame.neighbors.len() {
            stack.pop();
            let node = path.pop().expect("path and stack stay in lockstep");
            on_path.remove(&node);
            edge_weights.pop();
            continue;
        }
        let (next_node, weight) = frame.neighbors[frame.next].clone();
        frame.next += 1;
        if on_path.contains(&next_node) {
            continue;
        }
        if path.len() + 1 > bound {
            return Err(ExtractError::SearchBound { bound });
        }
        if next_node == target {
            let mut nodes = path.clone();
            nodes.push(next_node);
            let bottleneck = edge_weights
                .iter()
                .copied()
                .chain(core::iter::once(weight))
                .min()
                .expect("at least one edge");
            let total: u64 = edge_weights
                .iter()
                .copied()
                .chain(core::iter::once(weight))
                .sum();
            let candidate = (nodes, bottleneck, total);
            let key = prefer(&candidate);
            match &best {
                Some((best_key, _)) if *best_key <= key => {}
                _ => best = Some((key, candidate)),
            }
            continue;
        }
        on_path.insert(next_node.clone());
        path.push(next_node.clone());
        edge_weights.push(weight);
        stack.push(Frame {
            neighbors: neighbors_of(&next_node),
            next: 0,
        });
    }

    Ok(best.map(|(_, candidate)| candidate))
}

/// Maximum achievable bottleneck from `source` to every node, by iterating
/// max-min relaxation to a fixpoint. Unreached nodes stay at width zero;
/// the source itself has unbounded width.
fn widest_widths(graph: &InteractionGraph, source: &str) -> BTreeMap<String, u64> {
    let mut width: BTreeMap<String, u64> =
        graph.nodes().map(|n| (n.to_string(), 0)).collect();
    width.insert(source.to_string(), u64::MAX);
    let mut changed = true;
    while changed {
        changed = false;
        for (from, to, weight) in graph.edges() {
            if from == to {
                continue;
            }
            let from_width = width[from];
            if from_width == 0 {
                continue;
            }
            let candidate = core::cmp::min(from_width, weight);
            if candidate > width[to] {
                width.insert(to.to_string(), candidate);
                changed = true;
            }
        }
    }
    width
}

/// Finds the widest (maximum-bottleneck) simple path from `source` to
/// `target`.
///
/// Among all paths achieving the maximal bottleneck, ties prefer the larger
/// total weight, then the fewer nodes, then the lexicographically smallest
/// node sequence. Asking for a path from a node to itself yields the
/// single-node path with unbounded bottleneck and zero total weight.
pub fn widest_path(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
    bound: usize,
) -> Result<DialoguePath, ExtractError> {
    check_endpoints(graph, source, target)?;
    if source == target {
        if bound < 1 {
            return Err(ExtractError::SearchBound { bound });
        }
        return Ok(zero_edge_path(source));
    }
    let widths = widest_widths(graph, source);
    let best_bottleneck = widths[target];
    if best_bottleneck == 0 {
        return Err(no_path(source, target));
    }
    // Every source-to-target path over edges of weight >= best_bottleneck
    // has exactly that bottleneck (a larger one would contradict the
    // maximality of best_bottleneck), so the restricted search only has to
    // rank the tied optima.
    let found = enumerate_paths(graph, source, target, best_bottleneck, bound, |c| {
        (Reverse(c.2), c.0.len(), c.0.clone())
    })?;
    found
        .map(into_path)
        .ok_or_else(|| no_path(source, target))
}

/// Finds the simple path with the most nodes from `source` to `target`.
///
/// Ties prefer the larger total weight, then the lexicographically smallest
/// node sequence.
pub fn longest_path(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
    bound: usize,
) -> Result<DialoguePath, ExtractError> {
    check_endpoints(graph, source, target)?;
    let found = enumerate_paths(graph, source, target, 1, bound, |c| {
        (Reverse(c.0.len()), Reverse(c.2), c.0.clone())
    })?;
    found
        .map(into_path)
        .ok_or_else(|| no_path(source, target))
}

/// Finds the simple path with the greatest total weight from `source` to
/// `target`.
///
/// Ties prefer the fewer nodes, then the lexicographically smallest node
/// sequence.
pub fn max_weight_path(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
    bound: usize,
) -> Result<DialoguePath, ExtractError> {
    check_endpoints(graph, source, target)?;
    let found = enumerate_paths(graph, source, target, 1, bound, |c| {
        (Reverse(c.2), c.0.len(), c.0.clone())
    })?;
    found
        .map(into_path)
        .ok_or_else(|| no_path(source, target))
}

fn into_path(candidate: Candidate) -> DialoguePath {
    DialoguePath {
        nodes: candidate.0,
        bottleneck: candidate.1,
        total_weight: candidate.2,
    }
}

/// Scans a main path for digressions.
///
/// For each main node `n_i` except the last, every out-neighbor `n_j` other
/// than `n_i` itself and the expected next step `n_{i+1}` is a branch. When
/// the cosine similarity between `n_{i+1}` and `n_j` falls below `epsilon`,
/// the branch expresses a different intent and becomes a candidate. The
/// candidate's path is the widest path from `n_j` to the main path's target;
/// if none exists the branch is reported as unreachable. Otherwise the
/// candidate is kept when the similarity between the remaining main path
/// (from `n_{i+1}` to the target, space-joined) and the branch path
/// (space-joined) also falls below `kappa` — near-duplicate routes are
/// dropped.
///
/// Kept digressions sort by bottleneck (descending), then path similarity
/// (ascending, most distinct first), then branch head and branch point
/// (each lexicographic).
pub fn detect_digressions(
    graph: &InteractionGraph,
    main: &DialoguePath,
    epsilon: f64,
    kappa: f64,
    bound: usize,
    cache: &mut EmbeddingCache,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<DigressionScan, ExtractError> {
    let mut scan = DigressionScan::default();
    let Some(target) = main.nodes.last() else {
        return Ok(scan);
    };
    for (i, branch_from) in main.nodes.iter().enumerate() {
        if i + 1 >= main.nodes.len() {
            break;
        }
        let expected_next = &main.nodes[i + 1];
        let heads: Vec<String> = graph
            .out_neighbors(branch_from)
            .map(|(to, _)| to.to_string())
            .collect();
        for branch_head in heads {
            if branch_head == *expected_next || branch_head == *branch_from {
                continue;
            }
            // The cache makes the repeated lookups across heads cheap.
            let expected_embedding = embed(expected_next, cache, provider)?;
            let head_embedding = embed(&branch_head, cache, provider)?;
            let candidate_similarity =
                cosine_similarity(&expected_embedding, &head_embedding)?;
            if candidate_similarity >= epsilon {
                continue;
            }
            let fragment = match widest_path(graph, &branch_head, target, bound) {
                Ok(path) => path,
                Err(ExtractError::NoPath { .. }) => {
                    scan.unreachable.push(UnreachableBranch {
                        branch_from: branch_from.clone(),
                        branch_head,
                    });
                    continue;
                }
                Err(other) => return Err(other),
            };
            let main_rest = main.nodes[i + 1..].join(" ");
            let branch_text = fragment.nodes.join(" ");
            let main_embedding = embed(&main_rest, cache, provider)?;
            let branch_embedding = embed(&branch_text, cache, provider)?;
            let path_similarity = cosine_similarity(&main_embedding, &branch_embedding)?;
            if path_similarity >= kappa {
                continue;
            }
            scan.digressions.push(Digression {
                branch_from: branch_from.clone(),
                branch_head,
                path: fragment,
                candidate_similarity,
                path_similarity,
            });
        }
    }
    scan.digressions.sort_by(|a, b| {
        b.path
            .bottleneck
            .cmp(&a.path.bottleneck)
            .then_with(|| a.path_similarity.total_cmp(&b.path_similarity))
            .then_with(|| a.branch_head.cmp(&b.branch_head))
            .then_with(|| a.branch_from.cmp(&b.branch_from))
    });
    Ok(scan)
}
