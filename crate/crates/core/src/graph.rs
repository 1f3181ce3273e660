//! The weighted directed interaction graph over canonical-form nodes.
//!
//! Each conversation contributes a linear chain of role-prefixed canonical
//! forms; building the graph merges all chains, counting how often each
//! form-to-form transition was observed (edge weights) and how often each
//! form opened or closed a conversation (endpoint counts). All state lives in
//! B-tree collections, so iteration — and everything derived from it, DOT
//! export included — is deterministic and independent of insertion order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::extract::DialogueFlow;

/// Errors from graph construction, endpoint selection, and export.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    /// An edge was given a zero weight.
    #[error("edge {from:?} -> {to:?} must have weight >= 1")]
    InvalidWeight {
        /// Edge source.
        from: String,
        /// Edge target.
        to: String,
    },
    /// The corpus contained an unannotated turn.
    #[error("corpus is not fully annotated: {0}")]
    Unannotated(#[from] CorpusError),
    /// The graph holds no conversations' worth of data.
    #[error("graph is empty")]
    EmptyGraph,
    /// A highlight path referenced a node the graph does not contain.
    #[error("highlighted flow references foreign node {node:?}")]
    ForeignNode {
        /// The node missing from the graph.
        node: String,
    },
}

/// Weighted directed graph of canonical-form transitions.
///
/// Node identity is the exact role-prefixed canonical-form string; no
/// further canonicalization is applied. Self-loops (from merged same-form
/// consecutive turns) are representable and retained — traversal algorithms
/// skip them, since a simple path can never use one.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InteractionGraph {
    nodes: BTreeSet<String>,
    edges: BTreeMap<String, BTreeMap<String, u64>>,
    first_turn_counts: BTreeMap<String, u64>,
    last_turn_counts: BTreeMap<String, u64>,
}

impl InteractionGraph {
    /// Creates an empty graph.
    pub fn new() -> Self {
        InteractionGraph::default()
    }

    /// Inserts a node (idempotent).
    pub fn add_node(&mut self, node: &str) {
        self.nodes.insert(node.to_string());
    }

    /// Sets the weight of the `from -> to` edge, inserting both endpoints.
    ///
    /// Weights count observed transitions and must be at least 1.
    pub fn add_edge(&mut self, from: &str, to: &str, weight: u64) -> Result<(), GraphError> {
        if weight == 0 {
            return Err(GraphError::InvalidWeight {
                from: from.to_string(),
                to: to.to_string(),
            });
        }
        self.add_node(from);
        self.add_node(to);
        self.edges
            .entry(from.to_string())
            .or_default()
            .insert(to.to_string(), weight);
        Ok(())
    }

    fn bump_edge(&mut self, from: &str, to: &str) {
        self.add_node(from);
        self.add_node(to);
        *self
            .edges
            .entry(from.to_string())
            .or_default()
            .entry(to.to_string())
            .or_insert(0) += 1;
    }

    /// Records that a conversation opened on `first` and closed on `last`.
    pub fn record_endpoints(&mut self, first: &str, last: &str) {
        self.add_node(first);
        self.add_node(last);
        *self.first_turn_counts.entry(first.to_string()).or_insert(0) += 1;
        *self.last_turn_counts.entry(last.to_string()).or_insert(0) += 1;
    }

    /// All nodes in lexicographic order.
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    /// Whether `node` is present.
    pub fn contains_node(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Weight of the `from -> to` edge, if present.
    pub fn edge_weight(&self, from: &str, to: &str) -> Option<u64> {
        self.edges.get(from)?.get(to).copied()
    }

    /// Out-neighbors of `from` with weights, in lexicographic order.
    pub fn out_neighbors(&self, from: &str) -> impl Iterator<Item = (&str, u64)> {
        self.edges
            .get(from)
            .into_iter()
            .flat_map(|m| m.iter().map(|(to, w)| (to.as_str(), *w)))
    }

    /// All edges as `(from, to, weight)`, sorted by `(from, to)`.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.edges.iter().flat_map(|(from, tos)| {
            tos.iter().map(move |(to, w)| (from.as_str(), to.as_str(), *w))
        })
    }

    /// Number of distinct edges.
    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeMap::len).sum()
    }

    /// Sum of all edge weights (total observed transitions).
    pub fn total_edge_weight(&self) -> u64 {
        self.edges
            .values()
            .flat_map(BTreeMap::values)
            .sum()
    }

    /// How often each form opened a conversation.
    pub fn first_turn_counts(&self) -> &BTreeMap<String, u64> {
        &self.first_turn_counts
    }

    /// How often each form closed a conversation.
    pub fn last_turn_counts(&self) -> &BTreeMap<String, u64> {
        &self.last_turn_counts
    }
}

/// Builds the interaction graph from a fully annotated corpus.
///
/// For each conversation with role-prefixed forms `[f1..fm]`, every
/// transition `(f_i, f_{i+1})` increments its edge weight by one, and the
/// first/last counts of `f1`/`fm` each increment by one. Construction is
/// order-independent: permuting the conversations yields an identical graph.
pub fn build_graph(corpus: &Corpus) -> Result<InteractionGraph, GraphError> {
    let mut graph = InteractionGraph::new();
    for conv in corpus.conversations() {
        let forms = conv.canonical_sequence()?;
        for window in forms.windows(2) {
            graph.bump_edge(&window[0], &window[1]);
        }
        let first = forms.first().expect("conversations always have turns");
        let last = forms.last().expect("conversations always have turns");
        graph.record_endpoints(first, last);
    }
    Ok(graph)
}

/// The extraction endpoints: most frequent opening and closing forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    /// Node with maximal first-turn count (ties: lexicographically least).
    pub source: String,
    /// Node with maximal last-turn count (ties: lexicographically least).
    pub target: String,
}

fn argmax_count(counts: &BTreeMap<String, u64>) -> Option<String> {
    let mut best: Option<(&String, u64)> = None;
    for (node, &count) in counts {
        // Strict comparison keeps the lexicographically smallest key on ties,
        // because BTreeMap iterates in ascending key order.
        match best {
            Some((_, best_count)) if count <= best_count => {}
            _ => best = Some((node, count)),
        }
    }
    best.map(|(node, _)| node.clone())
}

/// Picks the source/target pair for path extraction.
///
/// Source is the argmax of first-turn counts, target the argmax of last-turn
/// counts; ties break lexicographically.
pub fn select_endpoints(graph: &InteractionGraph) -> Result<Endpoints, GraphError> {
    let source = argmax_count(&graph.first_turn_counts).ok_or(GraphError::EmptyGraph)?;
    let target = argmax_count(&graph.last_turn_counts).ok_or(GraphError::EmptyGraph)?;
    Ok(Endpoints { source, target })
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            _ => out.push(c),
        }
    }
    out
}

/// Edge classes used to style a highlighted flow in DOT output.
#[derive(Clone, Copy, PartialEq, Eq)]
enum EdgeClass {
    Plain,
    Main,
    Digression,
}

/// Renders the graph as deterministic Graphviz DOT text.
///
/// Nodes are emitted sorted lexicographically and edges sorted by
/// `(from, to)`, labeled with their weights. When a flow is supplied, its
/// main-path edges and each digression's branch and fragment edges are
/// styled distinctly. Fails if the flow references a node the graph lacks.
pub fn export_dot(
    graph: &InteractionGraph,
    highlight: Option<&DialogueFlow>,
) -> Result<String, GraphError> {
    let mut classes: BTreeMap<(String, String), EdgeClass> = BTreeMap::new();
    if let Some(flow) = highlight {
        let check = |node: &str| -> Result<(), GraphError> {
            if graph.contains_node(node) {
                Ok(())
            } else {
                Err(GraphError::ForeignNode {
                    node: node.to_string(),
                })
            }
        };
        for node in &flow.main.nodes {
            check(node)?;
        }
        for pair in flow.main.nodes.windows(2) {
            classes.insert((pair[0].clone(), pair[1].clone()), EdgeClass::Main);
        }
        for digression in &flow.digressions {
            check(&digression.branch_from)?;
            check(&digression.branch_head)?;
            for node in &digression.path.nodes {
                check(node)?;
            }
            classes
                .entry((
                    digression.branch_from.clone(),
                    digression.branch_head.clone(),
                ))
                .or_insert(EdgeClass::Digression);
            for pair in digression.path.nodes.windows(2) {
                classes
                    .entry((pair[0].clone(), pair[1].clone()))
                    .or_insert(EdgeClass::Digression);
            }
        }
    }

    let mut out = String::new();
    out.push_str("digraph interaction_graph {\n");
    out.push_str("  rankdir=LR;\n");
    for node in &graph.nodes {
        out.push_str("  \"");
        out.push_str(&dot_escape(node));
        out.push_str("\";\n");
    }
    for (from, to, weight) in graph.edges() {
        let class = classes
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(EdgeClass::Plain);
        let style = match class {
            EdgeClass::Plain => String::new(),
            EdgeClass::Main => ", color=\"crimson\", penwidth=\"2.0\"".to_string(),
            EdgeClass::Digression => {
                ", color=\"darkorange\", style=\"dashed\"".to_string()
            }
        };
        out.push_str(&alloc::format!(
            "  \"{}\" -> \"{}\" [label=\"{}\"{}];\n",
            dot_escape(from),
            dot_escape(to),
            weight,
            style
        ));
    }
    out.push_str("}\n");
    Ok(out)
}
