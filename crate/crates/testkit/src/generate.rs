//! Random instances for property and equivalence testing.

use flowmine_core::graph::InteractionGraph;
use rand::Rng;
use std::collections::{HashSet, VecDeque};

/// Stable node name for index `i` ("n00", "n01", ...).
pub fn node_name(i: usize) -> String {
    format!("n{i:02}")
}

/// A random directed graph over `min_nodes..=max_nodes` nodes.
///
/// Every ordered pair of distinct nodes carries an edge with
/// `edge_probability`, weighted uniformly in `1..=max_weight`. Nodes are
/// named by [`node_name`], so node `n00` always exists.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    min_nodes: usize,
    max_nodes: usize,
    edge_probability: f64,
    max_weight: u64,
) -> InteractionGraph {
    let n = rng.gen_range(min_nodes..=max_nodes);
    let mut graph = InteractionGraph::new();
    for i in 0..n {
        graph.add_node(&node_name(i));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(edge_probability) {
                let w = rng.gen_range(1..=max_weight);
                graph
                    .add_edge(&node_name(i), &node_name(j), w)
                    .expect("generated weights are positive");
            }
        }
    }
    graph
}

/// Whether `target` can be reached from `source` along directed edges.
pub fn is_reachable(graph: &InteractionGraph, source: &str, target: &str) -> bool {
    if !graph.contains_node(source) || !graph.contains_node(target) {
        return false;
    }
    if source == target {
        return true;
    }
    let mut seen: HashSet<String> = HashSet::from([source.to_string()]);
    let mut queue: VecDeque<String> = VecDeque::from([source.to_string()]);
    while let Some(node) = queue.pop_front() {
        for (next, _) in graph.out_neighbors(&node) {
            if next == target {
                return true;
            }
            if seen.insert(next.to_string()) {
                queue.push_back(next.to_string());
            }
        }
    }
    false
}

/// A random token sequence of length `0..=max_len` drawn from `vocab`.
pub fn random_tokens<R: Rng>(rng: &mut R, vocab: &[&str], max_len: usize) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
        .collect()
}
