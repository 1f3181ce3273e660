//! Exhaustive path oracle.
//!
//! Enumerates every simple path between two nodes by plain recursion and
//! ranks the results with explicit comparators. The search under test must
//! agree with these answers exactly, tie-breaks included.

use flowmine_core::graph::InteractionGraph;
use std::collections::HashSet;

/// A fully measured simple path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OraclePath {
    /// Visited nodes, source first.
    pub nodes: Vec<String>,
    /// Minimum edge weight; `u64::MAX` for a zero-edge path.
    pub bottleneck: u64,
    /// Sum of edge weights.
    pub total: u64,
}

fn measure(graph: &InteractionGraph, nodes: &[String]) -> OraclePath {
    let mut bottleneck = u64::MAX;
    let mut total = 0u64;
    for pair in nodes.windows(2) {
        let w = graph
            .edge_weight(&pair[0], &pair[1])
            .expect("every consecutive pair on an enumerated path is an edge");
        bottleneck = bottleneck.min(w);
        total += w;
    }
    OraclePath {
        nodes: nodes.to_vec(),
        bottleneck,
        total,
    }
}

fn walk(
    graph: &InteractionGraph,
    target: &str,
    current: &mut Vec<String>,
    visited: &mut HashSet<String>,
    out: &mut Vec<OraclePath>,
) {
    let last = current.last().expect("walk starts from the source").clone();
    if last == target {
        out.push(measure(graph, current));
        return;
    }
    let nexts: Vec<String> = graph
        .out_neighbors(&last)
        .map(|(to, _)| to.to_string())
        .collect();
    for next in nexts {
        if visited.contains(&next) {
            continue;
        }
        visited.insert(next.clone());
        current.push(next.clone());
        walk(graph, target, current, visited, out);
        current.pop();
        visited.remove(&next);
    }
}

/// Every simple path from `source` to `target`, in discovery order.
///
/// A path from a node to itself is the single zero-edge path. Unknown
/// endpoints yield no paths.
pub fn all_simple_paths(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
) -> Vec<OraclePath> {
    if !graph.contains_node(source) || !graph.contains_node(target) {
        return Vec::new();
    }
    if source == target {
        return vec![OraclePath {
            nodes: vec![source.to_string()],
            bottleneck: u64::MAX,
            total: 0,
        }];
    }
    let mut out = Vec::new();
    let mut current = vec![source.to_string()];
    let mut visited: HashSet<String> = HashSet::from([source.to_string()]);
    walk(graph, target, &mut current, &mut visited, &mut out);
    out
}

/// Best path by bottleneck (descending), then total weight (descending),
/// then node count (ascending), then node sequence (lexicographic).
pub fn oracle_widest(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
) -> Option<OraclePath> {
    all_simple_paths(graph, source, target).into_iter().min_by(|a, b| {
        b.bottleneck
            .cmp(&a.bottleneck)
            .then(b.total.cmp(&a.total))
            .then(a.nodes.len().cmp(&b.nodes.len()))
            .then(a.nodes.cmp(&b.nodes))
    })
}

/// Best path by node count (descending), then total weight (descending),
/// then node sequence (lexicographic).
pub fn oracle_longest(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
) -> Option<OraclePath> {
    all_simple_paths(graph, source, target).into_iter().min_by(|a, b| {
        b.nodes
            .len()
            .cmp(&a.nodes.len())
            .then(b.total.cmp(&a.total))
            .then(a.nodes.cmp(&b.nodes))
    })
}

/// Best path by total weight (descending), then node count (ascending),
/// then node sequence (lexicographic).
pub fn oracle_max_weight(
    graph: &InteractionGraph,
    source: &str,
    target: &str,
) -> Option<OraclePath> {
    all_simple_paths(graph, source, target).into_iter().min_by(|a, b| {
        b.total
            .cmp(&a.total)
            .then(a.nodes.len().cmp(&b.nodes.len()))
            .then(a.nodes.cmp(&b.nodes))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str, u64)]) -> InteractionGraph {
        let mut g = InteractionGraph::new();
        for (from, to, w) in edges {
            g.add_edge(from, to, *w).unwrap();
        }
        g
    }

    #[test]
    fn enumerates_every_simple_path_of_a_diamond() {
        let g = graph(&[("s", "a", 1), ("s", "b", 2), ("a", "t", 3), ("b", "t", 4)]);
        let mut paths: Vec<Vec<String>> = all_simple_paths(&g, "s", "t")
            .into_iter()
            .map(|p| p.nodes)
            .collect();
        paths.sort();
        assert_eq!(
            paths,
            vec![
                vec!["s".to_string(), "a".to_string(), "t".to_string()],
                vec!["s".to_string(), "b".to_string(), "t".to_string()],
            ]
        );
    }

    #[test]
    fn oracle_widest_picks_the_stronger_bottleneck() {
        let g = graph(&[("s", "a", 5), ("a", "t", 3), ("s", "b", 4), ("b", "t", 4)]);
        let best = oracle_widest(&g, "s", "t").unwrap();
        assert_eq!(best.nodes, ["s", "b", "t"]);
        assert_eq!(best.bottleneck, 4);
        assert_eq!(best.total, 8);
    }

    #[test]
    fn self_path_is_the_zero_edge_path() {
        let g = graph(&[("s", "t", 1)]);
        let paths = all_simple_paths(&g, "s", "s");
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].nodes, ["s"]);
        assert_eq!(paths[0].bottleneck, u64::MAX);
        assert_eq!(paths[0].total, 0);
    }

    #[test]
    fn cycles_do_not_trap_the_enumeration() {
        let g = graph(&[("s", "a", 1), ("a", "s", 1), ("a", "t", 1)]);
        let paths = all_simple_paths(&g, "s", "t");
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].nodes, ["s", "a", "t"]);
    }
}
