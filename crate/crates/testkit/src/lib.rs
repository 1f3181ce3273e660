//! Independent oracles and generators for testing the dialogue-policy
//! miner.
//!
//! Everything here re-derives expected results from first principles with
//! deliberately different data structures and accumulation orders than the
//! library under test: exhaustive simple-path enumeration instead of the
//! two-phase bottleneck search, hash-map n-gram counting and per-order
//! root products instead of log-sum BLEU, and a from-scratch agglomerative
//! clusterer that recomputes distances instead of caching a base matrix.
//! A disagreement therefore points at a real defect rather than shared
//! code. The crate is std-only and intended purely as a dev-dependency.

pub mod clusterref;
pub mod generate;
pub mod paths;
pub mod providers;
pub mod textref;
