//! Core algorithms and data model for mining dialogue policies from
//! task-oriented conversation corpora.
//!
//! The supported pipeline: conversations are annotated with canonical forms
//! (short role-prefixed intent phrases) via a pluggable completion service,
//! near-duplicate forms are unified by per-role agglomerative clustering, the
//! corpus is folded into a weighted interaction graph of turn-to-turn
//! transitions, and the dominant "happy path" is extracted as the
//! bottleneck-maximizing (widest) source-to-target path, optionally extended
//! with digressions — branches whose user intent diverges from the expected
//! next step. Extracted flows are scored against held-out conversations with
//! BLEU, ROUGE-L, a METEOR variant, and longest-common-subsequence measures.
//!
//! This crate is `no_std` (with `alloc`) and fully deterministic: all map and
//! set state lives in B-tree collections so iteration order never depends on
//! hashing. IO, serialization, HTTP clients, and the command-line pipeline
//! live in the companion `flowmine` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cluster;
pub mod corpus;
pub mod embedding;
pub mod extract;
pub mod graph;
pub mod metrics;
pub mod prompt;
