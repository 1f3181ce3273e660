//! Command-line pipeline and file formats around [`flowmine_core`].
//!
//! The core crate holds the algorithms and stays free of IO; this crate
//! supplies everything that touches the outside world: newline-delimited
//! JSON corpus and alignment files, the on-disk embedding cache, HTTP
//! clients for completion and embedding services, a deterministic synthetic
//! corpus generator with a matching offline embedder, artifact and manifest
//! management, flow rendering, and the `flowmine` binary's staged pipeline.
//!
//! Every stage reads its input artifact from the output directory, writes
//! its output artifact back, and records both in a manifest keyed by a hash
//! of the effective configuration, so a pipeline run and the equivalent
//! sequence of stage commands produce identical bytes.

pub mod artifacts;
pub mod cachefile;
pub mod config;
pub mod http;
pub mod interchange;
pub mod pipeline;
pub mod render;
pub mod synth;
pub mod synthetic;
