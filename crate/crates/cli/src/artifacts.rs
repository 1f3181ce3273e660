//! Artifact files and the run manifest.
//!
//! Every stage writes its outputs through this module so that all runs
//! share three properties:
//!
//! * **Determinism** — identical inputs and configuration produce
//!   byte-identical artifacts. Collections serialize in sorted order and
//!   every floating-point value prints with fixed six-decimal formatting.
//! * **Traceability** — `manifest.json` records the tool version, a hash
//!   of the effective configuration, and the SHA-256 of every artifact,
//!   so any artifact can be verified against the manifest and tied to
//!   the configuration that produced it. A manifest written under a
//!   different configuration hash is replaced, not merged.
//! * **Composability** — stages communicate only through these files, so
//!   a chained pipeline run and individually invoked stages produce the
//!   same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use flowmine_core::extract::{DialogueFlow, DialoguePath, Digression};
use flowmine_core::graph::InteractionGraph;
use flowmine_core::metrics::{AlignmentReport, CorpusEvaluation};

/// Errors from artifact IO and parsing.
#[derive(Debug, Error)]
pub enum ArtifactError {
    /// A file could not be read or written.
    #[error("cannot access {path}: {source}")]
    Io {
        /// The file involved.
        path: String,
        /// The underlying IO failure.
        #[source]
        source: std::io::Error,
    },
    /// A required input artifact has not been produced yet.
    #[error("missing input artifact {name} in {dir}")]
    Missing {
        /// The artifact file name.
        name: String,
        /// The output directory searched.
        dir: String,
    },
    /// An artifact file did not parse.
    #[error("{path}: {message}")]
    Malformed {
        /// The file involved.
        path: String,
        /// What was wrong with it.
        message: String,
    },
}

fn io_error(path: &Path, source: std::io::Error) -> ArtifactError {
    ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// The run manifest: tool version, configuration hash, artifact hashes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// The binary's version when the artifacts were written.
    pub tool_version: String,
    /// SHA-256 of the effective configuration's canonical serialization.
    pub config_hash: String,
    /// SHA-256 per artifact file name.
    pub artifacts: BTreeMap<String, String>,
}

/// File name of the manifest inside the output directory.
pub const MANIFEST_NAME: &str = "manifest.json";

impl Manifest {
    /// A fresh manifest for this binary and `config_hash`.
    pub fn new(config_hash: &str) -> Self {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            artifacts: BTreeMap::new(),
        }
    }

    /// Loads the manifest from `dir`, keeping it only when its
    /// configuration hash matches; otherwise (or when absent) starts
    /// fresh for `config_hash`.
    pub fn load_or_new(dir: &Path, config_hash: &str) -> Self {
        let path = dir.join(MANIFEST_NAME);
        let Ok(raw) = fs::read_to_string(&path) else {
            return Manifest::new(config_hash);
        };
        match serde_json::from_str::<Manifest>(&raw) {
            Ok(manifest) if manifest.config_hash == config_hash => Manifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                ..manifest
            },
            _ => Manifest::new(config_hash),
        }
    }

    /// Serializes the manifest, trailing newline included.
    pub fn to_string_pretty(&self) -> String {
        let mut out =
            serde_json::to_string_pretty(self).expect("manifests serialize infallibly");
        out.push('\n');
        out
    }

    /// Writes the manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), ArtifactError> {
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, self.to_string_pretty()).map_err(|e| io_error(&path, e))
    }
}

/// Writes `content` as artifact `name` in `dir` and records its hash in
/// `manifest`. The caller saves the manifest after its last artifact.
pub fn write_artifact(
    dir: &Path,
    name: &str,
    content: &str,
    manifest: &mut Manifest,
) -> Result<(), ArtifactError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| io_error(&path, e))?;
    manifest
        .artifacts
        .insert(name.to_string(), sha256_hex(content.as_bytes()));
    Ok(())
}

/// Reads artifact `name` from `dir`, distinguishing a missing file from
/// other IO failures so callers can point at the stage that should have
/// produced it.
pub fn read_artifact(dir: &Path, name: &str) -> Result<String, ArtifactError> {
    let path = dir.join(name);
    match fs::read_to_string(&path) {
        Ok(content) => Ok(content),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ArtifactError::Missing {
            name: name.to_string(),
            dir: dir.display().to_string(),
        }),
        Err(e) => Err(io_error(&path, e)),
    }
}

/// The path of artifact `name` inside `dir`.
pub fn artifact_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

// --- graph file -----------------------------------------------------------

/// One weighted edge on the wire.
#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    from: String,
    to: String,
    weight: u64,
}

/// The whole graph on the wire.
#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    nodes: Vec<String>,
    edges: Vec<EdgeRecord>,
    first_turns: BTreeMap<String, u64>,
    last_turns: BTreeMap<String, u64>,
}

/// Serializes a graph: nodes and edges sorted, endpoint counts as maps,
/// trailing newline included.
pub fn render_graph_json(graph: &InteractionGraph) -> String {
    let record = GraphRecord {
        nodes: graph.nodes().map(String::from).collect(),
        edges: graph
            .edges()
            .map(|(from, to, weight)| EdgeRecord {
                from: from.to_string(),
                to: to.to_string(),
                weight,
            })
            .collect(),
        first_turns: graph.first_turn_counts().clone(),
        last_turns: graph.last_turn_counts().clone(),
    };
    let mut out = serde_json::to_string_pretty(&record).expect("graphs serialize infallibly");
    out.push('\n');
    out
}

/// Rebuilds a graph from its serialization.
pub fn parse_graph_json(raw: &str, path: &Path) -> Result<InteractionGraph, ArtifactError> {
    let record: GraphRecord =
        serde_json::from_str(raw).map_err(|e| ArtifactError::Malformed {
            path: path.display().to_string(),
            message: format!("invalid graph file: {e}"),
        })?;
    let mut graph = InteractionGraph::new();
    for node in &record.nodes {
        graph.add_node(node);
    }
    for edge in &record.edges {
        graph
            .add_edge(&edge.from, &edge.to, edge.weight)
            .map_err(|e| ArtifactError::Malformed {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
    }
    // Endpoint counts are restored pairwise: both sides total one entry
    // per recorded conversation, so expanding each map by its counts
    // yields two equal-length lists.
    let expand = |counts: &BTreeMap<String, u64>| -> Vec<String> {
        counts
            .iter()
            .flat_map(|(name, count)| {
                std::iter::repeat_with(move || name.clone()).take(*count as usize)
            })
            .collect()
    };
    let firsts = expand(&record.first_turns);
    let lasts = expand(&record.last_turns);
    if firsts.len() != lasts.len() {
        return Err(ArtifactError::Malformed {
            path: path.display().to_string(),
            message: format!(
                "endpoint counts disagree: {} conversation starts, {} ends",
                firsts.len(),
                lasts.len()
            ),
        });
    }
    for (first, last) in firsts.iter().zip(&lasts) {
        graph.record_endpoints(first, last);
    }
    Ok(graph)
}

// --- flow file ------------------------------------------------------------

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize infallibly")
}

fn path_json(path: &DialoguePath, indent: &str) -> String {
    let nodes: Vec<String> = path.nodes.iter().map(|n| json_str(n)).collect();
    format!(
        "{{\n{indent}  \"nodes\": [{}],\n{indent}  \"bottleneck\": {},\n{indent}  \"total_weight\": {}\n{indent}}}",
        nodes.join(", "),
        path.bottleneck,
        path.total_weight
    )
}

/// Serializes a flow with six-decimal similarity fields, trailing newline
/// included.
pub fn render_flow_json(flow: &DialogueFlow) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"method\": {},\n", json_str(&flow.method_tag)));
    out.push_str(&format!("  \"main\": {},\n", path_json(&flow.main, "  ")));
    out.push_str("  \"digressions\": [");
    for (i, digression) in flow.digressions.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("\n    {\n");
        out.push_str(&format!(
            "      \"branch_from\": {},\n",
            json_str(&digression.branch_from)
        ));
        out.push_str(&format!(
            "      \"branch_head\": {},\n",
            json_str(&digression.branch_head)
        ));
        out.push_str(&format!(
            "      \"candidate_similarity\": {:.6},\n",
            digression.candidate_similarity
        ));
        out.push_str(&format!(
            "      \"path_similarity\": {:.6},\n",
            digression.path_similarity
        ));
        out.push_str(&format!(
            "      \"path\": {}\n",
            path_json(&digression.path, "      ")
        ));
        out.push_str("    }");
    }
    if !flow.digressions.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

/// One path on the wire.
#[derive(Debug, Deserialize)]
struct PathRecord {
    nodes: Vec<String>,
    bottleneck: u64,
    total_weight: u64,
}

/// One digression on the wire.
#[derive(Debug, Deserialize)]
struct DigressionRecord {
    branch_from: String,
    branch_head: String,
    candidate_similarity: f64,
    path_similarity: f64,
    path: PathRecord,
}

/// The whole flow on the wire.
#[derive(Debug, Deserialize)]
struct FlowRecord {
    method: String,
    main: PathRecord,
    digressions: Vec<DigressionRecord>,
}

fn path_from(record: PathRecord) -> DialoguePath {
    DialoguePath {
        nodes: record.nodes,
        bottleneck: record.bottleneck,
        total_weight: record.total_weight,
    }
}

/// Rebuilds a flow from its serialization. Similarity fields round-trip
/// at six decimals.
pub fn parse_flow_json(raw: &str, path: &Path) -> Result<DialogueFlow, ArtifactError> {
    let record: FlowRecord = serde_json::from_str(raw).map_err(|e| ArtifactError::Malformed {
        path: path.display().to_string(),
        message: format!("invalid flow file: {e}"),
    })?;
    Ok(DialogueFlow {
        main: path_from(record.main),
        digressions: record
            .digressions
            .into_iter()
            .map(|d| Digression {
                branch_from: d.branch_from,
                branch_head: d.branch_head,
                candidate_similarity: d.candidate_similarity,
                path_similarity: d.path_similarity,
                path: path_from(d.path),
            })
            .collect(),
        method_tag: record.method,
    })
}

// --- evaluation report ----------------------------------------------------

/// Note carried in every report about the METEOR column's scope.
pub const METEOR_NOTE: &str =
    "meteor is a single-reference exact-match variant: no stemming, no synonym sets";

/// Serializes an evaluation report. Per-conversation rows and aggregate
/// means carry a `bert_score` column pinned to `null` (reserved; not
/// computed by this tool), and the header documents the METEOR variant.
/// All floats print with six decimals. When `alignment` is present its
/// precision/recall section is included.
pub fn render_eval_report_json(
    evaluation: &CorpusEvaluation,
    method: &str,
    alignment: Option<&AlignmentReport>,
) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"flow_method\": {},\n", json_str(method)));
    out.push_str(&format!("  \"meteor_note\": {},\n", json_str(METEOR_NOTE)));
    out.push_str(&format!(
        "  \"conversations\": {},\n",
        evaluation.per_conversation.len()
    ));
    out.push_str("  \"per_conversation\": [");
    for (i, row) in evaluation.per_conversation.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "\n    {{\"id\": {}, \"bleu\": {:.6}, \"rouge_l\": {:.6}, \"meteor\": {:.6}, \"lcs_exact\": {}, \"lcs_similarity\": {}, \"bert_score\": null}}",
            json_str(&row.conversation_id),
            row.bleu,
            row.rouge_l,
            row.meteor,
            row.lcs_exact,
            row.lcs_similarity
        ));
    }
    if !evaluation.per_conversation.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("],\n");
    let summary = &evaluation.summary;
    out.push_str(&format!(
        "  \"aggregate\": {{\"mean_bleu\": {:.6}, \"mean_rouge_l\": {:.6}, \"mean_meteor\": {:.6}, \"mean_lcs_exact\": {:.6}, \"mean_lcs_similarity\": {:.6}, \"bert_score\": null}}",
        summary.mean_bleu,
        summary.mean_rouge_l,
        summary.mean_meteor,
        summary.mean_lcs_exact,
        summary.mean_lcs_similarity
    ));
    if let Some(report) = alignment {
        out.push_str(",\n  \"alignment\": {\n");
        let pr = |scores: &flowmine_core::metrics::PrecisionRecall| {
            format!(
                "{{\"precision\": {:.6}, \"recall\": {:.6}}}",
                scores.precision, scores.recall
            )
        };
        out.push_str(&format!("    \"overall\": {},\n", pr(&report.overall)));
        out.push_str(&format!("    \"user\": {},\n", pr(&report.user)));
        out.push_str(&format!("    \"bot\": {},\n", pr(&report.bot)));
        out.push_str("    \"per_conversation\": [");
        for (i, row) in report.per_conversation.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "\n      {{\"id\": {}, \"precision\": {:.6}, \"recall\": {:.6}}}",
                json_str(&row.conversation_id),
                row.scores.precision,
                row.scores.recall
            ));
        }
        if !report.per_conversation.is_empty() {
            out.push_str("\n    ");
        }
        out.push_str("]\n  }");
    }
    out.push_str("\n}\n");
    out
}
