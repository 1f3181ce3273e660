//! Newline-delimited JSON interchange formats.
//!
//! Three formats live here, all one JSON record per line in UTF-8:
//!
//! * **Corpus files** — one conversation per line:
//!   `{"id": …, "domain": …|null, "turns": [{"role": "user"|"agent",
//!   "text": …, "canonical_form": …|null}]}`. Unknown fields are ignored
//!   on read and never emitted on write, so corpora can carry
//!   tool-specific extras without breaking round-trips.
//! * **Alignment files** — one judged conversation per line:
//!   `{"conversation_id": …, "mappings": [{"step": i, "turn": j|null,
//!   "relevance": 0|0.5|1}]}`.
//! * **Cluster dumps** — a single pretty-printed JSON document listing
//!   each role's intent clusters with member frequencies.
//!
//! Load errors carry the file path and one-based line number of the
//! offending record.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use flowmine_core::cluster::Normalization;
use flowmine_core::corpus::{Conversation, Corpus, CorpusError, SpeakerRole, Turn};
use flowmine_core::metrics::{ConversationAlignment, Relevance, StepAlignment};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from reading or writing interchange files.
#[derive(Debug, Error)]
pub enum InterchangeError {
    /// The file could not be read or written.
    #[error("cannot access {path}: {source}")]
    Io {
        /// The file involved.
        path: String,
        /// The underlying IO failure.
        #[source]
        source: std::io::Error,
    },
    /// A record failed to parse or carried an invalid field.
    #[error("{path}:{line}: {message}")]
    Malformed {
        /// The file involved.
        path: String,
        /// One-based line number of the offending record.
        line: usize,
        /// What was wrong with it.
        message: String,
    },
    /// The file parsed but the assembled corpus was rejected.
    #[error("{path}: {source}")]
    Corpus {
        /// The file involved.
        path: String,
        /// The corpus-level failure.
        #[source]
        source: CorpusError,
    },
    /// The file contained no records at all.
    #[error("{path} contains no records")]
    Empty {
        /// The file involved.
        path: String,
    },
}

fn io_error(path: &Path, source: std::io::Error) -> InterchangeError {
    InterchangeError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, line: usize, message: impl std::fmt::Display) -> InterchangeError {
    InterchangeError::Malformed {
        path: path.display().to_string(),
        line,
        message: message.to_string(),
    }
}

/// One turn on the wire.
#[derive(Debug, Serialize, Deserialize)]
struct TurnRecord {
    role: String,
    text: String,
    #[serde(default)]
    canonical_form: Option<String>,
}

/// One conversation on the wire.
#[derive(Debug, Serialize, Deserialize)]
struct ConversationRecord {
    id: String,
    #[serde(default)]
    domain: Option<String>,
    turns: Vec<TurnRecord>,
}

fn parse_role(raw: &str) -> Option<SpeakerRole> {
    match raw {
        "user" => Some(SpeakerRole::User),
        "agent" => Some(SpeakerRole::Agent),
        _ => None,
    }
}

fn role_name(role: SpeakerRole) -> &'static str {
    match role {
        SpeakerRole::User => "user",
        SpeakerRole::Agent => "agent",
    }
}

/// Reads a corpus file.
///
/// Blank lines are skipped; every other line must be one conversation
/// record. Fails on IO errors, malformed records (reported with their line
/// number and field), duplicate conversation ids, and files with no
/// records.
pub fn load_corpus(path: &Path) -> Result<Corpus, InterchangeError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let reader = BufReader::new(file);
    let mut conversations = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ConversationRecord = serde_json::from_str(&line)
            .map_err(|e| malformed(path, line_no, format!("invalid conversation record: {e}")))?;
        if !seen_ids.insert(record.id.clone()) {
            return Err(malformed(
                path,
                line_no,
                format!("duplicate conversation id {:?}", record.id),
            ));
        }
        let mut turns = Vec::with_capacity(record.turns.len());
        for (turn_no, turn) in record.turns.iter().enumerate() {
            let role = parse_role(&turn.role).ok_or_else(|| {
                malformed(
                    path,
                    line_no,
                    format!(
                        "turn {turn_no}: field \"role\" must be \"user\" or \"agent\", got {:?}",
                        turn.role
                    ),
                )
            })?;
            let built = match &turn.canonical_form {
                Some(form) => Turn::annotated(role, &turn.text, form),
                None => Turn::new(role, &turn.text),
            };
            turns.push(built.map_err(|e| {
                malformed(path, line_no, format!("turn {turn_no}: {e}"))
            })?);
        }
        let conversation = Conversation::new(&record.id, turns, record.domain.clone())
            .map_err(|e| malformed(path, line_no, e))?;
        conversations.push(conversation);
    }
    if conversations.is_empty() {
        return Err(InterchangeError::Empty {
            path: path.display().to_string(),
        });
    }
    Corpus::new(conversations).map_err(|e| InterchangeError::Corpus {
        path: path.display().to_string(),
        source: e,
    })
}

/// Serializes a corpus to the interchange format, one conversation per
/// line, trailing newline included.
pub fn corpus_to_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    for conversation in corpus.conversations() {
        let record = ConversationRecord {
            id: conversation.id().to_string(),
            domain: conversation.domain().map(String::from),
            turns: conversation
                .turns()
                .iter()
                .map(|t| TurnRecord {
                    role: role_name(t.role()).to_string(),
                    text: t.text().to_string(),
                    canonical_form: t.canonical_form().map(String::from),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("records serialize infallibly"));
        out.push('\n');
    }
    out
}

/// Writes a corpus file in the interchange format.
pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<(), InterchangeError> {
    fs::write(path, corpus_to_string(corpus)).map_err(|e| io_error(path, e))
}

/// One step-to-turn link on the wire.
#[derive(Debug, Serialize, Deserialize)]
struct MappingRecord {
    step: usize,
    #[serde(default)]
    turn: Option<usize>,
    relevance: f64,
}

/// One judged conversation on the wire.
#[derive(Debug, Serialize, Deserialize)]
struct AlignmentRecord {
    conversation_id: String,
    mappings: Vec<MappingRecord>,
}

fn parse_relevance(raw: f64) -> Option<Relevance> {
    if raw == 0.0 {
        Some(Relevance::Zero)
    } else if raw == 0.5 {
        Some(Relevance::Half)
    } else if raw == 1.0 {
        Some(Relevance::One)
    } else {
        None
    }
}

/// Reads an alignment file: one judged conversation per line, blank lines
/// skipped. Relevance must be exactly `0`, `0.5`, or `1`.
pub fn load_alignments(path: &Path) -> Result<Vec<ConversationAlignment>, InterchangeError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let reader = BufReader::new(file);
    let mut alignments = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AlignmentRecord = serde_json::from_str(&line)
            .map_err(|e| malformed(path, line_no, format!("invalid alignment record: {e}")))?;
        let mut entries = Vec::with_capacity(record.mappings.len());
        for (entry_no, mapping) in record.mappings.iter().enumerate() {
            let relevance = parse_relevance(mapping.relevance).ok_or_else(|| {
                malformed(
                    path,
                    line_no,
                    format!(
                        "mapping {entry_no}: field \"relevance\" must be 0, 0.5, or 1, got {}",
                        mapping.relevance
                    ),
                )
            })?;
            entries.push(StepAlignment {
                step_index: mapping.step,
                turn_index: mapping.turn,
                relevance,
            });
        }
        alignments.push(ConversationAlignment {
            conversation_id: record.conversation_id.clone(),
            entries,
        });
    }
    if alignments.is_empty() {
        return Err(InterchangeError::Empty {
            path: path.display().to_string(),
        });
    }
    Ok(alignments)
}

/// One cluster in a dump.
#[derive(Debug, Serialize)]
struct ClusterRecord {
    representative: String,
    members: Vec<MemberRecord>,
}

/// One member form with its corpus frequency.
#[derive(Debug, Serialize)]
struct MemberRecord {
    form: String,
    frequency: u64,
}

/// Both roles' clusters.
#[derive(Debug, Serialize)]
struct ClusterDump {
    user: Vec<ClusterRecord>,
    agent: Vec<ClusterRecord>,
}

fn dump_side(
    clusters: &[flowmine_core::cluster::Cluster],
    frequencies: &std::collections::BTreeMap<String, u64>,
) -> Vec<ClusterRecord> {
    clusters
        .iter()
        .map(|cluster| ClusterRecord {
            representative: cluster.representative.clone(),
            members: cluster
                .members
                .iter()
                .map(|form| MemberRecord {
                    form: form.clone(),
                    frequency: frequencies.get(form).copied().unwrap_or(0),
                })
                .collect(),
        })
        .collect()
}

/// Renders a normalization's clusters as a pretty-printed JSON document
/// with per-form corpus frequencies, for the `normalize --dump-clusters`
/// artifact. Deterministic: clusters and members arrive sorted from the
/// normalizer.
pub fn render_cluster_dump(normalization: &Normalization, corpus: &Corpus) -> String {
    let user_freq = flowmine_core::cluster::form_frequencies(corpus, SpeakerRole::User);
    let agent_freq = flowmine_core::cluster::form_frequencies(corpus, SpeakerRole::Agent);
    let dump = ClusterDump {
        user: dump_side(&normalization.user, &user_freq),
        agent: dump_side(&normalization.agent, &agent_freq),
    };
    let mut out = serde_json::to_string_pretty(&dump).expect("dumps serialize infallibly");
    out.push('\n');
    out
}
