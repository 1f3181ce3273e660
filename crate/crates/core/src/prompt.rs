//! Prompt templating and completion-backed annotation.
//!
//! Two templates drive the completion model: the annotation template asks
//! for one canonical form given a worked example and the conversation so
//! far, and the flow-summary template asks for a whole flow given a batch
//! of annotated conversations. Both are validated newtypes — each required
//! placeholder must appear exactly once — and substitution is a single
//! left-to-right pass, so placeholder-looking text inside substituted
//! values is never expanded again.
//!
//! The completion service itself is abstract: callers hand in anything
//! implementing [`CompletionService`], which keeps this module free of IO
//! and lets tests drive the annotator with scripted responses.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::corpus::{Conversation, Corpus, CorpusError, SpeakerRole, Turn};
use crate::extract::{DialogueFlow, DialoguePath};

/// The placeholder for the worked example in annotation templates.
pub const EXAMPLE_PLACEHOLDER: &str = "{example}";
/// The placeholder for the serialized conversation in annotation templates.
pub const CONVERSATION_PLACEHOLDER: &str = "{conv}";
/// The placeholder for the serialized batch in flow-summary templates.
pub const BATCH_PLACEHOLDER: &str = "{conversations_with_canonical_forms}";

/// Errors from template validation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    /// A required placeholder does not occur in the template.
    #[error("template is missing the {placeholder} placeholder")]
    MissingPlaceholder {
        /// The absent placeholder, braces included.
        placeholder: String,
    },
    /// A required placeholder occurs more than once.
    #[error("template repeats the {placeholder} placeholder")]
    RepeatedPlaceholder {
        /// The duplicated placeholder, braces included.
        placeholder: String,
    },
}

/// A completion request failed.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{message}")]
pub struct CompletionError {
    message: String,
}

impl CompletionError {
    /// Wraps any displayable failure.
    pub fn new(message: impl core::fmt::Display) -> Self {
        CompletionError {
            message: alloc::format!("{message}"),
        }
    }

    /// The failure description.
    pub fn message(&self) -> &str {
        &self.message
    }
}

/// Anything that can turn a prompt into a completion.
pub trait CompletionService {
    /// Completes `prompt`, returning the model's raw text.
    fn complete(&self, prompt: &str) -> Result<String, CompletionError>;
}

fn require_exactly_once(text: &str, placeholder: &str) -> Result<(), TemplateError> {
    match text.matches(placeholder).count() {
        0 => Err(TemplateError::MissingPlaceholder {
            placeholder: placeholder.to_string(),
        }),
        1 => Ok(()),
        _ => Err(TemplateError::RepeatedPlaceholder {
            placeholder: placeholder.to_string(),
        }),
    }
}

/// Substitutes each placeholder in one left-to-right pass.
///
/// At each step the earliest remaining placeholder occurrence is replaced
/// and scanning resumes *after* the substituted value, so values containing
/// placeholder-shaped text pass through literally.
fn substitute(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let mut earliest: Option<(usize, &str, &str)> = None;
        for (placeholder, value) in substitutions {
            if let Some(pos) = rest.find(placeholder) {
                let is_earlier = earliest.map_or(true, |(best, _, _)| pos < best);
                if is_earlier {
                    earliest = Some((pos, placeholder, value));
                }
            }
        }
        match earliest {
            Some((pos, placeholder, value)) => {
                out.push_str(&rest[..pos]);
                out.push_str(value);
                rest = &rest[pos + placeholder.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// Validated template for per-turn annotation prompts.
///
/// Must contain `{example}` and `{conv}` exactly once each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationTemplate {
    text: String,
}

impl AnnotationTemplate {
    /// Validates and wraps the template text.
    pub fn new(text: &str) -> Result<Self, TemplateError> {
        require_exactly_once(text, EXAMPLE_PLACEHOLDER)?;
        require_exactly_once(text, CONVERSATION_PLACEHOLDER)?;
        Ok(AnnotationTemplate {
            text: text.to_string(),
        })
    }

    /// The raw template text.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Renders the prompt for one conversation prefix.
    pub fn render(&self, example: &str, conversation: &str) -> String {
        substitute(
            &self.text,
            &[
                (EXAMPLE_PLACEHOLDER, example),
                (CONVERSATION_PLACEHOLDER, conversation),
            ],
        )
    }
}

/// Validated template for whole-batch flow-summary prompts.
///
/// Must contain `{conversations_with_canonical_forms}` exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSummaryTemplate {
    text: String,
}

impl FlowSummaryTemplate {
    /// Validates and wraps the template text.
    pub fn new(text: &str) -> Result<Self, TemplateError> {
        require_exactly_once(text, BATCH_PLACEHOLDER)?;
        Ok(FlowSummaryTemplate {
            text: text.to_string(),
        })
    }

    /// The raw template text.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Renders the prompt for a serialized batch listing.
    pub fn render(&self, batch_listing: &str) -> String {
        substitute(&self.text, &[(BATCH_PLACEHOLDER, batch_listing)])
    }
}

fn transcript_label(role: SpeakerRole) -> &'static str {
    match role {
        SpeakerRole::User => "user",
        SpeakerRole::Agent => "agent",
    }
}

/// Serializes turns as `user: <text>` / `agent: <text>` lines.
pub fn conversation_transcript(turns: &[Turn]) -> String {
    let lines: Vec<String> = turns
        .iter()
        .map(|t| alloc::format!("{}: {}", transcript_label(t.role()), t.text()))
        .collect();
    lines.join("\n")
}

/// Extracts the canonical form from a raw completion: the last non-blank
/// line, lowercased, with whitespace collapsed to single spaces.
///
/// Models often preface their answer with commentary; taking the final
/// non-blank line keeps the answer and drops the chatter. Returns `None`
/// when the completion contains no non-blank line.
pub fn parse_canonical_form(raw: &str) -> Option<String> {
    let line = raw.lines().rev().find(|l| !l.trim().is_empty())?;
    let collapsed = line
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    if collapsed.is_empty() {
        None
    } else {
        Some(collapsed)
    }
}

/// Errors from completion-backed annotation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotateError {
    /// The completion service failed for one turn.
    #[error("completion failed for conversation {id:?} turn {index}: {message}")]
    Service {
        /// Conversation id.
        id: String,
        /// Zero-based turn index.
        index: usize,
        /// Underlying failure description.
        message: String,
    },
    /// The completion contained no usable line.
    #[error("completion for conversation {id:?} turn {index} contained no usable line: {raw:?}")]
    Unparseable {
        /// Conversation id.
        id: String,
        /// Zero-based turn index.
        index: usize,
        /// The raw completion text.
        raw: String,
    },
}

/// Annotates every unannotated turn of one conversation.
///
/// Turn `i` is annotated from a prompt carrying the worked example and the
/// transcript of turns `0..=i` — the model sees the history up to and
/// including the turn it labels, and nothing after it. Already-annotated
/// turns are left untouched and cost no completion calls. The input is
/// never mutated; a fully annotated copy is returned.
pub fn annotate_conversation(
    conversation: &Conversation,
    service: &dyn CompletionService,
    template: &AnnotationTemplate,
    example: &str,
) -> Result<Conversation, AnnotateError> {
    let mut annotated: Vec<Turn> = Vec::with_capacity(conversation.turns().len());
    for (index, turn) in conversation.turns().iter().enumerate() {
        if turn.canonical_form().is_some() {
            annotated.push(turn.clone());
            continue;
        }
        let transcript = conversation_transcript(&conversation.turns()[..=index]);
        let prompt = template.render(example, &transcript);
        let raw = service
            .complete(&prompt)
            .map_err(|e| AnnotateError::Service {
                id: conversation.id().to_string(),
                index,
                message: e.message().to_string(),
            })?;
        let form = parse_canonical_form(&raw).ok_or_else(|| AnnotateError::Unparseable {
            id: conversation.id().to_string(),
            index,
            raw: raw.clone(),
        })?;
        // The parsed form is non-empty and single-line by construction, and
        // the turn's text was already accepted once.
        let new_turn = Turn::annotated(turn.role(), turn.text(), &form)
            .expect("parsed forms satisfy turn validation");
        annotated.push(new_turn);
    }
    // Roles and texts are unchanged, so merging is a no-op and the original
    // id and turn count stay valid.
    Ok(Conversation::new(
        conversation.id(),
        annotated,
        conversation.domain().map(String::from),
    )
    .expect("annotation preserves conversation validity"))
}

/// Annotates every conversation of a corpus, in corpus order.
///
/// Returns a fully annotated copy; the first failing turn (in corpus
/// order) aborts the whole run and the input is never mutated, so a failed
/// run leaves no partially annotated state behind.
pub fn annotate_corpus(
    corpus: &Corpus,
    service: &dyn CompletionService,
    template: &AnnotationTemplate,
    example: &str,
) -> Result<Corpus, AnnotateError> {
    let mut annotated = Vec::with_capacity(corpus.len());
    for conversation in corpus.conversations() {
        annotated.push(annotate_conversation(conversation, service, template, example)?);
    }
    Ok(Corpus::new(annotated).expect("annotation preserves corpus validity"))
}

/// Errors from the prompt-summarization flow baseline.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineFlowError {
    /// The batch exceeds what one prompt may carry.
    #[error("batch of {size} conversations exceeds the prompt limit of {max}")]
    BatchTooLarge {
        /// Conversations in the batch.
        size: usize,
        /// Configured per-prompt maximum.
        max: usize,
    },
    /// The batch contained an unannotated turn.
    #[error("batch is not fully annotated: {0}")]
    Unannotated(#[from] CorpusError),
    /// The completion service failed.
    #[error("flow summarization completion failed: {message}")]
    Service {
        /// Underlying failure description.
        message: String,
    },
    /// The completion contained no recognizable flow steps.
    #[error("flow summarization returned no steps: {raw:?}")]
    NoSteps {
        /// The raw completion text.
        raw: String,
    },
}

/// Serializes a batch as canonical-form step lines, one conversation per
/// block, blank lines between blocks.
pub fn batch_listing(batch: &Corpus) -> Result<String, CorpusError> {
    let mut blocks: Vec<String> = Vec::with_capacity(batch.len());
    for conversation in batch.conversations() {
        blocks.push(conversation.canonical_sequence()?.join("\n"));
    }
    Ok(blocks.join("\n\n"))
}

/// Asks the completion model to summarize a batch into one flow.
///
/// The prompt lists every conversation's role-prefixed canonical forms;
/// the completion is parsed by keeping the lines that look like flow steps
/// (`user ...` / `bot ...` after lowercasing and whitespace collapsing),
/// dropping any surrounding commentary. The resulting flow is not graph
/// derived, so its path carries zero bottleneck and total weight.
pub fn baseline_flow(
    batch: &Corpus,
    service: &dyn CompletionService,
    template: &FlowSummaryTemplate,
    max_batch: usize,
) -> Result<DialogueFlow, BaselineFlowError> {
    if batch.len() > max_batch {
        return Err(BaselineFlowError::BatchTooLarge {
            size: batch.len(),
            max: max_batch,
        });
    }
    let listing = batch_listing(batch)?;
    let prompt = template.render(&listing);
    let raw = service
        .complete(&prompt)
        .map_err(|e| BaselineFlowError::Service {
            message: e.message().to_string(),
        })?;
    let steps: Vec<String> = raw
        .lines()
        .filter_map(|line| {
            let collapsed = line
                .to_lowercase()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ");
            let is_step = collapsed.starts_with("user ") || collapsed.starts_with("bot ");
            is_step.then_some(collapsed)
        })
        .collect();
    if steps.is_empty() {
        return Err(BaselineFlowError::NoSteps { raw });
    }
    Ok(DialogueFlow {
        main: DialoguePath {
            nodes: steps,
            bottleneck: 0,
            total_weight: 0,
        },
        digressions: Vec::new(),
        method_tag: "prompt".to_string(),
    })
}
