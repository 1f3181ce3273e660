//! Conversation data model: speaker roles, turns, conversations, corpora.
//!
//! A corpus is an ordered collection of conversations; a conversation is a
//! strictly alternating sequence of user/agent turns, each optionally
//! carrying a canonical form — a short phrase naming the turn's intent.
//! Alternation is enforced structurally: constructing a conversation merges
//! consecutive same-role turns into one, joining their texts with a single
//! space. Real transcripts contain multi-message turns, and the interaction
//! graph downstream assumes strict alternation, so merging (rather than
//! rejecting) keeps ingestion permissive without weakening the invariant.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

/// Which side of the dialogue produced a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpeakerRole {
    /// The human (or simulated) customer side.
    User,
    /// The assistant/agent side.
    Agent,
}

impl SpeakerRole {
    /// Token prefixed to canonical forms of this role in rendered sequences.
    ///
    /// Rendered flows use `user`/`bot` even though the data model calls the
    /// second role [`SpeakerRole::Agent`]; the output format is what
    /// downstream flow tooling consumes.
    pub fn prefix_token(self) -> &'static str {
        match self {
            SpeakerRole::User => "user",
            SpeakerRole::Agent => "bot",
        }
    }
}

/// Validation errors for corpus construction and canonical-form access.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    /// A turn's text was empty after trimming.
    #[error("turn text is empty")]
    EmptyText,
    /// A canonical form was present but empty after trimming.
    #[error("canonical form is empty")]
    EmptyCanonicalForm,
    /// A canonical form contained a line break.
    #[error("canonical form contains a line break: {form:?}")]
    CanonicalFormLineBreak {
        /// The offending form.
        form: String,
    },
    /// A conversation id was empty.
    #[error("conversation id is empty")]
    EmptyConversationId,
    /// A conversation had no turns.
    #[error("conversation {id:?} has no turns")]
    NoTurns {
        /// Id of the empty conversation.
        id: String,
    },
    /// Two conversations in one corpus shared an id.
    #[error("duplicate conversation id {id:?}")]
    DuplicateConversationId {
        /// The repeated id.
        id: String,
    },
    /// A turn lacked a canonical form where one was required.
    #[error("conversation {id:?}: turn {index} has no canonical form")]
    UnannotatedTurn {
        /// Conversation the turn belongs to.
        id: String,
        /// Zero-based index of the unannotated turn.
        index: usize,
    },
}

fn validate_text(text: &str) -> Result<String, CorpusError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(CorpusError::EmptyText);
    }
    Ok(trimmed.to_string())
}

fn validate_form(form: &str) -> Result<String, CorpusError> {
    let trimmed = form.trim();
    if trimmed.is_empty() {
        return Err(CorpusError::EmptyCanonicalForm);
    }
    if trimmed.contains('\n') || trimmed.contains('\r') {
        return Err(CorpusError::CanonicalFormLineBreak {
            form: form.to_string(),
        });
    }
    Ok(trimmed.to_string())
}

/// One utterance by one speaker, optionally annotated with a canonical form.
///
/// Text is trimmed of leading/trailing whitespace at construction (internal
/// whitespace is preserved) and is always non-empty; a canonical form, when
/// present, is non-empty and single-line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    role: SpeakerRole,
    text: String,
    canonical_form: Option<String>,
}

impl Turn {
    /// Builds an unannotated turn. Fails if `text` is empty after trimming.
    pub fn new(role: SpeakerRole, text: &str) -> Result<Self, CorpusError> {
        Ok(Turn {
            role,
            text: validate_text(text)?,
            canonical_form: None,
        })
    }

    /// Builds a turn that already carries a canonical form.
    pub fn annotated(role: SpeakerRole, text: &str, form: &str) -> Result<Self, CorpusError> {
        Ok(Turn {
            role,
            text: validate_text(text)?,
            canonical_form: Some(validate_form(form)?),
        })
    }

    /// The speaker of this turn.
    pub fn role(&self) -> SpeakerRole {
        self.role
    }

    /// The utterance text (trimmed, non-empty).
    pub fn text(&self) -> &str {
        &self.text
    }

    /// The canonical form, if the turn has been annotated.
    pub fn canonical_form(&self) -> Option<&str> {
        self.canonical_form.as_deref()
    }

    /// Sets the canonical form, validating it like [`Turn::annotated`].
    pub fn set_canonical_form(&mut self, form: &str) -> Result<(), CorpusError> {
        self.canonical_form = Some(validate_form(form)?);
        Ok(())
    }
}

/// An ordered, strictly alternating sequence of turns under a unique id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    id: String,
    turns: Vec<Turn>,
    domain: Option<String>,
}

impl Conversation {
    /// Builds a conversation, merging consecutive same-role turns.
    ///
    /// Merged turns join their texts with a single space; the merged turn's
    /// canonical form is the first present one among the run, which keeps
    /// pre-annotated corpora stable across a reload. Fails on an empty id or
    /// an empty turn list.
    pub fn new(
        id: &str,
        turns: Vec<Turn>,
        domain: Option<String>,
    ) -> Result<Self, CorpusError> {
        let id = id.trim();
        if id.is_empty() {
            return Err(CorpusError::EmptyConversationId);
        }
        if turns.is_empty() {
            return Err(CorpusError::NoTurns { id: id.to_string() });
        }
        let mut merged: Vec<Turn> = Vec::with_capacity(turns.len());
        for turn in turns {
            match merged.last_mut() {
                Some(last) if last.role == turn.role => {
                    last.text.push(' ');
                    last.text.push_str(&turn.text);
                    if last.canonical_form.is_none() {
                        last.canonical_form = turn.canonical_form;
                    }
                }
                _ => merged.push(turn),
            }
        }
        Ok(Conversation {
            id: id.to_string(),
            turns: merged,
            domain,
        })
    }

    /// The conversation's unique id.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// The alternating turns, in order. Never empty.
    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    /// The optional task/domain label.
    pub fn domain(&self) -> Option<&str> {
        self.domain.as_deref()
    }

    /// Whether every turn carries a canonical form.
    pub fn fully_annotated(&self) -> bool {
        self.turns.iter().all(|t| t.canonical_form.is_some())
    }

    /// The role-prefixed canonical forms of all turns, in order.
    ///
    /// Each form is prefixed with its role token (`user ` / `bot `) unless
    /// the stored form already begins with that token. Fails on the first
    /// unannotated turn, citing its index.
    pub fn canonical_sequence(&self) -> Result<Vec<String>, CorpusError> {
        self.turns
            .iter()
            .enumerate()
            .map(|(index, turn)| {
                let form = turn
                    .canonical_form()
                    .ok_or_else(|| CorpusError::UnannotatedTurn {
                        id: self.id.clone(),
                        index,
                    })?;
                Ok(role_prefixed(turn.role(), form))
            })
            .collect()
    }
}

/// Prefixes `form` with the role token unless it already starts with it.
pub fn role_prefixed(role: SpeakerRole, form: &str) -> String {
    let token = role.prefix_token();
    if form == token || form.starts_with(token) && form[token.len()..].starts_with(' ') {
        form.to_string()
    } else {
        let mut prefixed = String::with_capacity(token.len() + 1 + form.len());
        prefixed.push_str(token);
        prefixed.push(' ');
        prefixed.push_str(form);
        prefixed
    }
}

/// An ordered collection of conversations with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    conversations: Vec<Conversation>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate conversation ids.
    pub fn new(conversations: Vec<Conversation>) -> Result<Self, CorpusError> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for conv in &conversations {
            if !seen.insert(conv.id()) {
                return Err(CorpusError::DuplicateConversationId {
                    id: conv.id().to_string(),
                });
            }
        }
        Ok(Corpus { conversations })
    }

    /// The conversations in corpus order.
    pub fn conversations(&self) -> &[Conversation] {
        &self.conversations
    }

    /// Number of conversations.
    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    /// Whether the corpus holds no conversations.
    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    /// Whether every turn of every conversation carries a canonical form.
    ///
    /// Computed on demand, so it can never drift from the underlying turns.
    pub fn annotated(&self) -> bool {
        self.conversations.iter().all(Conversation::fully_annotated)
    }

    /// Looks up a conversation by id.
    pub fn get(&self, id: &str) -> Option<&Conversation> {
        self.conversations.iter().find(|c| c.id() == id)
    }

    /// Consumes the corpus, yielding its conversations.
    pub fn into_conversations(self) -> Vec<Conversation> {
        self.conversations
    }
}
