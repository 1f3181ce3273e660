//! Deterministic synthetic corpus generator with known ground truth.
//!
//! The generator emits an ordering-domain corpus built around one
//! 36-step happy path, so every mined artifact can be checked against a
//! known answer:
//!
//! * **Happy path** — every conversation follows the same greeting-to-
//!   goodbye ordering flow; all conversations start and end on the same
//!   steps, so endpoint selection is unambiguous.
//! * **Digressions** — 15% of conversations branch after `bot offer
//!   extras` into an order-amendment exchange and 5% into an
//!   issue-report exchange, both rejoining at `user give thanks`. The
//!   amendment branch is the one a single-digression extraction should
//!   attach.
//! * **Verbose detour** — 30% of conversations insert a four-exchange
//!   payment-verification detour between `user share payment` and `bot
//!   process payment`. Its summed edge weight exceeds the direct edge, so
//!   total-weight path extraction is baited into it while
//!   bottleneck-widest extraction is not.
//! * **Noise** — six early slots each carry an off-task exchange in 36%
//!   of conversations (about 10% of all turns), thinning the direct
//!   edges without ever out-weighing them.
//! * **Repeats** — two quantity/delivery exchanges repeat once in 25% of
//!   conversations, adding back edges that no simple path can use.
//!
//! Everything is driven by one seeded RNG with a fixed draw order, so a
//! `(count, seed)` pair always yields the identical corpus.

use flowmine_core::corpus::{role_prefixed, Conversation, Corpus, SpeakerRole, Turn};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Default conversation count.
pub const DEFAULT_COUNT: usize = 300;

/// Default generator seed.
pub const DEFAULT_SEED: u64 = 17;

/// The happy path's canonical forms, user and agent strictly alternating
/// from a user opener.
const HAPPY: [&str; 36] = [
    "express greeting",     // user
    "return greeting",      // bot
    "request catalog",      // user
    "present catalog",      // bot   noise slot
    "browse listings",      // user
    "describe options",     // bot   noise slot
    "select product",       // user
    "confirm availability", // bot   noise slot
    "choose variant",       // user
    "quote price",          // bot   noise slot
    "accept price",         // user
    "request quantity",     // bot   noise slot, repeated exchange
    "state quantity",       // user
    "verify stock",         // bot   noise slot
    "provide address",      // user
    "validate address",     // bot
    "pick shipping",        // user
    "estimate delivery",    // bot   repeated exchange
    "approve estimate",     // user
    "request payment",      // bot
    "share payment",        // user  verbose detour follows
    "process payment",      // bot
    "await confirmation",   // user
    "issue receipt",        // bot
    "review receipt",       // user
    "summarize order",      // bot
    "approve summary",      // user
    "schedule dispatch",    // bot
    "note schedule",        // user
    "share tracking",       // bot
    "save tracking",        // user
    "offer extras",         // bot   digressions branch here
    "decline extras",       // user
    "acknowledge decline",  // bot
    "give thanks",          // user
    "say goodbye",          // bot
];

/// Indices of the bot turns followed by a noise exchange when selected.
const NOISE_SLOTS: [usize; 6] = [3, 5, 7, 9, 11, 13];

/// Per-slot off-task exchanges, user line then bot line.
const NOISE: [(&str, &str); 6] = [
    ("seek clarification", "provide clarification"),
    ("mention weather", "steer conversation"),
    ("crack joke", "respond politely"),
    ("ask purpose", "explain purpose"),
    ("test patience", "remain calm"),
    ("type gibberish", "request clarity"),
];

/// The payment-verification detour, bot and user strictly alternating.
const VERBOSE: [(SpeakerRole, &str); 8] = [
    (SpeakerRole::Agent, "flag verification"),
    (SpeakerRole::User, "supply code"),
    (SpeakerRole::Agent, "cite policy"),
    (SpeakerRole::User, "accept policy"),
    (SpeakerRole::Agent, "describe surcharge"),
    (SpeakerRole::User, "accept surcharge"),
    (SpeakerRole::Agent, "restate total"),
    (SpeakerRole::User, "confirm total"),
];

/// The order-amendment digression, user line then bot line.
const PRIMARY_DIGRESSION: (&str, &str) = ("amend quantity", "update figures");

/// The issue-report digression, user line then bot line.
const SECONDARY_DIGRESSION: (&str, &str) = ("report issue", "offer apology");

/// Percent of conversations taking the amendment digression.
const PRIMARY_PERCENT: usize = 15;

/// Percent of conversations taking the issue digression.
const SECONDARY_PERCENT: usize = 5;

/// Percent of conversations taking the verbose detour.
const VERBOSE_PERCENT: usize = 30;

/// Percent of conversations carrying each noise slot's exchange.
const NOISE_PERCENT: usize = 36;

/// Probability that a repeatable exchange repeats once.
const REPEAT_PROBABILITY: f64 = 0.25;

/// Which tail a conversation follows after `bot offer extras`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tail {
    Main,
    Primary,
    Secondary,
}

/// What the generator promises about its output, for checking mined
/// artifacts against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    /// The happy path as role-prefixed forms, in order.
    pub happy_path: Vec<String>,
    /// Every conversation's opening form, role-prefixed.
    pub source: String,
    /// Every conversation's closing form, role-prefixed.
    pub target: String,
    /// The main-path form the digressions branch from.
    pub primary_branch_from: String,
    /// The strongest digression's path from its head to the target,
    /// role-prefixed.
    pub primary_digression: Vec<String>,
    /// The weaker digression's head, role-prefixed.
    pub secondary_digression_head: String,
}

fn happy_role(index: usize) -> SpeakerRole {
    if index % 2 == 0 {
        SpeakerRole::User
    } else {
        SpeakerRole::Agent
    }
}

/// `selected` true flags over `count` slots, placed by one shuffle.
fn exact_flags(count: usize, selected: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut flags = vec![false; count];
    for flag in flags.iter_mut().take(selected.min(count)) {
        *flag = true;
    }
    flags.shuffle(rng);
    flags
}

fn percent_of(count: usize, percent: usize) -> usize {
    count * percent / 100
}

/// Generates `count` conversations from `seed`.
///
/// The same `(count, seed)` pair always produces the identical corpus.
/// Rates round down on small counts; `count` must be at least 1.
pub fn generate(count: usize, seed: u64) -> (Corpus, GroundTruth) {
    assert!(count >= 1, "cannot generate an empty corpus");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Fixed draw order: tails, verbose flags, per-slot noise flags, then
    // per-conversation repeat draws inside the build loop.
    let mut tails = Vec::with_capacity(count);
    tails.resize(percent_of(count, PRIMARY_PERCENT), Tail::Primary);
    tails.resize(
        percent_of(count, PRIMARY_PERCENT) + percent_of(count, SECONDARY_PERCENT),
        Tail::Secondary,
    );
    tails.resize(count, Tail::Main);
    tails.shuffle(&mut rng);
    let verbose = exact_flags(count, percent_of(count, VERBOSE_PERCENT), &mut rng);
    let noise: Vec<Vec<bool>> = (0..NOISE_SLOTS.len())
        .map(|_| exact_flags(count, percent_of(count, NOISE_PERCENT), &mut rng))
        .collect();

    let mut conversations = Vec::with_capacity(count);
    for c in 0..count {
        let repeat_quantity = rng.gen_bool(REPEAT_PROBABILITY);
        let repeat_delivery = rng.gen_bool(REPEAT_PROBABILITY);
        let mut steps: Vec<(SpeakerRole, &str)> = Vec::with_capacity(48);
        for (i, phrase) in HAPPY.iter().enumerate() {
            steps.push((happy_role(i), phrase));
            if let Some(slot) = NOISE_SLOTS.iter().position(|&s| s == i) {
                if noise[slot][c] {
                    steps.push((SpeakerRole::User, NOISE[slot].0));
                    steps.push((SpeakerRole::Agent, NOISE[slot].1));
                }
            }
            if i == 12 && repeat_quantity {
                steps.push((SpeakerRole::Agent, HAPPY[11]));
                steps.push((SpeakerRole::User, HAPPY[12]));
            }
            if i == 18 && repeat_delivery {
                steps.push((SpeakerRole::Agent, HAPPY[17]));
                steps.push((SpeakerRole::User, HAPPY[18]));
            }
            if i == 20 && verbose[c] {
                steps.extend(VERBOSE.iter().copied());
            }
            if i == 31 && tails[c] != Tail::Main {
                let (user_line, bot_line) = match tails[c] {
                    Tail::Primary => PRIMARY_DIGRESSION,
                    Tail::Secondary => SECONDARY_DIGRESSION,
                    Tail::Main => unreachable!(),
                };
                steps.push((SpeakerRole::User, user_line));
                steps.push((SpeakerRole::Agent, bot_line));
                steps.push((SpeakerRole::User, HAPPY[34]));
                steps.push((SpeakerRole::Agent, HAPPY[35]));
                break;
            }
        }
        let turns: Vec<Turn> = steps
            .iter()
            .map(|(role, phrase)| {
                Turn::annotated(*role, phrase, phrase).expect("phrases are non-empty")
            })
            .collect();
        let conversation = Conversation::new(
            &format!("synth-{c:03}"),
            turns,
            Some("synthetic-ordering".to_string()),
        )
        .expect("generated conversations are valid");
        conversations.push(conversation);
    }

    let corpus = Corpus::new(conversations).expect("generated ids are unique");
    let happy_path: Vec<String> = HAPPY
        .iter()
        .enumerate()
        .map(|(i, phrase)| role_prefixed(happy_role(i), phrase))
        .collect();
    let truth = GroundTruth {
        source: happy_path[0].clone(),
        target: happy_path[35].clone(),
        primary_branch_from: happy_path[31].clone(),
        primary_digression: vec![
            role_prefixed(SpeakerRole::User, PRIMARY_DIGRESSION.0),
            role_prefixed(SpeakerRole::Agent, PRIMARY_DIGRESSION.1),
            happy_path[34].clone(),
            happy_path[35].clone(),
        ],
        secondary_digression_head: role_prefixed(SpeakerRole::User, SECONDARY_DIGRESSION.0),
        happy_path,
    };
    (corpus, truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_with_form(corpus: &Corpus, form: &str) -> usize {
        corpus
            .conversations()
            .iter()
            .filter(|conv| {
                conv.turns()
                    .iter()
                    .any(|t| t.canonical_form() == Some(form))
            })
            .count()
    }

    #[test]
    fn the_same_seed_reproduces_the_corpus() {
        let (a, truth_a) = generate(120, 7);
        let (b, truth_b) = generate(120, 7);
        assert_eq!(a, b);
        assert_eq!(truth_a, truth_b);
        let (c, _) = generate(120, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn digression_and_detour_rates_are_exact() {
        let (corpus, _) = generate(300, DEFAULT_SEED);
        assert_eq!(corpus.len(), 300);
        assert_eq!(count_with_form(&corpus, PRIMARY_DIGRESSION.0), 45);
        assert_eq!(count_with_form(&corpus, SECONDARY_DIGRESSION.0), 15);
        assert_eq!(count_with_form(&corpus, "flag verification"), 90);
        assert_eq!(count_with_form(&corpus, NOISE[0].0), 108);
    }

    #[test]
    fn every_conversation_alternates_and_shares_the_endpoints() {
        let (corpus, truth) = generate(90, 3);
        for conv in corpus.conversations() {
            let turns = conv.turns();
            assert_eq!(turns[0].canonical_form(), Some("express greeting"));
            assert_eq!(turns.last().unwrap().canonical_form(), Some("say goodbye"));
            for (i, turn) in turns.iter().enumerate() {
                assert_eq!(turn.role(), happy_role(i), "conversation {}", conv.id());
            }
        }
        assert_eq!(truth.source, "user express greeting");
        assert_eq!(truth.target, "bot say goodbye");
        assert!(corpus.annotated());
    }

    #[test]
    fn digressing_conversations_skip_the_decline_exchange() {
        let (corpus, _) = generate(300, DEFAULT_SEED);
        for conv in corpus.conversations() {
            let forms: Vec<&str> = conv
                .turns()
                .iter()
                .map(|t| t.canonical_form().unwrap())
                .collect();
            if forms.contains(&PRIMARY_DIGRESSION.0) || forms.contains(&SECONDARY_DIGRESSION.0) {
                assert!(!forms.contains(&"decline extras"), "{}", conv.id());
                assert!(!forms.contains(&"acknowledge decline"), "{}", conv.id());
                assert!(forms.contains(&"give thanks"), "{}", conv.id());
            } else {
                assert!(forms.contains(&"decline extras"), "{}", conv.id());
            }
        }
    }

    #[test]
    fn noise_is_about_a_tenth_of_all_turns() {
        let (corpus, _) = generate(300, DEFAULT_SEED);
        let noise_forms: Vec<&str> = NOISE.iter().flat_map(|(u, b)| [*u, *b]).collect();
        let mut total = 0usize;
        let mut noisy = 0usize;
        for conv in corpus.conversations() {
            for turn in conv.turns() {
                total += 1;
                if noise_forms.contains(&turn.canonical_form().unwrap()) {
                    noisy += 1;
                }
            }
        }
        let share = noisy as f64 / total as f64;
        assert!((0.08..=0.12).contains(&share), "noise share {share}");
    }

    #[test]
    fn ground_truth_matches_the_happy_path_constants() {
        let (_, truth) = generate(40, 1);
        assert_eq!(truth.happy_path.len(), 36);
        assert_eq!(truth.happy_path[0], "user express greeting");
        assert_eq!(truth.happy_path[35], "bot say goodbye");
        assert_eq!(truth.primary_branch_from, "bot offer extras");
        assert_eq!(
            truth.primary_digression,
            vec![
                "user amend quantity".to_string(),
                "bot update figures".to_string(),
                "user give thanks".to_string(),
                "bot say goodbye".to_string(),
            ]
        );
        assert_eq!(truth.secondary_digression_head, "user report issue");
    }
}
