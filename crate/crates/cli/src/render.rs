//! Text renderings of mined flows and evaluation reports.
//!
//! [`render_colang`] writes a flow as a guard-railed dialogue policy: one
//! canonical form per line for the main path, with each digression
//! inserted directly after the line it branches from as an indented
//! `when`-guarded block. [`render_eval_table`] writes a corpus evaluation
//! as a fixed-width plain-text table with one row per held-out
//! conversation plus a mean row.

use flowmine_core::extract::DialogueFlow;
use flowmine_core::metrics::CorpusEvaluation;

/// Renders a flow with its digressions as an indented policy listing.
///
/// Main-path steps appear one per line. Each digression is inserted
/// immediately after its branch point's line, as a block opening with
/// `when <branch head>` indented two spaces, followed by the rest of the
/// digression path indented four. Digressions sharing a branch point keep
/// the flow's order (strongest first). A flow without digressions renders
/// as the bare main path. The output is deterministic and ends with a
/// newline.
pub fn render_colang(flow: &DialogueFlow) -> String {
    let mut lines: Vec<String> = Vec::with_capacity(flow.main.nodes.len());
    for node in &flow.main.nodes {
        lines.push(node.clone());
        for digression in &flow.digressions {
            if digression.branch_from != *node {
                continue;
            }
            let mut steps = digression.path.nodes.iter();
            if let Some(head) = steps.next() {
                lines.push(format!("  when {head}"));
            }
            for step in steps {
                lines.push(format!("    {step}"));
            }
        }
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn row(label: &str, cells: [String; 5]) -> String {
    format!(
        "{label:<24} {:>10} {:>10} {:>10} {:>10} {:>10}",
        cells[0], cells[1], cells[2], cells[3], cells[4]
    )
}

/// Renders a corpus evaluation as a fixed-width table: a header, one row
/// per held-out conversation, a separator, and the mean row. All floats
/// use fixed six-decimal formatting.
pub fn render_eval_table(evaluation: &CorpusEvaluation) -> String {
    let mut lines = Vec::with_capacity(evaluation.per_conversation.len() + 4);
    lines.push(row(
        "conversation",
        [
            "bleu".to_string(),
            "rouge_l".to_string(),
            "meteor".to_string(),
            "lcs".to_string(),
            "lcs_sim".to_string(),
        ],
    ));
    for scores in &evaluation.per_conversation {
        lines.push(row(
            &scores.conversation_id,
            [
                format!("{:.6}", scores.bleu),
                format!("{:.6}", scores.rouge_l),
                format!("{:.6}", scores.meteor),
                scores.lcs_exact.to_string(),
                scores.lcs_similarity.to_string(),
            ],
        ));
    }
    lines.push("-".repeat(79));
    let summary = &evaluation.summary;
    lines.push(row(
        "mean",
        [
            format!("{:.6}", summary.mean_bleu),
            format!("{:.6}", summary.mean_rouge_l),
            format!("{:.6}", summary.mean_meteor),
            format!("{:.6}", summary.mean_lcs_exact),
            format!("{:.6}", summary.mean_lcs_similarity),
        ],
    ));
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
