//! Reference formulas for the text-overlap metrics.
//!
//! These re-derive BLEU, ROUGE-L, the METEOR variant, and LCS length with
//! hash-map counting, full dynamic-programming tables, and per-order root
//! products — different shapes and float accumulation orders than the
//! implementations under test, which is the point: agreement to a small
//! tolerance is evidence, shared code would not be.

use std::collections::HashMap;

fn count_ngrams(tokens: &[String], n: usize) -> HashMap<Vec<String>, u64> {
    let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram.to_vec()).or_default() += 1;
        }
    }
    counts
}

/// Reference BLEU: clipped n-gram precision up to order
/// `min(4, hypothesis length)`, add-one smoothing for zero-match orders,
/// per-order roots multiplied together, and a brevity penalty against the
/// closest reference length. Returns a percentage.
pub fn reference_bleu(hypothesis: &[String], references: &[Vec<String>]) -> f64 {
    if hypothesis.is_empty() || references.is_empty() {
        return 0.0;
    }
    let max_order = 4.min(hypothesis.len());
    let mut product = 1.0f64;
    for n in 1..=max_order {
        let hyp_counts = count_ngrams(hypothesis, n);
        let ref_counts: Vec<HashMap<Vec<String>, u64>> =
            references.iter().map(|r| count_ngrams(r, n)).collect();
        let mut clipped = 0u64;
        for (gram, &count) in &hyp_counts {
            let best = ref_counts
                .iter()
                .map(|rc| rc.get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            clipped += count.min(best);
        }
        let slots = (hypothesis.len() - n + 1) as u64;
        let precision = if clipped == 0 {
            1.0 / (slots + 1) as f64
        } else {
            clipped as f64 / slots as f64
        };
        product *= precision.powf(1.0 / max_order as f64);
    }
    let ref_len = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&l| (l.abs_diff(hypothesis.len()), l))
        .expect("references are non-empty");
    let brevity = if hypothesis.len() < ref_len {
        (1.0 - ref_len as f64 / hypothesis.len() as f64).exp()
    } else {
        1.0
    };
    100.0 * brevity * product
}

/// Reference LCS length via the full dynamic-programming table.
pub fn reference_lcs(a: &[String], b: &[String]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table[a.len()][b.len()]
}

/// Reference ROUGE-L: LCS F1 as a percentage, zero when nothing aligns.
pub fn reference_rouge_l(hypothesis: &[String], reference: &[String]) -> f64 {
    let lcs = reference_lcs(hypothesis, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / hypothesis.len() as f64;
    let recall = lcs / reference.len() as f64;
    100.0 * (2.0 * precision * recall) / (precision + recall)
}

/// Reference METEOR variant: greedy leftmost exact unigram alignment with
/// a continuation preference, recall-weighted harmonic mean, and a cubed
/// fragmentation penalty. Returns a percentage.
pub fn reference_meteor(hypothesis: &[String], reference: &[String]) -> f64 {
    if hypothesis.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut taken = vec![false; reference.len()];
    // aligned[i] = Some(reference index) for each matched hypothesis token.
    let mut aligned: Vec<Option<usize>> = vec![None; hypothesis.len()];
    let mut last_ref: Option<usize> = None;
    for (i, token) in hypothesis.iter().enumerate() {
        let mut choice = None;
        if let Some(prev) = last_ref {
            let next = prev + 1;
            if next < reference.len() && !taken[next] && reference[next] == *token {
                choice = Some(next);
            }
        }
        if choice.is_none() {
            for (j, taken_flag) in taken.iter().enumerate() {
                if !taken_flag && reference[j] == *token {
                    choice = Some(j);
                    break;
                }
            }
        }
        if let Some(j) = choice {
            taken[j] = true;
            aligned[i] = Some(j);
            last_ref = Some(j);
        }
    }
    let pairs: Vec<(usize, usize)> = aligned
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect();
    if pairs.is_empty() {
        return 0.0;
    }
    let matches = pairs.len() as f64;
    let precision = matches / hypothesis.len() as f64;
    let recall = matches / reference.len() as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let mut chunks = 1.0f64;
    for pair in pairs.windows(2) {
        let hyp_adjacent = pair[1].0 == pair[0].0 + 1;
        let ref_adjacent = pair[1].1 == pair[0].1 + 1;
        if !(hyp_adjacent && ref_adjacent) {
            chunks += 1.0;
        }
    }
    let fragmentation = chunks / matches;
    let penalty = 0.5 * fragmentation * fragmentation * fragmentation;
    100.0 * f_mean * (1.0 - penalty)
}
