//! Entity-level precision/recall/F1 over BIO tag sequences, plus the
//! paired sign test used by the experiment comparisons.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction and gold sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_count: usize,
    pub pred_count: usize,
    pub correct: usize,
    pub per_label: BTreeMap<String, LabelMetrics>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelMetrics {
    pub gold: usize,
    pub pred: usize,
    pub correct: usize,
}

impl LabelMetrics {
    pub fn f1(&self) -> f64 {
        let p = safe_div(self.correct, self.pred);
        let r = safe_div(self.correct, self.gold);
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn safe_div(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// An entity span: [start, end) token range plus label.
pub type Span = (usize, usize, String);

/// Extract maximal BIO spans. A span starts at `B-X`, or at an `I-X` that
/// does not continue a span of the same type (conlleval's lenient reading),
/// and ends before the first tag that is not `I-X` of the same type.
pub fn extract_spans(tags: &[String]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let (kind, label) = split_tag(tag);
        let continues = matches!(
            (&current, kind),
            (Some((_, cur)), "I") if *cur == label
        );
        if !continues {
            if let Some((start, lab)) = current.take() {
                spans.push((start, i, lab));
            }
            if kind == "B" || kind == "I" {
                current = Some((i, label.to_string()));
            }
        }
    }
    if let Some((start, lab)) = current {
        spans.push((start, tags.len(), lab));
    }
    spans
}

fn split_tag(tag: &str) -> (&str, &str) {
    match tag.split_once('-') {
        Some((k @ ("B" | "I"), label)) => (k, label),
        _ => ("O", ""),
    }
}

/// Micro-averaged entity-level metrics with exact (span, label) matching.
/// With zero gold and zero predicted entities all scores are 0 (flagged by
/// `gold_count == 0`).
pub fn evaluate_entities(
    pred: &[Vec<String>],
    gold: &[Vec<String>],
) -> Result<EntityMetrics, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), gold.len()));
    }
    let mut per_label: BTreeMap<String, LabelMetrics> = BTreeMap::new();
    let (mut gold_count, mut pred_count, mut correct) = (0, 0, 0);
    for (p_seq, g_seq) in pred.iter().zip(gold) {
        if p_seq.len() != g_seq.len() {
            return Err(MetricsError::LengthMismatch(p_seq.len(), g_seq.len()));
        }
        let p_spans = extract_spans(p_seq);
        let g_spans = extract_spans(g_seq);
        gold_count += g_spans.len();
        pred_count += p_spans.len();
        for s in &g_spans {
            per_label.entry(s.2.clone()).or_default().gold += 1;
        }
        for s in &p_spans {
            let entry = per_label.entry(s.2.clone()).or_default();
            entry.pred += 1;
            if g_spans.contains(s) {
                correct += 1;
                entry.correct += 1;
            }
        }
    }
    let precision = safe_div(correct, pred_count);
    let recall = safe_div(correct, gold_count);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EntityMetrics {
        precision,
        recall,
        f1,
        gold_count,
        pred_count,
        correct,
        per_label,
    })
}

/// One-sided paired sign test: probability of at least `wins` successes in
/// `wins + losses` fair coin flips. Ties are dropped beforehand.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in wins..=n {
        p += binomial(n, k);
    }
    p / 2f64.powi(n as i32)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
