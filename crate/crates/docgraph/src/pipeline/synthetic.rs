//! Desk-scale synthetic form corpus: grids of key-value rows plus
//! distractor segments.
//!
//! Construction guarantees: every key ("question") has its paired value
//! ("answer") as its East D-LoS neighbor (the horizontal gap is kept
//! strictly below the inter-row gap), and value/distractor texts are drawn
//! from one shared vocabulary so the entity label is predictable from the
//! neighborhood but not from the text alone.

use crate::doc_model::{BBox, Document, Segment, Token};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const KEY_VOCAB: &[&str] = &[
    "invoice", "date", "total", "name", "address", "phone", "amount", "order", "customer",
    "email", "account", "balance",
];

const SHARED_VOCAB: &[&str] = &[
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india",
    "juliet", "kilo", "lima", "mike", "november", "oscar", "papa",
];

const ROW_STEP: i64 = 46;
const ROW_HEIGHT: i64 = 20;
// Key-to-value gap stays below ROW_STEP - ROW_HEIGHT so the paired value is
// always strictly nearer than anything in an adjacent row.
const MAX_VALUE_GAP: i64 = 22;

pub fn generate_synthetic_corpus(
    seed: u64,
    n_docs: usize,
    nodes_lo: usize,
    nodes_hi: usize,
) -> Vec<Document> {
    assert!(nodes_lo >= 2 && nodes_hi >= nodes_lo);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n_docs)
        .map(|i| generate_document(&mut rng, i, nodes_lo, nodes_hi))
        .collect()
}

fn generate_document(
    rng: &mut ChaCha20Rng,
    index: usize,
    nodes_lo: usize,
    nodes_hi: usize,
) -> Document {
    let target = rng.gen_range(nodes_lo..=nodes_hi);
    let mut segments: Vec<Segment> = Vec::with_capacity(target);
    let mut row = 0;
    while segments.len() < target {
        let y1 = 30 + row * ROW_STEP;
        if y1 + ROW_HEIGHT > 990 {
            break;
        }
        row += 1;
        // First row is always a key-value pair so every document has at
        // least one question and one answer.
        let key_value_row = segments.is_empty() || rng.gen_bool(0.7);
        if key_value_row {
            emit_key_value_row(rng, &mut segments, y1, target);
        } else {
            emit_distractor_row(rng, &mut segments, y1, target);
        }
    }
    let label_set = vec!["answer".to_string(), "other".to_string(), "question".to_string()];
    Document {
        doc_id: format!("synth-{index:04}"),
        page_size: (1000, 1000),
        segments,
        label_set,
    }
}

fn emit_key_value_row(rng: &mut ChaCha20Rng, segments: &mut Vec<Segment>, y1: i64, target: usize) {
    let key_idx = rng.gen_range(0..KEY_VOCAB.len());
    let key_x1 = 30 + rng.gen_range(0..40);
    let key_w = 70 + rng.gen_range(0..60);
    push_segment(
        segments,
        vec![KEY_VOCAB[key_idx].to_string()],
        key_x1,
        y1,
        key_w,
        Some("question"),
    );
    if segments.len() >= target {
        return;
    }
    // Value text correlates with the key but draws from the shared
    // vocabulary, which distractors also use.
    let base = (key_idx * 3 + rng.gen_range(0..3)) % SHARED_VOCAB.len();
    let mut words = vec![SHARED_VOCAB[base].to_string()];
    if rng.gen_bool(0.5) {
        words.push(SHARED_VOCAB[rng.gen_range(0..SHARED_VOCAB.len())].to_string());
    }
    let gap = rng.gen_range(8..=MAX_VALUE_GAP);
    let value_x1 = key_x1 + key_w + gap;
    let value_w = 60 + 40 * words.len() as i64 + rng.gen_range(0..30);
    push_segment(segments, words, value_x1, y1, value_w, Some("answer"));
    // Occasionally a trailing distractor further East in the same row; the
    // value sits between it and the key, so the East guarantee holds.
    if segments.len() < target && rng.gen_bool(0.3) {
        let dx1 = value_x1 + value_w + rng.gen_range(40..100);
        let words = distractor_words(rng);
        let w = 50 + 35 * words.len() as i64;
        if dx1 + w <= 990 {
            push_segment(segments, words, dx1, y1, w, Some("other"));
        }
    }
}

fn emit_distractor_row(rng: &mut ChaCha20Rng, segments: &mut Vec<Segment>, y1: i64, target: usize) {
    let count = 1 + rng.gen_range(0..2usize);
    let mut x1 = 40 + rng.gen_range(0..120);
    for _ in 0..count {
        if segments.len() >= target {
            break;
        }
        let words = distractor_words(rng);
        let w = 50 + 35 * words.len() as i64 + rng.gen_range(0..30);
        if x1 + w > 990 {
            break;
        }
        push_segment(segments, words, x1, y1, w, Some("other"));
        x1 += w + rng.gen_range(60..160);
    }
}

fn distractor_words(rng: &mut ChaCha20Rng) -> Vec<String> {
    let mut words = vec![SHARED_VOCAB[rng.gen_range(0..SHARED_VOCAB.len())].to_string()];
    if rng.gen_bool(0.4) {
        words.push(SHARED_VOCAB[rng.gen_range(0..SHARED_VOCAB.len())].to_string());
    }
    words
}

fn push_segment(
    segments: &mut Vec<Segment>,
    words: Vec<String>,
    x1: i64,
    y1: i64,
    width: i64,
    label: Option<&str>,
) {
    let id = segments.len();
    let bbox = BBox::new(x1, y1, x1 + width, y1 + ROW_HEIGHT);
    let n = words.len() as i64;
    let tokens = words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let tx1 = x1 + width * i as i64 / n;
            let tx2 = x1 + width * (i as i64 + 1) / n;
            Token {
                text: w.clone(),
                bbox: BBox::new(tx1, y1, tx2, y1 + ROW_HEIGHT),
            }
        })
        .collect();
    segments.push(Segment {
        id,
        text: words.join(" "),
        bbox,
        tokens,
        label: label.map(str::to_string),
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::{serialize_generic, validate_document};
    use crate::geometry::dlos_brute_force;

    #[test]
    fn deterministic_bytes() {
        let a = generate_synthetic_corpus(7, 5, 10, 20);
        let b = generate_synthetic_corpus(7, 5, 10, 20);
        let bytes_a: Vec<u8> = a.iter().flat_map(serialize_generic).collect();
        let bytes_b: Vec<u8> = b.iter().flat_map(serialize_generic).collect();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn documents_validate_and_have_both_entity_labels() {
        for doc in generate_synthetic_corpus(3, 20, 20, 40) {
            assert!(validate_document(&doc).is_usable(), "{}", doc.doc_id);
            let questions = doc.segments.iter().filter(|s| s.label.as_deref() == Some("question")).count();
            let answers = doc.segments.iter().filter(|s| s.label.as_deref() == Some("answer")).count();
            assert!(questions >= 1, "{} has no question", doc.doc_id);
            assert!(answers >= 1, "{} has no answer", doc.doc_id);
            assert!(doc.node_count() >= 2);
        }
    }

    #[test]
    fn every_key_pairs_east_with_its_value() {
        // Oracle check over the generated corpus: the East D-LoS neighbor of
        // each question segment is the answer segment that follows it.
        for doc in generate_synthetic_corpus(11, 30, 20, 40) {
            for seg in &doc.segments {
                if seg.label.as_deref() != Some("question") {
                    continue;
                }
                let value = doc.segments.get(seg.id + 1);
                let value = match value {
                    Some(v) if v.label.as_deref() == Some("answer") && v.bbox.y1 == seg.bbox.y1 => v,
                    // A key emitted as the very last segment has no value.
                    _ => continue,
                };
                let dlos = dlos_brute_force(seg.id, &doc);
                assert_eq!(
                    dlos.neighbors[0].map(|(id, _)| id),
                    Some(value.id),
                    "doc {} key {}",
                    doc.doc_id,
                    seg.id
                );
            }
        }
    }
}
