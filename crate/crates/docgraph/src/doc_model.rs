//! Parsing, validation, and normalization of OCR document annotations.
//!
//! Two input formats are supported: the public FUNSD annotation JSON
//! (`{"form": [...]}`) and a generic JSONL format with one segment object per
//! line. Both parse into the same canonical [`Document`], whose coordinates
//! are normalized onto an integer 0-1000 grid (y grows downward).

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Axis-aligned bounding box, integer coordinates, y grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl BBox {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> i64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> i64 {
        self.y2 - self.y1
    }

    /// Center as floating point, in the box's own units.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x1 + self.x2) as f64 / 2.0,
            (self.y1 + self.y2) as f64 / 2.0,
        )
    }

    pub fn contains(&self, other: &BBox, tolerance: i64) -> bool {
        other.x1 >= self.x1 - tolerance
            && other.y1 >= self.y1 - tolerance
            && other.x2 <= self.x2 + tolerance
            && other.y2 <= self.y2 + tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    pub text: String,
    pub bbox: BBox,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub page_size: (i64, i64),
    pub segments: Vec<Segment>,
    pub label_set: Vec<String>,
}

impl Document {
    pub fn node_count(&self) -> usize {
        self.segments.len()
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("document has no segments")]
    EmptyDocument,
    #[error("malformed line {0}: {1}")]
    MalformedLine(usize, String),
    #[error("duplicate segment id {0}")]
    DuplicateId(usize),
    #[error("page dimension is zero")]
    ZeroPageDimension,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<(String, String)>,
    pub warnings: Vec<(String, String)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    pub fn is_usable(&self) -> bool {
        self.errors.is_empty()
    }
}

// --- FUNSD schema mirrors ---

#[derive(Deserialize)]
struct FunsdFile {
    form: Vec<FunsdEntry>,
}

#[derive(Deserialize)]
struct FunsdEntry {
    #[allow(dead_code)]
    id: Option<serde_json::Value>,
    text: Option<String>,
    #[serde(rename = "box")]
    bbox: Option<[i64; 4]>,
    label: Option<String>,
    words: Option<Vec<FunsdWord>>,
}

#[derive(Deserialize)]
struct FunsdWord {
    text: String,
    #[serde(rename = "box")]
    bbox: [i64; 4],
}

/// Parse a FUNSD annotation file. Segment ids are re-indexed contiguously
/// and labels lowercased. Words with empty text are dropped.
pub fn parse_funsd(raw: &[u8], doc_id: &str, page_size: (i64, i64)) -> Result<Document, ParseError> {
    let file: FunsdFile =
        serde_json::from_slice(raw).map_err(|e| ParseError::MalformedJson(e.to_string()))?;
    if file.form.is_empty() {
        return Err(ParseError::EmptyDocument);
    }
    let mut segments = Vec::with_capacity(file.form.len());
    for (idx, entry) in file.form.into_iter().enumerate() {
        let bbox = entry
            .bbox
            .ok_or_else(|| ParseError::MissingField("box".into()))?;
        let tokens: Vec<Token> = entry
            .words
            .unwrap_or_default()
            .into_iter()
            .filter(|w| !w.text.trim().is_empty())
            .map(|w| Token {
                text: w.text.trim().to_string(),
                bbox: BBox::new(w.bbox[0], w.bbox[1], w.bbox[2], w.bbox[3]),
            })
            .collect();
        // Words are authoritative when the segment text is absent.
        let text = match entry.text {
            Some(t) if !t.trim().is_empty() => t.trim().to_string(),
            _ => tokens
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        };
        segments.push(Segment {
            id: idx,
            text,
            bbox: BBox::new(bbox[0], bbox[1], bbox[2], bbox[3]),
            tokens,
            label: entry.label.map(|l| l.to_lowercase()),
        });
    }
    let label_set = collect_labels(&segments);
    Ok(Document {
        doc_id: doc_id.to_string(),
        page_size,
        segments,
        label_set,
    })
}

#[derive(Serialize, Deserialize)]
struct GenericLine {
    id: usize,
    text: Option<String>,
    #[serde(rename = "box")]
    bbox: [i64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    words: Option<Vec<GenericWord>>,
}

#[derive(Serialize, Deserialize)]
struct GenericWord {
    text: String,
    #[serde(rename = "box")]
    bbox: [i64; 4],
}

/// Parse the generic JSONL segment format: one segment object per line with
/// fields `id`, `text`, `box`, optional `label` and `words`. Coordinates are
/// expected to be on the 0-1000 grid already (page_size is (1000, 1000)).
pub fn parse_generic(raw: &[u8], doc_id: &str) -> Result<Document, ParseError> {
    let text = std::str::from_utf8(raw)
        .map_err(|e| ParseError::MalformedJson(e.to_string()))?;
    let mut segments = Vec::new();
    let mut seen = BTreeSet::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: GenericLine = serde_json::from_str(line)
            .map_err(|e| ParseError::MalformedLine(line_no + 1, e.to_string()))?;
        if !seen.insert(entry.id) {
            return Err(ParseError::DuplicateId(entry.id));
        }
        let tokens: Vec<Token> = entry
            .words
            .unwrap_or_default()
            .into_iter()
            .filter(|w| !w.text.trim().is_empty())
            .map(|w| Token {
                text: w.text.trim().to_string(),
                bbox: BBox::new(w.bbox[0], w.bbox[1], w.bbox[2], w.bbox[3]),
            })
            .collect();
        let seg_text = match entry.text {
            Some(t) if !t.trim().is_empty() => t.trim().to_string(),
            _ => tokens
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        };
        segments.push(Segment {
            id: entry.id,
            text: seg_text,
            bbox: BBox::new(entry.bbox[0], entry.bbox[1], entry.bbox[2], entry.bbox[3]),
            tokens,
            label: entry.label.map(|l| l.to_lowercase()),
        });
    }
    if segments.is_empty() {
        return Err(ParseError::EmptyDocument);
    }
    // Re-index contiguously, preserving input order.
    for (idx, seg) in segments.iter_mut().enumerate() {
        seg.id = idx;
    }
    let label_set = collect_labels(&segments);
    Ok(Document {
        doc_id: doc_id.to_string(),
        page_size: (1000, 1000),
        segments,
        label_set,
    })
}

/// Serialize a document to the generic JSONL format (inverse of
/// [`parse_generic`] for normalized documents).
pub fn serialize_generic(doc: &Document) -> Vec<u8> {
    let mut out = String::new();
    for seg in &doc.segments {
        let line = GenericLine {
            id: seg.id,
            text: Some(seg.text.clone()),
            bbox: [seg.bbox.x1, seg.bbox.y1, seg.bbox.x2, seg.bbox.y2],
            label: seg.label.clone(),
            words: if seg.tokens.is_empty() {
                None
            } else {
                Some(
                    seg.tokens
                        .iter()
                        .map(|t| GenericWord {
                            text: t.text.clone(),
                            bbox: [t.bbox.x1, t.bbox.y1, t.bbox.x2, t.bbox.y2],
                        })
                        .collect(),
                )
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("segment serializes"));
        out.push('\n');
    }
    out.into_bytes()
}

/// Canonical single-document JSON (stable field order, for diff-ability).
pub fn document_to_json(doc: &Document) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(doc).expect("document serializes");
    bytes.push(b'\n');
    bytes
}

pub fn document_from_json(raw: &[u8]) -> Result<Document, ParseError> {
    serde_json::from_slice(raw).map_err(|e| ParseError::MalformedJson(e.to_string()))
}

fn collect_labels(segments: &[Segment]) -> Vec<String> {
    let set: BTreeSet<String> = segments
        .iter()
        .filter_map(|s| s.label.clone())
        .collect();
    set.into_iter().collect()
}

/// Scale every coordinate onto the 0-1000 grid using the page size.
/// Idempotent once page_size is (1000, 1000).
pub fn normalize_coords(doc: &Document) -> Result<Document, ParseError> {
    let (w, h) = doc.page_size;
    if w <= 0 || h <= 0 {
        return Err(ParseError::ZeroPageDimension);
    }
    let scale = |c: i64, dim: i64| -> i64 {
        ((c as f64) * 1000.0 / (dim as f64)).round() as i64
    };
    let map_box = |b: &BBox| BBox::new(scale(b.x1, w), scale(b.y1, h), scale(b.x2, w), scale(b.y2, h));
    let segments = doc
        .segments
        .iter()
        .map(|s| Segment {
            id: s.id,
            text: s.text.clone(),
            bbox: map_box(&s.bbox),
            tokens: s
                .tokens
                .iter()
                .map(|t| Token {
                    text: t.text.clone(),
                    bbox: map_box(&t.bbox),
                })
                .collect(),
            label: s.label.clone(),
        })
        .collect();
    Ok(Document {
        doc_id: doc.doc_id.clone(),
        page_size: (1000, 1000),
        segments,
        label_set: doc.label_set.clone(),
    })
}

/// Check a (normalized) document. Inverted boxes, out-of-range coordinates
/// and empty text are errors; zero-area boxes and tokens escaping their
/// segment box are warnings, since imperfect OCR produces both.
pub fn validate_document(doc: &Document) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    if doc.segments.is_empty() {
        errors.push(("EmptyDocument".into(), "document has no segments".into()));
    }
    for seg in &doc.segments {
        let b = &seg.bbox;
        if b.x1 > b.x2 || b.y1 > b.y2 {
            errors.push((
                "InvertedBox".into(),
                format!("segment {} has inverted bbox", seg.id),
            ));
            continue;
        }
        if b.x1 < 0 || b.y1 < 0 || b.x2 > 1000 || b.y2 > 1000 {
            errors.push((
                "OutOfRange".into(),
                format!("segment {} bbox outside the 0-1000 grid", seg.id),
            ));
        }
        if seg.text.trim().is_empty() {
            errors.push((
                "EmptyText".into(),
                format!("segment {} has empty text", seg.id),
            ));
        }
        if b.width() == 0 && b.height() == 0 {
            warnings.push((
                "ZeroAreaBox".into(),
                format!("segment {} has a zero-area bbox", seg.id),
            ));
        }
        for tok in &seg.tokens {
            if !seg.bbox.contains(&tok.bbox, 2) {
                warnings.push((
                    "TokenOutsideSegment".into(),
                    format!("segment {} token {:?} escapes its segment box", seg.id, tok.text),
                ));
            }
        }
    }
    ValidationReport { errors, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn funsd_sample() -> &'static [u8] {
        br#"{"form":[{"id":0,"text":"Date:","box":[10,10,60,30],"label":"question","words":[{"text":"Date:","box":[10,10,60,30]}]}]}"#
    }

    #[test]
    fn funsd_single_segment() {
        let doc = parse_funsd(funsd_sample(), "d0", (1000, 1000)).unwrap();
        assert_eq!(doc.segments.len(), 1);
        let seg = &doc.segments[0];
        assert_eq!(seg.label.as_deref(), Some("question"));
        assert_eq!(seg.bbox, BBox::new(10, 10, 60, 30));
        assert_eq!(seg.tokens.len(), 1);
        assert_eq!(doc.label_set, vec!["question".to_string()]);
    }

    #[test]
    fn funsd_empty_form_rejected() {
        let err = parse_funsd(br#"{"form":[]}"#, "d0", (1000, 1000)).unwrap_err();
        assert!(matches!(err, ParseError::EmptyDocument));
    }

    #[test]
    fn funsd_missing_box_rejected() {
        let raw = br#"{"form":[{"id":0,"text":"x","label":"other","words":[]}]}"#;
        let err = parse_funsd(raw, "d0", (1000, 1000)).unwrap_err();
        assert!(matches!(err, ParseError::MissingField(ref f) if f == "box"));
    }

    #[test]
    fn funsd_text_from_words_when_absent() {
        let raw = br#"{"form":[{"id":0,"box":[0,0,50,10],"label":"other","words":[{"text":"a","box":[0,0,20,10]},{"text":"b","box":[25,0,50,10]}]}]}"#;
        let doc = parse_funsd(raw, "d0", (1000, 1000)).unwrap();
        assert_eq!(doc.segments[0].text, "a b");
    }

    #[test]
    fn generic_two_lines() {
        let raw = b"{\"id\":0,\"text\":\"a\",\"box\":[0,0,10,10]}\n{\"id\":1,\"text\":\"b\",\"box\":[20,0,30,10]}\n";
        let doc = parse_generic(raw, "d0").unwrap();
        assert_eq!(doc.segments.len(), 2);
        assert_eq!(doc.segments[1].id, 1);
    }

    #[test]
    fn generic_duplicate_id() {
        let raw = b"{\"id\":3,\"text\":\"a\",\"box\":[0,0,10,10]}\n{\"id\":3,\"text\":\"b\",\"box\":[20,0,30,10]}\n";
        let err = parse_generic(raw, "d0").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateId(3)));
    }

    #[test]
    fn generic_missing_box_is_malformed_line() {
        let raw = b"{\"id\":0,\"text\":\"a\",\"box\":[0,0,10,10]}\n{\"id\":1,\"text\":\"b\"}\n";
        let err = parse_generic(raw, "d0").unwrap_err();
        assert!(matches!(err, ParseError::MalformedLine(2, _)));
    }

    #[test]
    fn generic_round_trip() {
        let raw = b"{\"id\":0,\"text\":\"a b\",\"box\":[0,0,10,10],\"label\":\"question\",\"words\":[{\"text\":\"a\",\"box\":[0,0,4,10]},{\"text\":\"b\",\"box\":[5,0,10,10]}]}\n";
        let doc = parse_generic(raw, "d0").unwrap();
        let bytes = serialize_generic(&doc);
        let doc2 = parse_generic(&bytes, "d0").unwrap();
        assert_eq!(doc, doc2);
    }

    #[test]
    fn normalize_identity_on_unit_grid() {
        let doc = parse_generic(b"{\"id\":0,\"text\":\"a\",\"box\":[100,100,200,200]}\n", "d").unwrap();
        let norm = normalize_coords(&doc).unwrap();
        assert_eq!(norm.segments[0].bbox, BBox::new(100, 100, 200, 200));
    }

    #[test]
    fn normalize_scales_linearly() {
        let mut doc = parse_generic(b"{\"id\":0,\"text\":\"a\",\"box\":[100,50,300,100]}\n", "d").unwrap();
        doc.page_size = (2000, 1000);
        let norm = normalize_coords(&doc).unwrap();
        assert_eq!(norm.segments[0].bbox, BBox::new(50, 50, 150, 100));
        assert_eq!(norm.page_size, (1000, 1000));
    }

    #[test]
    fn normalize_idempotent() {
        let mut doc = parse_generic(b"{\"id\":0,\"text\":\"a\",\"box\":[123,45,678,90]}\n", "d").unwrap();
        doc.page_size = (1700, 2200);
        let once = normalize_coords(&doc).unwrap();
        let twice = normalize_coords(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn normalize_zero_page_dimension() {
        let mut doc = parse_generic(b"{\"id\":0,\"text\":\"a\",\"box\":[0,0,1,1]}\n", "d").unwrap();
        doc.page_size = (0, 800);
        assert!(matches!(normalize_coords(&doc), Err(ParseError::ZeroPageDimension)));
    }

    #[test]
    fn validate_clean_document() {
        let doc = parse_generic(b"{\"id\":0,\"text\":\"a\",\"box\":[0,0,10,10]}\n", "d").unwrap();
        assert!(validate_document(&doc).is_clean());
    }

    #[test]
    fn validate_inverted_box() {
        let mut doc = parse_generic(b"{\"id\":0,\"text\":\"a\",\"box\":[0,0,10,10]}\n", "d").unwrap();
        doc.segments[0].bbox = BBox::new(10, 0, 0, 10);
        let report = validate_document(&doc);
        assert!(report.errors.iter().any(|(c, _)| c == "InvertedBox"));
    }

    #[test]
    fn validate_zero_area_is_warning() {
        let mut doc = parse_generic(b"{\"id\":0,\"text\":\"a\",\"box\":[5,5,5,5]}\n", "d").unwrap();
        doc.segments[0].bbox = BBox::new(5, 5, 5, 5);
        let report = validate_document(&doc);
        assert!(report.errors.is_empty());
        assert!(report.warnings.iter().any(|(c, _)| c == "ZeroAreaBox"));
    }

    #[test]
    fn canonical_json_round_trip() {
        let doc = parse_generic(b"{\"id\":0,\"text\":\"a\",\"box\":[0,0,10,10],\"label\":\"answer\"}\n", "d").unwrap();
        let bytes = document_to_json(&doc);
        let doc2 = document_from_json(&bytes).unwrap();
        assert_eq!(doc, doc2);
    }
}
