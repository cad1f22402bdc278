//! Node input features: a deterministic hashing text embedder (the
//! stand-in for language-model embeddings), a trainable size embedding,
//! and a loader for externally supplied embedding files.

use crate::doc_model::{BBox, Segment};
use std::collections::HashMap;
use thiserror::Error;

/// Signed feature-hashing text embedder. Deterministic given (text, seed);
/// mean-pooled over tokens and L2-normalized unless zero.
#[derive(Debug, Clone)]
pub struct TextEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl TextEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0);
        TextEmbedder { dim, seed }
    }

    /// Bucket index and sign for one token.
    pub fn bucket(&self, token: &str) -> (usize, f64) {
        let h = fnv1a64(self.seed, &token.to_lowercase());
        let index = (h % self.dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
        (index, sign)
    }

    pub fn embed(&self, tokens: &[&str]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        if tokens.is_empty() {
            return v;
        }
        for tok in tokens {
            let (i, s) = self.bucket(tok);
            v[i] += s;
        }
        let n = tokens.len() as f64;
        for x in &mut v {
            *x /= n;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

// FNV-1a over the seed (little-endian) followed by the token bytes.
// Hand-rolled so the mapping is stable across platforms and releases.
fn fnv1a64(seed: u64, text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in seed.to_le_bytes().iter().chain(text.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Linear projection of the normalized `[width, height]` 2-vector.
/// The weights live in the training ParamStore; this holds a snapshot.
#[derive(Debug, Clone)]
pub struct SizeEmbedder {
    pub dim: usize,
    /// Row-major 2 x dim.
    pub weights: Vec<f64>,
}

impl SizeEmbedder {
    pub fn new(dim: usize, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), 2 * dim);
        SizeEmbedder { dim, weights }
    }

    pub fn zeros(dim: usize) -> Self {
        SizeEmbedder::new(dim, vec![0.0; 2 * dim])
    }

    /// The raw normalized input features, [width/1000, height/1000].
    pub fn size_features(bbox: &BBox) -> [f64; 2] {
        [bbox.width() as f64 / 1000.0, bbox.height() as f64 / 1000.0]
    }

    pub fn embed(&self, bbox: &BBox) -> Vec<f64> {
        let f = Self::size_features(bbox);
        (0..self.dim)
            .map(|j| f[0] * self.weights[j] + f[1] * self.weights[self.dim + j])
            .collect()
    }
}

/// E_u: text part first, then size part; length dim_t + dim_m.
pub fn node_input(seg: &Segment, text_e: &TextEmbedder, size_e: &SizeEmbedder) -> Vec<f64> {
    let tokens = segment_tokens(seg);
    let mut v = text_e.embed(&tokens);
    v.extend(size_e.embed(&seg.bbox));
    v
}

/// Token texts of a segment; falls back to whitespace-splitting the segment
/// text when no word annotations are present (bag-of-words equivalent).
pub fn segment_tokens(seg: &Segment) -> Vec<&str> {
    if seg.tokens.is_empty() {
        seg.text.split_whitespace().collect()
    } else {
        seg.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("dimension mismatch on row {0}")]
    DimensionMismatch(usize),
    #[error("missing embedding for ({0}, {1})")]
    MissingKey(String, String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Externally supplied embedding vectors, keyed by (doc_id, key) where key
/// is a segment id or token position rendered as text.
#[derive(Debug, Clone)]
pub struct ExternalEmbeddings {
    pub dim: usize,
    map: HashMap<(String, String), Vec<f64>>,
}

impl ExternalEmbeddings {
    /// File format, tab-separated:
    ///   line 1: `docgraph-embeddings 1 <dim> <count>`
    ///   rows:   `<doc_id>\t<key>\t<f0> <f1> ...`
    pub fn load(raw: &str) -> Result<Self, EmbeddingError> {
        let mut lines = raw.lines();
        let header = lines
            .next()
            .ok_or_else(|| EmbeddingError::BadHeader("empty file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "docgraph-embeddings" || parts[1] != "1" {
            return Err(EmbeddingError::BadHeader(header.to_string()));
        }
        let dim: usize = parts[2]
            .parse()
            .map_err(|_| EmbeddingError::BadHeader(header.to_string()))?;
        let count: usize = parts[3]
            .parse()
            .map_err(|_| EmbeddingError::BadHeader(header.to_string()))?;
        let mut map = HashMap::new();
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.splitn(3, '\t').collect();
            if cols.len() != 3 {
                return Err(EmbeddingError::DimensionMismatch(row + 1));
            }
            let values: Result<Vec<f64>, _> =
                cols[2].split_whitespace().map(str::parse::<f64>).collect();
            let values = values.map_err(|_| EmbeddingError::DimensionMismatch(row + 1))?;
            if values.len() != dim {
                return Err(EmbeddingError::DimensionMismatch(row + 1));
            }
            map.insert((cols[0].to_string(), cols[1].to_string()), values);
        }
        if map.len() != count {
            return Err(EmbeddingError::BadHeader(format!(
                "header declares {count} rows, found {}",
                map.len()
            )));
        }
        Ok(ExternalEmbeddings { dim, map })
    }

    pub fn lookup(&self, doc_id: &str, key: &str) -> Result<&[f64], EmbeddingError> {
        self.map
            .get(&(doc_id.to_string(), key.to_string()))
            .map(|v| v.as_slice())
            .ok_or_else(|| EmbeddingError::MissingKey(doc_id.to_string(), key.to_string()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::Token;
    use proptest::prelude::*;

    #[test]
    fn empty_tokens_give_zero_vector() {
        let e = TextEmbedder::new(64, 42);
        assert_eq!(e.embed(&[]), vec![0.0; 64]);
    }

    #[test]
    fn deterministic() {
        let e = TextEmbedder::new(64, 42);
        assert_eq!(e.embed(&["invoice", "total"]), e.embed(&["invoice", "total"]));
    }

    #[test]
    fn single_token_frozen_bucket() {
        // Frozen from an independent FNV-1a evaluation:
        // fnv1a(le64(42) ++ "total") = 12525863476352188663, % 64 = 55, top bit set.
        let e = TextEmbedder::new(64, 42);
        let v = e.embed(&["total"]);
        for (i, x) in v.iter().enumerate() {
            if i == 55 {
                assert_eq!(*x, -1.0);
            } else {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn size_embed_identity_projection() {
        // dim 2 with an identity-like 2x2 projection
        let e = SizeEmbedder::new(2, vec![1.0, 0.0, 0.0, 1.0]);
        let v = e.embed(&BBox::new(0, 0, 100, 50));
        assert_eq!(v, vec![0.1, 0.05]);
        let swapped = e.embed(&BBox::new(0, 0, 50, 100));
        assert_eq!(swapped, vec![0.05, 0.1]);
    }

    #[test]
    fn size_embed_zero_projection() {
        let e = SizeEmbedder::zeros(8);
        assert_eq!(e.embed(&BBox::new(0, 0, 100, 50)), vec![0.0; 8]);
    }

    #[test]
    fn node_input_layout() {
        let text_e = TextEmbedder::new(64, 42);
        let size_e = SizeEmbedder::zeros(8);
        let seg = Segment {
            id: 0,
            text: "".into(),
            bbox: BBox::new(0, 0, 100, 50),
            tokens: vec![],
            label: None,
        };
        let v = node_input(&seg, &text_e, &size_e);
        assert_eq!(v.len(), 72);
        assert!(v[..64].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn node_input_prefers_word_annotations() {
        let text_e = TextEmbedder::new(16, 1);
        let size_e = SizeEmbedder::zeros(2);
        let seg = Segment {
            id: 0,
            text: "something else".into(),
            bbox: BBox::new(0, 0, 10, 10),
            tokens: vec![Token { text: "date".into(), bbox: BBox::new(0, 0, 10, 10) }],
            label: None,
        };
        let v = node_input(&seg, &text_e, &size_e);
        assert_eq!(&v[..16], text_e.embed(&["date"]).as_slice());
    }

    #[test]
    fn external_embeddings_load_and_lookup() {
        let raw = "docgraph-embeddings 1 16 2\nd0\t0\t1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16\nd0\t1\t0 0 0 0 0 0 0 0 0 0 0 0 0 0 0 0\n";
        let emb = ExternalEmbeddings::load(raw).unwrap();
        assert_eq!(emb.dim, 16);
        assert_eq!(emb.len(), 2);
        assert_eq!(emb.lookup("d0", "0").unwrap()[2], 3.0);
        assert!(matches!(
            emb.lookup("d0", "9"),
            Err(EmbeddingError::MissingKey(_, _))
        ));
    }

    #[test]
    fn external_embeddings_dimension_mismatch() {
        let raw = "docgraph-embeddings 1 16 1\nd0\t0\t1 2 3\n";
        assert!(matches!(
            ExternalEmbeddings::load(raw),
            Err(EmbeddingError::DimensionMismatch(1))
        ));
    }

    #[test]
    fn external_embeddings_bad_header() {
        assert!(matches!(
            ExternalEmbeddings::load("who knows\n"),
            Err(EmbeddingError::BadHeader(_))
        ));
    }

    proptest! {
        #[test]
        fn bag_semantics_and_unit_norm(
            tokens in proptest::collection::vec("[a-z]{1,8}", 0..10),
            perm_seed in 0u64..1000,
        ) {
            let e = TextEmbedder::new(32, 7);
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            let v = e.embed(&refs);
            // permutation invariance (bag semantics)
            let mut shuffled = refs.clone();
            let mut s = perm_seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(&v, &e.embed(&shuffled));
            // norm in {0, 1}
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
        }
    }
}
