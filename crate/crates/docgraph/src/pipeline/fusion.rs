//! Token-level fusion: h^C_token = [h^L_token ; h^G_segment(token)], with
//! the segment's graph embedding broadcast to each of its tokens.

use crate::doc_model::Document;
use crate::encoder::{segment_tokens, TextEmbedder};
use crate::gnn::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuseError {
    #[error("no graph embedding for segment {0}")]
    MissingSegmentEmbedding(usize),
    #[error("alignment length {0} does not match token count {1}")]
    AlignmentMismatch(usize, usize),
}

/// Per-token fused representation matrix plus the token -> segment map.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedTokenMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub alignment: Vec<usize>,
}

impl FusedTokenMatrix {
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_rows(&self.rows)
    }
}

/// The document's token sequence in reading order (segment order, then
/// token order inside each segment), with its token -> segment alignment.
pub fn token_view(doc: &Document) -> (Vec<String>, Vec<usize>) {
    let mut texts = Vec::new();
    let mut alignment = Vec::new();
    for seg in &doc.segments {
        for tok in segment_tokens(seg) {
            texts.push(tok.to_string());
            alignment.push(seg.id);
        }
    }
    (texts, alignment)
}

/// Per-token text embeddings (each token embedded on its own), the h^L
/// stand-in.
pub fn token_hl(texts: &[String], embedder: &TextEmbedder) -> Vec<Vec<f64>> {
    texts.iter().map(|t| embedder.embed(&[t.as_str()])).collect()
}

/// Concatenate each token's h^L with its segment's h^G.
pub fn fuse(
    tokens_hl: &[Vec<f64>],
    alignment: &[usize],
    hg: &[Vec<f64>],
) -> Result<FusedTokenMatrix, FuseError> {
    if tokens_hl.len() != alignment.len() {
        return Err(FuseError::AlignmentMismatch(alignment.len(), tokens_hl.len()));
    }
    let dl = tokens_hl.first().map_or(0, Vec::len);
    let dg = hg.first().map_or(0, Vec::len);
    let mut rows = Vec::with_capacity(tokens_hl.len());
    for (hl, &seg) in tokens_hl.iter().zip(alignment) {
        let g = hg.get(seg).ok_or(FuseError::MissingSegmentEmbedding(seg))?;
        let mut row = Vec::with_capacity(dl + dg);
        row.extend_from_slice(hl);
        row.extend_from_slice(g);
        rows.push(row);
    }
    Ok(FusedTokenMatrix {
        dim: dl + dg,
        rows,
        alignment: alignment.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fused_dim_is_sum_of_parts() {
        let hl = vec![vec![0.0; 16], vec![1.0; 16]];
        let hg = vec![vec![2.0; 8]];
        let fused = fuse(&hl, &[0, 0], &hg).unwrap();
        assert_eq!(fused.dim, 24);
        assert_eq!(fused.rows[0].len(), 24);
    }

    #[test]
    fn tokens_of_one_segment_share_graph_suffix() {
        let hl = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let hg = vec![vec![3.0, 4.0, 5.0]];
        let fused = fuse(&hl, &[0, 0], &hg).unwrap();
        assert_eq!(&fused.rows[0][2..], &fused.rows[1][2..]);
        assert_eq!(&fused.rows[0][2..], &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn missing_segment_embedding() {
        let hl = vec![vec![1.0]];
        assert!(matches!(
            fuse(&hl, &[3], &[vec![0.0]]),
            Err(FuseError::MissingSegmentEmbedding(3))
        ));
    }

    #[test]
    fn zero_graph_vectors_leave_text_part_intact() {
        let hl = vec![vec![0.5, -0.5]];
        let hg = vec![vec![0.0, 0.0]];
        let fused = fuse(&hl, &[0], &hg).unwrap();
        assert_eq!(fused.rows[0], vec![0.5, -0.5, 0.0, 0.0]);
    }
}
