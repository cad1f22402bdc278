//! The GraphSage layer stack and the two link-prediction heads, plus the
//! joint weighted loss. A layer computes
//!
//!   h' = ReLU(W_self h + W_neigh mean_{v in N(u)} h_v + bias)
//!
//! with the neighbor term zero for isolated nodes. The distance head is a
//! scalar linear map of the pair dot product; the direction head is a
//! softmax over a linear map of the pair's elementwise product.

use super::params::ParamStore;
use super::tape::{softmax_row, NodeId, Tape};
use super::tensor::Tensor;
use crate::encoder::{SizeEmbedder, TextEmbedder};
use crate::graph_builder::DocumentGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::rc::Rc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GnnConfig {
    pub text_dim: usize,
    pub size_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            text_dim: 64,
            size_dim: 8,
            hidden_dim: 64,
            layers: 2,
            seed: 0,
        }
    }
}

impl GnnConfig {
    pub fn input_dim(&self) -> usize {
        self.text_dim + self.size_dim
    }
}

/// Per-document constant inputs to the model.
#[derive(Debug, Clone)]
pub struct DocFeatures {
    /// N x text_dim hashed text embeddings.
    pub text: Tensor,
    /// N x 2 normalized [width, height].
    pub size: Tensor,
    /// Symmetrized message-passing adjacency.
    pub adj: Rc<Vec<Vec<usize>>>,
}

impl DocFeatures {
    pub fn from_graph(graph: &DocumentGraph, text_embedder: &TextEmbedder) -> Self {
        let text_rows: Vec<Vec<f64>> = graph
            .nodes
            .iter()
            .map(|n| {
                let tokens: Vec<&str> = n.text.split_whitespace().collect();
                text_embedder.embed(&tokens)
            })
            .collect();
        let size_rows: Vec<Vec<f64>> = graph
            .nodes
            .iter()
            .map(|n| SizeEmbedder::size_features(&n.bbox()).to_vec())
            .collect();
        DocFeatures {
            text: Tensor::from_rows(&text_rows),
            size: Tensor::from_rows(&size_rows),
            adj: Rc::new(graph.mp_adjacency.clone()),
        }
    }

    pub fn node_count(&self) -> usize {
        self.text.rows
    }
}

/// Training targets for a set of node pairs.
#[derive(Debug, Clone, Default)]
pub struct PairBatch {
    pub pairs: Vec<(usize, usize)>,
    /// y^e: target smoothed distance.
    pub target_e: Vec<f64>,
    /// y^d: target sector index in 0..8.
    pub target_dir: Vec<usize>,
    /// Normalized distance r in [0, 1]; pairs are weighted by (1 - r).
    pub r: Vec<f64>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, u: usize, v: usize, y_e: f64, y_d: usize, r: f64) {
        debug_assert!(y_d < 8);
        debug_assert!((0.0..=1.0).contains(&r));
        self.pairs.push((u, v));
        self.target_e.push(y_e);
        self.target_dir.push(y_d);
        self.r.push(r);
    }

    /// The directed D-LoS edge set of a graph as a batch.
    pub fn from_graph_edges(graph: &DocumentGraph) -> Self {
        let mut batch = PairBatch::default();
        for e in &graph.directed_edges {
            batch.push(e.src, e.dst, e.e_dis, e.e_dir.index(), e.r);
        }
        batch
    }
}

pub struct GnnModel {
    pub cfg: GnnConfig,
    pub params: ParamStore,
}

/// Tape handles for the loss composition, kept for metric readout.
pub struct LinkLossNodes {
    pub embeddings: NodeId,
    pub pred_e: NodeId,
    pub logits: NodeId,
    pub se: NodeId,
    pub ce: NodeId,
    pub loss: NodeId,
}

impl GnnModel {
    pub fn new(cfg: GnnConfig) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let mut params = ParamStore::new();
        let glorot = |rng: &mut ChaCha20Rng, rows: usize, cols: usize| {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
            Tensor::new(rows, cols, data)
        };
        params.insert("size_proj", glorot(&mut rng, 2, cfg.size_dim));
        let mut in_dim = cfg.input_dim();
        for l in 0..cfg.layers {
            params.insert(&format!("sage{l}.w_self"), glorot(&mut rng, in_dim, cfg.hidden_dim));
            params.insert(&format!("sage{l}.w_neigh"), glorot(&mut rng, in_dim, cfg.hidden_dim));
            params.insert(&format!("sage{l}.bias"), Tensor::zeros(1, cfg.hidden_dim));
            in_dim = cfg.hidden_dim;
        }
        params.insert("dist.w", glorot(&mut rng, 1, 1));
        params.insert("dist.b", Tensor::zeros(1, 1));
        params.insert("dir.w", glorot(&mut rng, cfg.hidden_dim, 8));
        GnnModel { cfg, params }
    }

    pub fn from_params(cfg: GnnConfig, params: ParamStore) -> Self {
        GnnModel { cfg, params }
    }

    /// Record E_u = [text ; size * P] and the layer stack; returns the
    /// node-embedding matrix handle (N x hidden_dim).
    pub fn build_embeddings(&self, tape: &mut Tape, feats: &DocFeatures) -> NodeId {
        let text = tape.constant(feats.text.clone());
        let size = tape.constant(feats.size.clone());
        let proj = tape.param(&self.params, "size_proj");
        let size_emb = tape.matmul(size, proj);
        let mut h = tape.concat_cols(text, size_emb);
        for l in 0..self.cfg.layers {
            let w_self = tape.param(&self.params, &format!("sage{l}.w_self"));
            let w_neigh = tape.param(&self.params, &format!("sage{l}.w_neigh"));
            let bias = tape.param(&self.params, &format!("sage{l}.bias"));
            let own = tape.matmul(h, w_self);
            let mean = tape.neighbor_mean(h, feats.adj.clone());
            let agg = tape.matmul(mean, w_neigh);
            let sum = tape.add(own, agg);
            let biased = tape.add_row_broadcast(sum, bias);
            h = tape.relu(biased);
        }
        h
    }

    /// Record the full joint link-prediction loss over a pair batch:
    /// sum over pairs of [lambda * MSE + (1 - lambda) * CE] * (1 - r).
    pub fn build_link_loss(
        &self,
        tape: &mut Tape,
        feats: &DocFeatures,
        batch: &PairBatch,
        lambda: f64,
    ) -> LinkLossNodes {
        assert!(!batch.is_empty(), "loss over an empty batch is undefined");
        assert!((0.0..=1.0).contains(&lambda));
        let embeddings = self.build_embeddings(tape, feats);
        let pairs = Rc::new(batch.pairs.clone());

        let dots = tape.pair_dot(embeddings, pairs.clone());
        let w = tape.param(&self.params, "dist.w");
        let b = tape.param(&self.params, "dist.b");
        let pred_e = tape.scale_add(dots, w, b);
        let se = tape.squared_error(pred_e, Rc::new(batch.target_e.clone()));

        let had = tape.pair_hadamard(embeddings, pairs);
        let dir_w = tape.param(&self.params, "dir.w");
        let logits = tape.matmul(had, dir_w);
        let ce = tape.softmax_cross_entropy(logits, Rc::new(batch.target_dir.clone()));

        let per_pair = tape.lin_comb(se, ce, lambda, 1.0 - lambda);
        let weights: Vec<f64> = batch.r.iter().map(|r| 1.0 - r).collect();
        let weighted = tape.mul_const(per_pair, Rc::new(weights));
        let loss = tape.sum(weighted);
        LinkLossNodes {
            embeddings,
            pred_e,
            logits,
            se,
            ce,
            loss,
        }
    }

    /// Deterministic no-grad forward; returns one hidden vector per node.
    pub fn embed_nodes(&self, feats: &DocFeatures) -> Vec<Vec<f64>> {
        let mut tape = Tape::new();
        let h = self.build_embeddings(&mut tape, feats);
        let value = tape.value(h);
        (0..value.rows).map(|r| value.row(r).to_vec()).collect()
    }

    /// Argmax predicted sector per pair (no grad).
    pub fn predict_directions(&self, feats: &DocFeatures, pairs: &[(usize, usize)]) -> Vec<usize> {
        let mut tape = Tape::new();
        let h = self.build_embeddings(&mut tape, feats);
        let had = tape.pair_hadamard(h, Rc::new(pairs.to_vec()));
        let dir_w = tape.param(&self.params, "dir.w");
        let logits = tape.matmul(had, dir_w);
        let vl = tape.value(logits);
        (0..vl.rows)
            .map(|i| {
                vl.row(i)
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                    .map(|(c, _)| c)
                    .unwrap()
            })
            .collect()
    }
}

/// Scalar distance head on its own: w * (h_u . h_v) + b.
pub fn distance_head(h_u: &[f64], h_v: &[f64], w: f64, b: f64) -> f64 {
    assert_eq!(h_u.len(), h_v.len());
    let dot: f64 = h_u.iter().zip(h_v).map(|(a, c)| a * c).sum();
    w * dot + b
}

/// Direction head on its own: softmax((h_u elementwise h_v) W), W is D x 8.
pub fn direction_head(h_u: &[f64], h_v: &[f64], w: &Tensor) -> Vec<f64> {
    assert_eq!(h_u.len(), h_v.len());
    assert_eq!(w.rows, h_u.len());
    assert_eq!(w.cols, 8);
    let mut logits = vec![0.0; 8];
    for (k, (a, b)) in h_u.iter().zip(h_v).enumerate() {
        let prod = a * b;
        for (c, logit) in logits.iter_mut().enumerate() {
            *logit += prod * w.at(k, c);
        }
    }
    softmax_row(&logits)
}
