//! Link-prediction training: joint distance regression and direction
//! classification over the D-LoS edge set, with per-pair (1 - r)
//! downweighting and Adam updates accumulated over document batches.

use crate::encoder::TextEmbedder;
use crate::gnn::{Adam, DocFeatures, GnnConfig, GnnModel, PairBatch, Tape};
use crate::graph_builder::{edge_feature, DocumentGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
    /// Random non-edge pairs added per document, with true targets computed
    /// on the fly.
    pub extra_pair_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lr: 5e-3,
            batch_size: 6,
            lambda: 0.5,
            seed: 0,
            extra_pair_count: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sum over all pairs of [lambda*MSE + (1-lambda)*CE] * (1 - r).
    pub joint_loss: f64,
    /// Weighted MSE component, sum of MSE * (1 - r).
    pub mse: f64,
    /// Weighted CE component, sum of CE * (1 - r).
    pub ce: f64,
    /// Unweighted argmax accuracy over the training pairs.
    pub direction_accuracy: f64,
    pub pair_count: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LossHistory {
    pub epochs: Vec<EpochRecord>,
}

impl LossHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,joint_loss,mse,ce,direction_accuracy,pair_count\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{}\n",
                e.epoch, e.joint_loss, e.mse, e.ce, e.direction_accuracy, e.pair_count
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("non-finite loss at epoch {epoch}, document {doc_id}")]
    NonFiniteLoss { epoch: usize, doc_id: String },
}

/// Train a fresh model on the corpus graphs. Deterministic given
/// (graphs, configs): document order is shuffled with a seeded RNG and all
/// arithmetic is sequential f64.
pub fn train_link_prediction(
    graphs: &[DocumentGraph],
    gnn_cfg: &GnnConfig,
    cfg: &TrainConfig,
    text_embedder: &TextEmbedder,
) -> Result<(GnnModel, LossHistory), TrainError> {
    if graphs.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut model = GnnModel::new(gnn_cfg.clone());
    let feats: Vec<DocFeatures> = graphs
        .iter()
        .map(|g| DocFeatures::from_graph(g, text_embedder))
        .collect();
    let base_batches: Vec<PairBatch> = graphs.iter().map(PairBatch::from_graph_edges).collect();

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.lr);
    let mut history = LossHistory::default();
    let mut order: Vec<usize> = (0..graphs.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        model.params.zero_grads();
        let mut pending = 0usize;
        let mut record = EpochRecord {
            epoch,
            joint_loss: 0.0,
            mse: 0.0,
            ce: 0.0,
            direction_accuracy: 0.0,
            pair_count: 0,
        };
        let mut correct = 0usize;
        for &doc_idx in &order {
            let mut batch = base_batches[doc_idx].clone();
            if cfg.extra_pair_count > 0 {
                add_random_pairs(&mut batch, &graphs[doc_idx], cfg.extra_pair_count, &mut rng);
            }
            if batch.is_empty() {
                continue;
            }
            let mut tape = Tape::new();
            let nodes = model.build_link_loss(&mut tape, &feats[doc_idx], &batch, cfg.lambda);
            let loss = tape.value(nodes.loss).item();
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    doc_id: graphs[doc_idx].doc_id.clone(),
                });
            }
            record.joint_loss += loss;
            let se = tape.value(nodes.se);
            let ce = tape.value(nodes.ce);
            for i in 0..batch.len() {
                let w = 1.0 - batch.r[i];
                record.mse += se.data[i] * w;
                record.ce += ce.data[i] * w;
            }
            let logits = tape.value(nodes.logits);
            for (i, &y) in batch.target_dir.iter().enumerate() {
                let pred = logits
                    .row(i)
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                    .map(|(c, _)| c)
                    .unwrap();
                if pred == y {
                    correct += 1;
                }
            }
            record.pair_count += batch.len();
            tape.backward(nodes.loss, &mut model.params);
            pending += 1;
            if pending == cfg.batch_size {
                opt.step(&mut model.params);
                model.params.zero_grads();
                pending = 0;
            }
        }
        if pending > 0 {
            opt.step(&mut model.params);
            model.params.zero_grads();
        }
        record.direction_accuracy = if record.pair_count > 0 {
            correct as f64 / record.pair_count as f64
        } else {
            0.0
        };
        history.epochs.push(record);
    }
    Ok((model, history))
}

/// Sample random non-coincident, non-self pairs and compute their true
/// (e_dis, e_dir, r) targets. r uses the document's existing e_dis range,
/// clamped into [0, 1].
fn add_random_pairs(
    batch: &mut PairBatch,
    graph: &DocumentGraph,
    count: usize,
    rng: &mut ChaCha20Rng,
) {
    let n = graph.node_count();
    if n < 2 {
        return;
    }
    let (min_e, max_e) = graph
        .directed_edges
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.e_dis), hi.max(e.e_dis))
        });
    let span = max_e - min_e;
    let mut added = 0;
    let mut attempts = 0;
    while added < count && attempts < count * 10 {
        attempts += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let (src, dst) = (graph.nodes[u].bbox(), graph.nodes[v].bbox());
        let Ok((_, e_dis, e_dir)) = edge_feature(&src, &dst) else {
            continue;
        };
        let r = if span > 0.0 && span.is_finite() {
            ((e_dis - min_e) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        batch.push(u, v, e_dis, e_dir.index(), r);
        added += 1;
    }
}

/// Unweighted direction accuracy of a trained model over the directed edge
/// sets of `graphs` (used for held-out evaluation).
pub fn direction_accuracy(
    model: &GnnModel,
    graphs: &[DocumentGraph],
    text_embedder: &TextEmbedder,
) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for graph in graphs {
        if graph.directed_edges.is_empty() {
            continue;
        }
        let feats = DocFeatures::from_graph(graph, text_embedder);
        let batch = PairBatch::from_graph_edges(graph);
        let preds = model.predict_directions(&feats, &batch.pairs);
        for (p, y) in preds.iter().zip(&batch.target_dir) {
            if p == y {
                correct += 1;
            }
        }
        total += batch.len();
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}
