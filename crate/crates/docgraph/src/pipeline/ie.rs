//! BIO tagging over fused token representations: a single linear layer +
//! softmax trained with cross-entropy. The GNN is frozen by default; joint
//! fine-tuning backpropagates the IE loss into the GNN parameters.

use crate::doc_model::Document;
use crate::encoder::TextEmbedder;
use crate::gnn::{Adam, DocFeatures, GnnModel, ParamStore, Tape, Tensor};
use crate::graph_builder::DocumentGraph;
use crate::pipeline::fusion::{token_hl, token_view};
use crate::pipeline::metrics::evaluate_entities;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IeError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("document {doc_id} carries label {label:?} outside the tag set")]
    LabelSetMismatch { doc_id: String, label: String },
    #[error("non-finite IE loss on document {0}")]
    NonFiniteLoss(String),
}

/// BIO tags over the entity labels; "other" and unlabeled segments map to O.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    pub labels: Vec<String>,
}

impl TagSet {
    pub fn from_label_set(label_set: &[String]) -> Self {
        let mut labels: Vec<String> = label_set
            .iter()
            .filter(|l| l.as_str() != "other")
            .cloned()
            .collect();
        labels.sort();
        labels.dedup();
        TagSet { labels }
    }

    pub fn count(&self) -> usize {
        1 + 2 * self.labels.len()
    }

    /// 0 = O, 1 + 2i = B-label_i, 2 + 2i = I-label_i.
    pub fn begin(&self, label_idx: usize) -> usize {
        1 + 2 * label_idx
    }

    pub fn inside(&self, label_idx: usize) -> usize {
        2 + 2 * label_idx
    }

    pub fn name(&self, tag: usize) -> String {
        if tag == 0 {
            "O".to_string()
        } else {
            let label = &self.labels[(tag - 1) / 2];
            if tag % 2 == 1 {
                format!("B-{label}")
            } else {
                format!("I-{label}")
            }
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Token-level BIO tags in `token_view` order: first token of a labeled
/// segment is B-X, the rest I-X; "other"/unlabeled segments are O.
pub fn bio_tags(doc: &Document, tags: &TagSet) -> Result<Vec<usize>, IeError> {
    let mut out = Vec::new();
    for seg in &doc.segments {
        let token_count = crate::encoder::segment_tokens(seg).len();
        let label_idx = match seg.label.as_deref() {
            None | Some("other") => None,
            Some(label) => Some(tags.label_index(label).ok_or_else(|| {
                IeError::LabelSetMismatch {
                    doc_id: doc.doc_id.clone(),
                    label: label.to_string(),
                }
            })?),
        };
        for t in 0..token_count {
            out.push(match label_idx {
                None => 0,
                Some(i) if t == 0 => tags.begin(i),
                Some(i) => tags.inside(i),
            });
        }
    }
    Ok(out)
}

/// Everything the IE trainer needs about one document.
#[derive(Debug, Clone)]
pub struct IeDocument {
    pub doc_id: String,
    /// T x D_L per-token text embeddings.
    pub hl: Tensor,
    pub alignment: Rc<Vec<usize>>,
    pub feats: DocFeatures,
    pub tags: Vec<usize>,
}

pub fn prepare_ie_document(
    doc: &Document,
    graph: &DocumentGraph,
    embedder: &TextEmbedder,
    tags: &TagSet,
) -> Result<IeDocument, IeError> {
    let (texts, alignment) = token_view(doc);
    let hl = Tensor::from_rows(&token_hl(&texts, embedder));
    Ok(IeDocument {
        doc_id: doc.doc_id.clone(),
        hl,
        alignment: Rc::new(alignment),
        feats: DocFeatures::from_graph(graph, embedder),
        tags: bio_tags(doc, tags)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IeMode {
    TextOnly,
    FusedFrozen,
    FusedJoint,
}

impl IeMode {
    pub fn uses_graph(&self) -> bool {
        !matches!(self, IeMode::TextOnly)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IeTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for IeTrainConfig {
    fn default() -> Self {
        IeTrainConfig {
            epochs: 30,
            lr: 0.01,
            batch_size: 6,
            seed: 0,
        }
    }
}

/// The linear + softmax classification head.
#[derive(Debug, Clone)]
pub struct IeHead {
    pub params: ParamStore,
    pub input_dim: usize,
    pub tag_set: TagSet,
}

impl IeHead {
    pub fn new(input_dim: usize, tag_set: TagSet, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let k = tag_set.count();
        let a = (6.0 / (input_dim + k) as f64).sqrt();
        let data = (0..input_dim * k).map(|_| rng.gen_range(-a..a)).collect();
        let mut params = ParamStore::new();
        params.insert("ie.w", Tensor::new(input_dim, k, data));
        params.insert("ie.b", Tensor::zeros(1, k));
        IeHead {
            params,
            input_dim,
            tag_set,
        }
    }

    /// A fused-input head whose graph block is zero and whose text block
    /// copies `text_head`; on zero graph vectors it reproduces the
    /// text-only head's logits exactly.
    pub fn with_zero_graph_block(text_head: &IeHead, graph_dim: usize) -> Self {
        let k = text_head.tag_set.count();
        let tw = &text_head.params.get("ie.w").value;
        let mut data = tw.data.clone();
        data.extend(std::iter::repeat(0.0).take(graph_dim * k));
        let mut params = ParamStore::new();
        params.insert("ie.w", Tensor::new(text_head.input_dim + graph_dim, k, data));
        params.insert("ie.b", text_head.params.get("ie.b").value.clone());
        IeHead {
            params,
            input_dim: text_head.input_dim + graph_dim,
            tag_set: text_head.tag_set.clone(),
        }
    }

    pub fn logits(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.cols, self.input_dim);
        let w = &self.params.get("ie.w").value;
        let b = &self.params.get("ie.b").value;
        let mut out = x.matmul(w);
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] += b.data[c];
            }
        }
        out
    }
}

fn fused_input(gnn: &GnnModel, doc: &IeDocument) -> Tensor {
    let hg = gnn.embed_nodes(&doc.feats);
    let mut rows = Vec::with_capacity(doc.hl.rows);
    for (t, &seg) in doc.alignment.iter().enumerate() {
        let mut row = doc.hl.row(t).to_vec();
        row.extend_from_slice(&hg[seg]);
        rows.push(row);
    }
    Tensor::from_rows(&rows)
}

/// Argmax tag per token under the given mode.
pub fn predict_tags(gnn: &GnnModel, head: &IeHead, doc: &IeDocument, mode: IeMode) -> Vec<usize> {
    let x = match mode {
        IeMode::TextOnly => doc.hl.clone(),
        _ => fused_input(gnn, doc),
    };
    let logits = head.logits(&x);
    (0..logits.rows)
        .map(|r| {
            logits
                .row(r)
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                .map(|(c, _)| c)
                .unwrap()
        })
        .collect()
}

/// Entity-level F1 of the current head over `docs`.
pub fn entity_f1(gnn: &GnnModel, head: &IeHead, docs: &[IeDocument], mode: IeMode) -> f64 {
    let mut pred = Vec::with_capacity(docs.len());
    let mut gold = Vec::with_capacity(docs.len());
    for doc in docs {
        let p = predict_tags(gnn, head, doc, mode);
        pred.push(p.iter().map(|&t| head.tag_set.name(t)).collect::<Vec<_>>());
        gold.push(doc.tags.iter().map(|&t| head.tag_set.name(t)).collect::<Vec<_>>());
    }
    evaluate_entities(&pred, &gold).map(|m| m.f1).unwrap_or(0.0)
}

/// Train the IE head (and, in joint mode, the GNN). Returns the head and
/// the per-epoch entity F1 on `eval_docs`.
pub fn train_ie_head(
    gnn: &mut GnnModel,
    docs: &[IeDocument],
    tag_set: &TagSet,
    mode: IeMode,
    cfg: &IeTrainConfig,
    eval_docs: &[IeDocument],
) -> Result<(IeHead, Vec<f64>), IeError> {
    if docs.is_empty() {
        return Err(IeError::EmptyCorpus);
    }
    let graph_dim = if mode.uses_graph() { gnn.cfg.hidden_dim } else { 0 };
    let input_dim = docs[0].hl.cols + graph_dim;
    let head = IeHead::new(input_dim, tag_set.clone(), cfg.seed);

    // Merged training store: IE head params plus (joint mode only) the GNN
    // parameters; names are disjoint by construction.
    let mut store = head.params.clone();
    if mode == IeMode::FusedJoint {
        for name in gnn.params.names().map(str::to_string).collect::<Vec<_>>() {
            store.insert(&name, gnn.params.get(&name).value.clone());
        }
    }

    // Frozen graph inputs never change, so fuse once up front.
    let frozen_inputs: Vec<Option<Tensor>> = docs
        .iter()
        .map(|d| match mode {
            IeMode::TextOnly => None,
            IeMode::FusedFrozen => Some(fused_input(gnn, d)),
            IeMode::FusedJoint => None,
        })
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut f1_curve = Vec::with_capacity(cfg.epochs);

    for _epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        store.zero_grads();
        let mut pending = 0usize;
        for &idx in &order {
            let doc = &docs[idx];
            if doc.tags.is_empty() {
                continue;
            }
            let mut tape = Tape::new();
            let x = match mode {
                IeMode::TextOnly => tape.constant(doc.hl.clone()),
                IeMode::FusedFrozen => tape.constant(frozen_inputs[idx].clone().unwrap()),
                IeMode::FusedJoint => {
                    let gnn_view = GnnModel::from_params(gnn.cfg.clone(), store.clone());
                    let hg = gnn_view.build_embeddings(&mut tape, &doc.feats);
                    let gathered = tape.gather_rows(hg, doc.alignment.clone());
                    let hl = tape.constant(doc.hl.clone());
                    tape.concat_cols(hl, gathered)
                }
            };
            let w = tape.param(&store, "ie.w");
            let b = tape.param(&store, "ie.b");
            let scores = tape.matmul(x, w);
            let logits = tape.add_row_broadcast(scores, b);
            let ce = tape.softmax_cross_entropy(logits, Rc::new(doc.tags.clone()));
            let inv = 1.0 / doc.tags.len() as f64;
            let scaled = tape.mul_const(ce, Rc::new(vec![inv; doc.tags.len()]));
            let loss = tape.sum(scaled);
            if !tape.value(loss).item().is_finite() {
                return Err(IeError::NonFiniteLoss(doc.doc_id.clone()));
            }
            tape.backward(loss, &mut store);
            pending += 1;
            if pending == cfg.batch_size {
                opt.step(&mut store);
                store.zero_grads();
                pending = 0;
            }
        }
        if pending > 0 {
            opt.step(&mut store);
            store.zero_grads();
        }
        // Sync for evaluation.
        let epoch_head = head_from_store(&store, input_dim, tag_set);
        if mode == IeMode::FusedJoint {
            sync_gnn(gnn, &store);
        }
        if !eval_docs.is_empty() {
            f1_curve.push(entity_f1(gnn, &epoch_head, eval_docs, mode));
        }
    }
    let final_head = head_from_store(&store, input_dim, tag_set);
    if mode == IeMode::FusedJoint {
        sync_gnn(gnn, &store);
    }
    Ok((final_head, f1_curve))
}

fn head_from_store(store: &ParamStore, input_dim: usize, tag_set: &TagSet) -> IeHead {
    let mut params = ParamStore::new();
    params.insert("ie.w", store.get("ie.w").value.clone());
    params.insert("ie.b", store.get("ie.b").value.clone());
    IeHead {
        params,
        input_dim,
        tag_set: tag_set.clone(),
    }
}

fn sync_gnn(gnn: &mut GnnModel, store: &ParamStore) {
    let names: Vec<String> = gnn.params.names().map(str::to_string).collect();
    for name in names {
        gnn.params.get_mut(&name).value = store.get(&name).value.clone();
    }
}
