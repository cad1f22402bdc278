//! The multi-trial fusion ablation: on each seed, generate a synthetic
//! corpus, train the link-prediction GNN, then train one entity-extraction
//! head on fused [h^L ; h^G] inputs and one on text-only inputs, comparing
//! final F1 and convergence speed across seeds with a paired sign test.

use crate::encoder::TextEmbedder;
use crate::gnn::{GnnConfig, GnnModel};
use crate::graph_builder::{build_graph, DocumentGraph, GraphError};
use crate::pipeline::convergence::{convergence_report, curves_to_csv};
use crate::pipeline::ie::{
    prepare_ie_document, train_ie_head, IeDocument, IeError, IeMode, IeTrainConfig, TagSet,
};
use crate::pipeline::metrics::sign_test_p;
use crate::pipeline::synthetic::generate_synthetic_corpus;
use crate::pipeline::train::{direction_accuracy, train_link_prediction, TrainConfig, TrainError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("graph construction failed: {0}")]
    Graph(#[from] GraphError),
    #[error("link-prediction training failed: {0}")]
    LinkTraining(#[from] TrainError),
    #[error("entity-extraction training failed: {0}")]
    IeTraining(#[from] IeError),
    #[error("train/test split leaves an empty side (n_docs {n_docs}, train_frac {train_frac})")]
    DegenerateSplit { n_docs: usize, train_frac: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Fused,
    TextOnly,
    Both,
}

impl Ablation {
    pub fn runs_fused(&self) -> bool {
        !matches!(self, Ablation::TextOnly)
    }

    pub fn runs_text_only(&self) -> bool {
        !matches!(self, Ablation::Fused)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub n_docs: usize,
    pub nodes_lo: usize,
    pub nodes_hi: usize,
    pub seed: u64,
    pub train_frac: f64,
    pub link: TrainConfig,
    pub ie: IeTrainConfig,
    pub gnn: GnnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 10,
            n_docs: 100,
            nodes_lo: 20,
            nodes_hi: 40,
            seed: 0,
            train_frac: 0.8,
            link: TrainConfig::default(),
            ie: IeTrainConfig::default(),
            gnn: GnnConfig::default(),
        }
    }
}

/// One arm (fused or text-only) of one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmResult {
    pub final_f1: f64,
    /// Test-set F1 after each training epoch.
    pub f1_curve: Vec<f64>,
    /// 1-based first epoch reaching 90 percent of the final F1.
    pub epochs_to_threshold: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub corpus_seed: u64,
    pub fused: Option<ArmResult>,
    pub text_only: Option<ArmResult>,
    /// Link-prediction joint loss at the first and last training epoch
    /// (fused arm only).
    pub link_loss_first: Option<f64>,
    pub link_loss_last: Option<f64>,
    /// Direction accuracy of the trained GNN on the held-out test graphs.
    pub heldout_direction_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    /// Mean over trials of (fused F1 - text-only F1), in F1 points (x100).
    pub mean_f1_delta_points: Option<f64>,
    /// Trials where fused beats / loses to / ties text-only on final F1.
    pub f1_wins: usize,
    pub f1_losses: usize,
    pub f1_ties: usize,
    /// One-sided paired sign test over the non-tied F1 comparisons.
    pub sign_test_p: Option<f64>,
    /// Trials where fused reaches its 90 percent threshold in at most as
    /// many epochs as text-only.
    pub convergence_wins: usize,
    pub compared_trials: usize,
    /// Per-epoch F1 averaged across trials, one column per arm.
    pub mean_fused_curve: Vec<f64>,
    pub mean_text_only_curve: Vec<f64>,
}

impl ExperimentReport {
    pub fn curves_csv(&self) -> String {
        curves_to_csv(
            &["fused_f1", "text_only_f1"],
            &[self.mean_fused_curve.clone(), self.mean_text_only_curve.clone()],
        )
    }
}

struct TrialData {
    train: Vec<IeDocument>,
    test: Vec<IeDocument>,
    train_graphs: Vec<DocumentGraph>,
    test_graphs: Vec<DocumentGraph>,
    tag_set: TagSet,
}

fn prepare_trial(
    cfg: &ExperimentConfig,
    corpus_seed: u64,
    embedder: &TextEmbedder,
) -> Result<TrialData, ExperimentError> {
    let docs = generate_synthetic_corpus(corpus_seed, cfg.n_docs, cfg.nodes_lo, cfg.nodes_hi);
    let n_train = ((cfg.n_docs as f64) * cfg.train_frac).round() as usize;
    if n_train == 0 || n_train >= docs.len() {
        return Err(ExperimentError::DegenerateSplit {
            n_docs: cfg.n_docs,
            train_frac: cfg.train_frac,
        });
    }
    let tag_set = TagSet::from_label_set(&docs[0].label_set);
    let graphs: Vec<DocumentGraph> = docs
        .iter()
        .map(build_graph)
        .collect::<Result<_, _>>()?;
    let items: Vec<IeDocument> = docs
        .iter()
        .zip(&graphs)
        .map(|(d, g)| prepare_ie_document(d, g, embedder, &tag_set))
        .collect::<Result<_, _>>()?;
    let mut train = items;
    let test = train.split_off(n_train);
    let train_graphs = graphs[..n_train].to_vec();
    let test_graphs = graphs[n_train..].to_vec();
    Ok(TrialData {
        train,
        test,
        train_graphs,
        test_graphs,
        tag_set,
    })
}

fn run_arm(
    gnn: &mut GnnModel,
    data: &TrialData,
    mode: IeMode,
    ie_cfg: &IeTrainConfig,
) -> Result<ArmResult, ExperimentError> {
    let (_, f1_curve) = train_ie_head(gnn, &data.train, &data.tag_set, mode, ie_cfg, &data.test)?;
    let report = convergence_report(&f1_curve).expect("non-empty curve");
    Ok(ArmResult {
        final_f1: report.final_f1,
        epochs_to_threshold: report.epochs_to_threshold,
        f1_curve,
    })
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    ablation: Ablation,
) -> Result<ExperimentReport, ExperimentError> {
    let embedder = TextEmbedder::new(cfg.gnn.text_dim, cfg.seed);
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let corpus_seed = cfg.seed.wrapping_add(t as u64);
        let data = prepare_trial(cfg, corpus_seed, &embedder)?;

        let mut link_loss_first = None;
        let mut link_loss_last = None;
        let mut heldout_direction_accuracy = None;
        let fused = if ablation.runs_fused() {
            let link_cfg = TrainConfig {
                seed: cfg.link.seed.wrapping_add(t as u64),
                ..cfg.link.clone()
            };
            let gnn_cfg = GnnConfig {
                seed: cfg.gnn.seed.wrapping_add(t as u64),
                ..cfg.gnn.clone()
            };
            let (mut gnn, history) =
                train_link_prediction(&data.train_graphs, &gnn_cfg, &link_cfg, &embedder)?;
            link_loss_first = history.epochs.first().map(|e| e.joint_loss);
            link_loss_last = history.epochs.last().map(|e| e.joint_loss);
            heldout_direction_accuracy =
                Some(direction_accuracy(&gnn, &data.test_graphs, &embedder));
            let ie_cfg = IeTrainConfig {
                seed: cfg.ie.seed.wrapping_add(t as u64),
                ..cfg.ie.clone()
            };
            Some(run_arm(&mut gnn, &data, IeMode::FusedFrozen, &ie_cfg)?)
        } else {
            None
        };

        let text_only = if ablation.runs_text_only() {
            // The GNN is unused in this mode; a fresh untrained one just
            // satisfies the trainer's interface.
            let mut gnn = GnnModel::new(GnnConfig {
                seed: cfg.gnn.seed.wrapping_add(t as u64),
                ..cfg.gnn.clone()
            });
            let ie_cfg = IeTrainConfig {
                seed: cfg.ie.seed.wrapping_add(t as u64),
                ..cfg.ie.clone()
            };
            Some(run_arm(&mut gnn, &data, IeMode::TextOnly, &ie_cfg)?)
        } else {
            None
        };

        trials.push(TrialResult {
            trial: t,
            corpus_seed,
            fused,
            text_only,
            link_loss_first,
            link_loss_last,
            heldout_direction_accuracy,
        });
    }
    Ok(summarize(cfg.clone(), trials))
}

fn summarize(config: ExperimentConfig, trials: Vec<TrialResult>) -> ExperimentReport {
    let (mut wins, mut losses, mut ties, mut conv_wins, mut compared) = (0, 0, 0, 0, 0);
    let mut delta_sum = 0.0;
    for t in &trials {
        let (Some(f), Some(x)) = (&t.fused, &t.text_only) else {
            continue;
        };
        compared += 1;
        delta_sum += f.final_f1 - x.final_f1;
        if f.final_f1 > x.final_f1 {
            wins += 1;
        } else if f.final_f1 < x.final_f1 {
            losses += 1;
        } else {
            ties += 1;
        }
        if f.epochs_to_threshold <= x.epochs_to_threshold {
            conv_wins += 1;
        }
    }
    let mean_fused_curve = mean_curve(trials.iter().filter_map(|t| t.fused.as_ref()));
    let mean_text_only_curve = mean_curve(trials.iter().filter_map(|t| t.text_only.as_ref()));
    ExperimentReport {
        config,
        mean_f1_delta_points: (compared > 0).then(|| 100.0 * delta_sum / compared as f64),
        f1_wins: wins,
        f1_losses: losses,
        f1_ties: ties,
        sign_test_p: (wins + losses > 0).then(|| sign_test_p(wins, losses)),
        convergence_wins: conv_wins,
        compared_trials: compared,
        mean_fused_curve,
        mean_text_only_curve,
        trials,
    }
}

fn mean_curve<'a>(arms: impl Iterator<Item = &'a ArmResult>) -> Vec<f64> {
    let curves: Vec<&Vec<f64>> = arms.map(|a| &a.f1_curve).collect();
    if curves.is_empty() {
        return Vec::new();
    }
    let len = curves.iter().map(|c| c.len()).max().unwrap();
    (0..len)
        .map(|e| {
            let vals: Vec<f64> = curves.iter().filter_map(|c| c.get(e).copied()).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect()
}
