//! End-to-end orchestration: synthetic corpora, link-prediction training,
//! token fusion, entity extraction, evaluation metrics, and the multi-seed
//! ablation experiment.

pub mod convergence;
pub mod experiment;
pub mod fusion;
pub mod ie;
pub mod metrics;
pub mod synthetic;
pub mod train;

pub use convergence::{convergence_report, curves_to_csv, ConvergenceReport};
pub use experiment::{run_experiment, Ablation, ExperimentConfig, ExperimentReport};
pub use fusion::{fuse, token_hl, token_view, FusedTokenMatrix};
pub use ie::{
    bio_tags, entity_f1, predict_tags, prepare_ie_document, train_ie_head, IeDocument, IeHead,
    IeMode, IeTrainConfig, TagSet,
};
pub use metrics::{evaluate_entities, extract_spans, sign_test_p, EntityMetrics};
pub use synthetic::generate_synthetic_corpus;
pub use train::{direction_accuracy, train_link_prediction, LossHistory, TrainConfig};
