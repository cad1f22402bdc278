//! Document graphs for form understanding.
//!
//! The crate turns OCR segment annotations into geometric graphs (each node
//! keeps its eight direction-of-sight nearest neighbors), trains a small
//! GraphSage network on a joint link-prediction objective over those edges,
//! and fuses the learned node embeddings with token text features for
//! entity extraction. Everything is deterministic given a seed: hashing
//! text embeddings, ChaCha-seeded initialization and shuffling, and
//! sequential f64 arithmetic throughout.

pub mod doc_model;
pub mod encoder;
pub mod geometry;
pub mod gnn;
pub mod graph_builder;
pub mod pipeline;
pub mod render;
