//! Numeric core: tensors, reverse-mode autodiff, parameter storage with
//! checkpointing, the Adam optimizer, and the GraphSage link-prediction
//! model itself.

pub mod adam;
pub mod model;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::Adam;
pub use model::{
    direction_head, distance_head, DocFeatures, GnnConfig, GnnModel, LinkLossNodes, PairBatch,
};
pub use params::{CheckpointError, Param, ParamStore};
pub use tape::{softmax_row, NodeId, Tape};
pub use tensor::Tensor;
