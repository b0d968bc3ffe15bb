//! A learned time delay estimator: spectral frontend, conv + residual MLP
//! network, a small reverse-mode autodiff engine, AdamW training and a
//! binary checkpoint format.
//!
//! TDOA is treated as classification over integer sample lags:
//! class `round(tdoa * fs) + K / 2` for `K` classes.

pub mod checkpoint;
pub mod error;
pub mod frontend;
pub mod graph;
pub mod model;
pub mod optim;
pub mod predict;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use checkpoint::{Checkpoint, TrainingMetadata, CHECKPOINT_VERSION};
pub use error::{Error, Result};
pub use frontend::{bin_count, clip_spectrum, frontend, FeatureNorm};
pub use graph::{Gradients, Graph, NodeId};
pub use model::{ConvSpec, Dtype, Model, ModelConfig};
pub use optim::{AdamW, AdamWConfig};
pub use predict::{predict_tdoa, NeuralEstimator};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use train::{
    history_csv, split_rooms, train_epochs, train_on_dataset, validate_on, EpochMetrics, PairSet, TrainConfig,
    TrainOutcome, TrainPair,
};
