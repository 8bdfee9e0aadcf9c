//! The four benchmark architectures, training and evaluation.

mod network;
mod spec;
mod train;

pub use network::{argmax, build_model, ForwardCache, Model};
pub use spec::{ArchSpec, Architecture, ModelSpec};
pub use train::{
    evaluate, stratified_split, train, train_with, Evaluation, Split, TrainConfig, TrainedModel, TrainingHistory,
};

use thiserror::Error;

use crate::features::FeatureError;
use crate::nncore::NnError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("class {class} has {count} example(s); the stratified split needs at least 2")]
    ClassTooSmall { class: usize, count: usize },
    #[error("dataset shape {got:?} does not match model input {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("model file: {0}")]
    Persist(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
