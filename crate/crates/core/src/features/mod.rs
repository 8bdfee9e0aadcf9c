//! Session → fixed-shape feature matrix, normalization and dataset files.

mod dataset_io;
mod manifest;
mod normalize;
mod sequence;

pub use dataset_io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use manifest::{lookup_extractor, Extractor, FeatureDef, FeatureManifest, PacketContext, EXTRACTORS};
pub use normalize::{fit_normalizer, NormalizeMode, Normalizer};
pub use sequence::{build_dataset, build_sequence, extract_features, LabelCodec, SessionMatrix};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown feature extractor {0:?}")]
    UnknownExtractor(String),
    #[error("invalid feature manifest: {0}")]
    InvalidManifest(String),
    #[error("session has no packets")]
    EmptySession,
    #[error("feature vectors have inconsistent width (expected {expected}, got {got})")]
    RaggedVectors { expected: usize, got: usize },
    #[error("normalizer used before fitting")]
    NotFitted,
    #[error("dataset schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("dataset i/o: {0}")]
    Io(String),
}
