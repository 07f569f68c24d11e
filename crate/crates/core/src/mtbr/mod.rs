//! The multi-task boundary-revised tagger: encoder, task heads, revision,
//! hand-written backward passes and the alternating trainer.

mod config;
pub mod encoder;
pub mod heads;
mod model;
mod train;

pub use config::{HyperParams, TrainConfig, Variant, VariantFlags};
pub use encoder::{Encoder, EncoderSpec, PrecomputedEncoder, TokenVocab};
pub use heads::{
    bi_revise, combine_bd_loss, draw_revision, gated_select, pair_boundaries, span_represent,
    transform_span_probs, Mode, Span,
};
pub use model::{BdLoss, Example, ForwardTrace, ModelSidecar, Mtbr, Phase};
pub use train::{fit, load_model, save_model, EpochStats, StepLosses, TrainReport, Trainer};

use crate::diff::DiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtbrError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty sentence")]
    EmptySentence,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl MtbrError {
    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> MtbrError {
        MtbrError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
