//! The iterative audit loop: train on the whole dataset, tag it, queue the
//! sentences where model and labels disagree, collect two-auditor
//! decisions, merge the resolutions and repeat.

pub mod api;
mod item;
mod iterate;
mod store;

pub use item::{AuditItem, Decision, ItemStatus};
pub use iterate::{
    check_convergence, disagreements, enqueue_conflicts, merge_resolved, run_iteration, AuditLoop,
    IterationReport, LoopConfig,
};
pub use store::{AuditState, AuditStore, Record, STORE_SCHEMA, STORE_VERSION};

use crate::mtbr::MtbrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("invalid tags: {0}")]
    InvalidTags(String),
    #[error("auditor `{auditor}` already decided item {item}")]
    DuplicateAuditor { item: u64, auditor: String },
    #[error("item {0} is already resolved")]
    AlreadyResolved(u64),
    #[error("item {0} is not escalated; a manual override needs three differing decisions first")]
    NotEscalated(u64),
    #[error("no item {0}")]
    NotFound(u64),
    #[error("item {item} is at version {found}, request expected {expected}")]
    VersionConflict { item: u64, expected: u64, found: u64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{predictions} predictions for {dataset} sentences")]
    Misaligned { dataset: usize, predictions: usize },
    #[error("iteration is not configured for this service")]
    IterationUnavailable,
    #[error("training: {0}")]
    Training(#[from] MtbrError),
    #[error("store: {0}")]
    Store(String),
}

impl AuditError {
    /// Stable machine-readable name used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            AuditError::InvalidTags(_) => "InvalidTags",
            AuditError::DuplicateAuditor { .. } => "DuplicateAuditor",
            AuditError::AlreadyResolved(_) => "AlreadyResolved",
            AuditError::NotEscalated(_) => "NotEscalated",
            AuditError::NotFound(_) => "NotFound",
            AuditError::VersionConflict { .. } => "VersionConflict",
            AuditError::EmptyDataset => "EmptyDataset",
            AuditError::Misaligned { .. } => "Misaligned",
            AuditError::IterationUnavailable => "IterationUnavailable",
            AuditError::Training(_) => "TrainingFailed",
            AuditError::Store(_) => "StoreError",
        }
    }
}
