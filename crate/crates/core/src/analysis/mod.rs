//! Analyses over probe sweeps, generations and archives.

pub mod distance;
pub mod gap;
pub mod generation;
pub mod lens;
pub mod pca;
pub mod regression;
pub mod stats;

use crate::probe::ProbeError;
use crate::tensor_store::ArchiveError;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate regressor: all x values are equal")]
    DegenerateRegressor,
    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
}
