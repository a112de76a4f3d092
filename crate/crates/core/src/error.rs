//! Error type shared across the core modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A referenced item id is outside the catalog.
    UnknownItem(u32),
    /// Vectors of mismatched dimensionality were combined.
    DimensionMismatch { expected: usize, got: usize },
    /// A user profile required by the operation is empty.
    EmptyProfile,
    /// The training corpus yields no (center, context) pairs.
    NoTrainingPairs,
    /// The token vocabulary is empty after normalization.
    EmptyVocabulary,
    /// The temporal split point lies outside the interaction time range.
    SplitOutOfRange,
    /// An aggregate was requested over zero evaluable users/rows.
    NoEvaluableUsers,
    /// Invalid argument with a short description.
    InvalidArgument(String),
    /// Iterative solver failed to converge within its sweep budget.
    NoConvergence { sweeps: usize, max_delta: f64 },
    /// A linear system was rank deficient and jitter was disabled.
    RankDeficient,
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::UnknownItem(id) => write!(f, "unknown item id {id}"),
            CoreError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            CoreError::EmptyProfile => write!(f, "empty user profile"),
            CoreError::NoTrainingPairs => write!(f, "no training pairs"),
            CoreError::EmptyVocabulary => write!(f, "empty vocabulary"),
            CoreError::SplitOutOfRange => write!(f, "split point outside log time range"),
            CoreError::NoEvaluableUsers => write!(f, "no evaluable users"),
            CoreError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            CoreError::NoConvergence { sweeps, max_delta } => write!(
                f,
                "no convergence after {sweeps} sweeps (max coordinate update {max_delta:e})"
            ),
            CoreError::RankDeficient => write!(f, "rank-deficient system (jitter disabled)"),
        }
    }
}

impl core::error::Error for CoreError {}
