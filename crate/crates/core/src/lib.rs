//! Multi-target point filtering with online-learned motion models.
//!
//! The crate tracks a variable number of point targets through cluttered
//! measurement frames. Each target carries a short history of state vectors;
//! a shared recurrent regression network is fine-tuned online on that history
//! and used to predict the next state. Predictions are corrected against the
//! incoming measurement set by a histogram-based association pass that runs
//! in linear time over targets and measurements, assigning survival, decay,
//! birth and death. Evaluation uses the OSPA metric with an exact assignment
//! solver, and a range-bearing simulator generates synthetic scenarios with
//! Poisson clutter.
//!
//! The crate is `no_std`-compatible (requires `alloc`); file formats, CLI and
//! timing live in the companion `mtfilter-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod association;
pub mod math;
pub mod metrics;
pub mod neural;
pub mod predictor;
pub mod simulator;
pub mod types;

use core::fmt;

/// Errors surfaced by filtering, training and metric evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterError {
    /// A vector had the wrong number of components.
    DimensionMismatch { expected: usize, got: usize },
    /// A state history was too short for the requested operation.
    InsufficientHistory { needed: usize, got: usize },
    /// Training or inference produced a non-finite value.
    Diverged,
    /// A configuration value violated its documented range.
    InvalidConfig(&'static str),
    /// A scenario description violated its documented constraints.
    InvalidScenario(&'static str),
    /// The assignment solver requires a square cost matrix.
    NotSquare { rows: usize, cols: usize },
    /// Paired series had different lengths.
    LengthMismatch { left: usize, right: usize },
    /// A serialized model blob failed to decode.
    InvalidCheckpoint(&'static str),
    /// A measurement frame arrived out of order.
    TimeStepMismatch { expected: u64, got: u64 },
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected} components, got {got}")
            }
            FilterError::InsufficientHistory { needed, got } => {
                write!(f, "insufficient history: need at least {needed} rows, got {got}")
            }
            FilterError::Diverged => write!(f, "non-finite value encountered"),
            FilterError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            FilterError::InvalidScenario(msg) => write!(f, "invalid scenario: {msg}"),
            FilterError::NotSquare { rows, cols } => {
                write!(f, "cost matrix must be square, got {rows}x{cols}")
            }
            FilterError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            FilterError::InvalidCheckpoint(msg) => write!(f, "invalid checkpoint: {msg}"),
            FilterError::TimeStepMismatch { expected, got } => {
                write!(f, "time step mismatch: expected {expected}, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FilterError {}

pub type Result<T> = core::result::Result<T, FilterError>;
