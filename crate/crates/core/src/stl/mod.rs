//! Discrete-time signal temporal logic: formulas, exact and smooth
//! robustness, signal extraction from trajectories and the two
//! locomotion-safety losses (velocity and heading change).

mod formula;
mod loss;
mod semantics;
mod signals;

pub use formula::{Comparator, Formula};
pub use loss::{
    build_safety_formulas, robustness_nodes, safety_robustness, stl_loss, stl_loss_terms, SafetyParams,
    SafetyRobustness, StlLossTerms,
};
pub use semantics::{max_of, min_of, robustness, Semantics, SignalMap};
pub use signals::{
    heading_change_signal, segment_headings, signal_nodes, velocity_signals, Signal, SignalNodes, CH_DTHETA,
    CH_VLAT, CH_VSAG, EPS_DISP,
};

use thiserror::Error;

use crate::diffmath::DiffError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StlError {
    #[error("unknown channel '{0}'")]
    UnknownChannel(String),
    #[error("window needs {needed} samples of '{channel}', only {available} available")]
    OutOfRange {
        channel: String,
        needed: usize,
        available: usize,
    },
    #[error("length error: {0}")]
    Length(String),
    #[error("malformed formula: {0}")]
    Malformed(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
}
