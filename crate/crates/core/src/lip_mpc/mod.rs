//! Reduced-order step planner: closed-form linear-inverted-pendulum
//! dynamics, a distance barrier around the closest pedestrian and an
//! N-step tracking problem solved by a log-barrier Newton method.

mod model;
mod solver;

pub use model::{
    cbf_h, references_from_path, rollout, running_cost, step_dynamics, terminal_cost, weighted_deviation,
    ControlInput, LipParams, LipState, Reference, CBF_RADIUS,
};
pub use solver::{solve, solve_with, MpcConfig, MpcProblem, MpcSolution, TraceRow};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MpcError {
    #[error("start state violates the barrier (h = {h})")]
    InfeasibleStart { h: f64 },
    #[error("no feasible iterate found (max violation {max_violation})")]
    SolverFailure {
        best: Vec<ControlInput>,
        max_violation: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
