//! Crowd-replay simulation with a walking robot in place of a recorded
//! pedestrian, metrics reports and the run configuration shared by the
//! command-line front end.

mod config;
mod report;
mod sim;

pub use config::{DatasetSection, ModelSection, MpcSection, RunConfig, RunSection};
pub use report::{
    compare_reports, metrics_report, read_metrics, rollout_report, write_metrics, ReportFiles, RolloutRow,
    METRICS_FORMAT, METRICS_VERSION,
};
pub use sim::{
    eligible_egos, replay_simulate, select_egos, RolloutHeader, RolloutLog, RolloutSummary, SolverInfo, Status,
    StepRecord, StepSignals, ROLLOUT_FORMAT, ROLLOUT_VERSION,
};

use thiserror::Error;

use crate::crowdsets::CrowdError;
use crate::lip_mpc::MpcError;
use crate::planner::PlannerError;
use crate::stl::StlError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("pedestrian {id} not found in scene {scene}")]
    UnknownPedestrian { scene: String, id: i64 },
    #[error("numerical: {0}")]
    Numerical(String),
}

impl HarnessError {
    /// Process exit code: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Data(_) | HarnessError::UnknownPedestrian { .. } => 2,
            HarnessError::Numerical(_) => 3,
        }
    }
}

impl From<CrowdError> for HarnessError {
    fn from(e: CrowdError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<StlError> for HarnessError {
    fn from(e: StlError) -> Self {
        match e {
            StlError::InvalidParams(_) => HarnessError::Usage(e.to_string()),
            StlError::Diff(_) => HarnessError::Numerical(e.to_string()),
            _ => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<PlannerError> for HarnessError {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::Usage(_) => HarnessError::Usage(e.to_string()),
            PlannerError::Stl(s) => s.into(),
            PlannerError::Divergence { .. } | PlannerError::Diff(_) => HarnessError::Numerical(e.to_string()),
            PlannerError::Dimension(_) | PlannerError::Load(_) | PlannerError::Version { .. } | PlannerError::Io(_) => {
                HarnessError::Data(e.to_string())
            }
        }
    }
}

impl From<MpcError> for HarnessError {
    fn from(e: MpcError) -> Self {
        match e {
            MpcError::InvalidConfig(_) => HarnessError::Usage(e.to_string()),
            _ => HarnessError::Numerical(e.to_string()),
        }
    }
}
