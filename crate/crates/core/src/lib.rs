//! Social path planning for bipedal robots.
//!
//! - [`diffmath`]: reverse-mode autodiff over small dense tensors.
//! - [`stl`]: signal temporal logic formulas, robustness, locomotion-safety losses.
//! - [`crowdsets`]: crowd recordings, ego-centric samples, leave-one-out splits.
//! - [`planner`]: the CVAE path planner, training and evaluation.
//! - [`lip_mpc`]: linear-inverted-pendulum step planner with a barrier constraint.
//! - [`harness`]: crowd-replay simulation, reports and the command-line front end.

pub mod diffmath;
pub mod stl;
pub mod trajectory;
pub mod crowdsets;
pub mod lip_mpc;
pub mod planner;
pub mod harness;
