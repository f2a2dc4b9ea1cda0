use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffmath::{Graph, NodeId, Reduce};
use crate::trajectory::Trajectory;

use super::semantics::{robustness, SignalMap};
use super::signals::{heading_change_signal, signal_nodes, velocity_signals, CH_DTHETA, CH_VLAT, CH_VSAG};
use super::{Comparator, Formula, Semantics, StlError};

/// Locomotion-safety bounds and loss weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyParams {
    /// Sagittal velocity bounds, m/s.
    pub v_max: f64,
    pub v_min: f64,
    /// Symmetric lateral velocity bound, m/s.
    pub v_lat: f64,
    /// Heading change bound, rad per step.
    pub dtheta_max: f64,
    /// Weight of the heading-change loss.
    pub alpha1: f64,
    /// Weight of the velocity loss.
    pub alpha2: f64,
    /// Temperature of the smooth semantics.
    pub tau: f64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            v_min: -0.3,
            v_lat: 0.5,
            dtheta_max: 0.3,
            alpha1: 1.0,
            alpha2: 1.0,
            tau: 0.1,
        }
    }
}

impl SafetyParams {
    pub fn validate(&self) -> Result<(), StlError> {
        let ok = self.v_max > self.v_min
            && self.v_lat > 0.0
            && self.dtheta_max > 0.0
            && self.alpha1 >= 0.0
            && self.alpha2 >= 0.0
            && self.tau > 0.0;
        if ok {
            Ok(())
        } else {
            Err(StlError::InvalidParams(format!("{self:?}")))
        }
    }

    /// True when both loss weights are zero.
    pub fn stl_disabled(&self) -> bool {
        self.alpha1 == 0.0 && self.alpha2 == 0.0
    }
}

/// `(phi_vel, phi_dtheta)`: both `always` over `window` steps starting at 0.
pub fn build_safety_formulas(p: &SafetyParams, window: usize) -> Result<(Formula, Formula), StlError> {
    p.validate()?;
    if window == 0 {
        return Err(StlError::Length("empty prediction window".into()));
    }
    let last = window - 1;
    let sag = Formula::and(Formula::le(CH_VSAG, p.v_max), Formula::ge(CH_VSAG, p.v_min));
    let lat = Formula::and(Formula::le(CH_VLAT, p.v_lat), Formula::ge(CH_VLAT, -p.v_lat));
    let vel = Formula::always(0, last, Formula::and(sag, lat))?;
    let dth = Formula::always(
        0,
        last,
        Formula::and(
            Formula::le(CH_DTHETA, p.dtheta_max),
            Formula::ge(CH_DTHETA, -p.dtheta_max),
        ),
    )?;
    Ok((vel, dth))
}

/// Robustness of the two safety formulas on a trajectory whose first point
/// is the current position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyRobustness {
    pub vel: f64,
    pub dtheta: f64,
}

impl SafetyRobustness {
    pub fn min(&self) -> f64 {
        self.vel.min(self.dtheta)
    }

    pub fn velocity_violation(&self) -> f64 {
        (-self.vel).max(0.0)
    }

    pub fn heading_violation(&self) -> f64 {
        (-self.dtheta).max(0.0)
    }
}

pub fn safety_robustness(
    traj: &Trajectory,
    theta0: f64,
    p: &SafetyParams,
    sem: Semantics,
) -> Result<SafetyRobustness, StlError> {
    let (vs, vl) = velocity_signals(traj, traj.dt, theta0)?;
    let dth = heading_change_signal(traj, theta0)?;
    let (phi_vel, phi_dth) = build_safety_formulas(p, vs.samples.len())?;
    let mut signals = SignalMap::new();
    signals.insert(CH_VSAG.into(), vs);
    signals.insert(CH_VLAT.into(), vl);
    signals.insert(CH_DTHETA.into(), dth);
    Ok(SafetyRobustness {
        vel: robustness(&phi_vel, &signals, 0, sem)?,
        dtheta: robustness(&phi_dth, &signals, 0, sem)?,
    })
}

/// Robustness of `phi` at step `t` over batched channels of shape `[B, T]`.
/// Returns a `[B]` node.
pub fn robustness_nodes(
    g: &mut Graph,
    phi: &Formula,
    channels: &BTreeMap<String, NodeId>,
    t: usize,
    sem: Semantics,
) -> Result<NodeId, StlError> {
    let need = t + phi.horizon();
    for ch in phi.channels() {
        let id = channels
            .get(ch)
            .ok_or_else(|| StlError::UnknownChannel(ch.to_string()))?;
        let len = g.shape(*id).get(1).copied().unwrap_or(0);
        if need >= len {
            return Err(StlError::OutOfRange {
                channel: ch.to_string(),
                needed: need + 1,
                available: len,
            });
        }
    }
    eval_nodes(g, phi, channels, t, sem)
}

fn eval_nodes(
    g: &mut Graph,
    phi: &Formula,
    channels: &BTreeMap<String, NodeId>,
    t: usize,
    sem: Semantics,
) -> Result<NodeId, StlError> {
    Ok(match phi {
        Formula::Pred {
            channel,
            cmp,
            threshold,
        } => {
            let ch = channels[channel];
            let b = g.shape(ch)[0];
            let col = g.slice(ch, 1, t, t + 1)?;
            let col = g.reshape(col, vec![b])?;
            match cmp {
                Comparator::Ge => g.add_scalar(col, -threshold)?,
                Comparator::Le => {
                    let n = g.neg(col)?;
                    g.add_scalar(n, *threshold)?
                }
            }
        }
        Formula::Not(c) => {
            let v = eval_nodes(g, c, channels, t, sem)?;
            g.neg(v)?
        }
        Formula::And(l, r) | Formula::Or(l, r) => {
            let a = eval_nodes(g, l, channels, t, sem)?;
            let b = eval_nodes(g, r, channels, t, sem)?;
            combine(g, &[a, b], matches!(phi, Formula::And(..)), sem)?
        }
        Formula::Always { a, b, child } | Formula::Eventually { a, b, child } => {
            let parts = (t + a..=t + b)
                .map(|k| eval_nodes(g, child, channels, k, sem))
                .collect::<Result<Vec<_>, _>>()?;
            combine(g, &parts, matches!(phi, Formula::Always { .. }), sem)?
        }
    })
}

/// Elementwise min (`is_min`) or max across equally shaped `[B]` nodes.
fn combine(g: &mut Graph, parts: &[NodeId], is_min: bool, sem: Semantics) -> Result<NodeId, StlError> {
    if parts.len() == 1 {
        return Ok(parts[0]);
    }
    let b = g.shape(parts[0])[0];
    let stacked = g.concat(parts, 0)?;
    let stacked = g.reshape(stacked, vec![parts.len(), b])?;
    Ok(match (sem, is_min) {
        (Semantics::Hard, true) => g.reduce(Reduce::Min, stacked, Some(0))?,
        (Semantics::Hard, false) => g.reduce(Reduce::Max, stacked, Some(0))?,
        (Semantics::Smooth(tau), false) => g.reduce(Reduce::LogSumExp(tau), stacked, Some(0))?,
        (Semantics::Smooth(tau), true) => {
            let n = g.neg(stacked)?;
            let m = g.reduce(Reduce::LogSumExp(tau), n, Some(0))?;
            g.neg(m)?
        }
    })
}

/// Per-trajectory violation terms, each a `[B]` node holding `ReLU(-rho)`.
#[derive(Clone, Copy, Debug)]
pub struct StlLossTerms {
    pub dtheta: NodeId,
    pub vel: NodeId,
}

/// `ReLU(-rho)` of both safety formulas for a `[B, 2P]` batch of trajectories
/// whose first point is the current position.
pub fn stl_loss_terms(
    g: &mut Graph,
    traj: NodeId,
    theta0: &[f64],
    p: &SafetyParams,
    dt: f64,
    sem: Semantics,
) -> Result<StlLossTerms, StlError> {
    let sig = signal_nodes(g, traj, theta0, dt)?;
    let window = g.shape(sig.v_sag)[1];
    let (phi_vel, phi_dth) = build_safety_formulas(p, window)?;
    let mut channels = BTreeMap::new();
    channels.insert(CH_VSAG.to_string(), sig.v_sag);
    channels.insert(CH_VLAT.to_string(), sig.v_lat);
    channels.insert(CH_DTHETA.to_string(), sig.dtheta);
    let rho_d = robustness_nodes(g, &phi_dth, &channels, 0, sem)?;
    let rho_v = robustness_nodes(g, &phi_vel, &channels, 0, sem)?;
    let nd = g.neg(rho_d)?;
    let nv = g.neg(rho_v)?;
    Ok(StlLossTerms {
        dtheta: g.relu(nd)?,
        vel: g.relu(nv)?,
    })
}

/// `alpha1 * ReLU(-rho_dtheta) + alpha2 * ReLU(-rho_vel)`, averaged over the batch.
pub fn stl_loss(
    g: &mut Graph,
    traj: NodeId,
    theta0: &[f64],
    p: &SafetyParams,
    dt: f64,
    sem: Semantics,
) -> Result<NodeId, StlError> {
    let terms = stl_loss_terms(g, traj, theta0, p, dt, sem)?;
    let a = g.scale(terms.dtheta, p.alpha1)?;
    let b = g.scale(terms.vel, p.alpha2)?;
    let s = g.add(a, b)?;
    Ok(g.mean(s)?)
}
