use serde::{Deserialize, Serialize};

use crate::stl::{heading_change_signal, velocity_signals};
use crate::trajectory::{wrap_angle, Point, Trajectory};

use super::MpcError;

/// Linear inverted pendulum parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LipParams {
    /// CoM height, meters.
    pub height: f64,
    /// Step duration, seconds.
    pub step_time: f64,
    pub gravity: f64,
}

impl Default for LipParams {
    fn default() -> Self {
        Self {
            height: 0.9,
            step_time: 0.4,
            gravity: 9.81,
        }
    }
}

impl LipParams {
    pub fn omega(&self) -> f64 {
        (self.gravity / self.height).sqrt()
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        if self.height > 0.0 && self.step_time > 0.0 && self.gravity > 0.0 {
            Ok(())
        } else {
            Err(MpcError::InvalidConfig(format!("{self:?}")))
        }
    }

    /// `(sinh(wT)/w, 1 - cosh(wT), cosh(wT), w*sinh(wT))`.
    pub(crate) fn coefficients(&self) -> Coeffs {
        let w = self.omega();
        let (s, c) = ((w * self.step_time).sinh(), (w * self.step_time).cosh());
        Coeffs {
            a: s / w,
            b: 1.0 - c,
            c,
            d: w * s,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Coeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Walking state `[x_g, y_g, theta, xdot]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub xdot: f64,
}

impl LipState {
    pub fn new(x: f64, y: f64, theta: f64, xdot: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            xdot,
        }
    }

    pub fn pos(&self) -> Point {
        [self.x, self.y]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.theta, self.xdot]
    }
}

/// Sagittal foot placement and heading change for one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub u_f: f64,
    pub u_dtheta: f64,
}

/// One closed-form walking step.
pub fn step_dynamics(p: &LipParams, s: &LipState, u: &ControlInput) -> LipState {
    let k = p.coefficients();
    let disp = k.a * s.xdot + k.b * u.u_f;
    let (sn, cs) = s.theta.sin_cos();
    LipState {
        x: s.x + disp * cs,
        y: s.y + disp * sn,
        theta: wrap_angle(s.theta + u.u_dtheta),
        xdot: k.c * s.xdot - k.d * u.u_f,
    }
}

/// States after each control, starting from `s0` (excluded).
pub fn rollout(p: &LipParams, s0: &LipState, controls: &[ControlInput]) -> Vec<LipState> {
    let mut s = *s0;
    controls
        .iter()
        .map(|u| {
            s = step_dynamics(p, &s, u);
            s
        })
        .collect()
}

/// Radius scaling the barrier around a pedestrian, meters.
pub const CBF_RADIUS: f64 = 0.2;

/// Barrier value: non-negative outside the 0.2 m circle around `ped`.
pub fn cbf_h(s: &LipState, ped: Point) -> f64 {
    ((s.x - ped[0]) / CBF_RADIUS).hypot((s.y - ped[1]) / CBF_RADIUS) - 1.0
}

/// Tracking target for one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub pos: Point,
    pub theta: f64,
    pub xdot: f64,
}

/// Weighted squared deviation; the heading residual is wrapped.
pub fn weighted_deviation(s: &LipState, target: &[f64; 4], w: &[f64; 4]) -> f64 {
    residuals(s, target).iter().zip(w).map(|(r, w)| w * r * r).sum()
}

pub(crate) fn residuals(s: &LipState, target: &[f64; 4]) -> [f64; 4] {
    [
        s.x - target[0],
        s.y - target[1],
        wrap_angle(s.theta - target[2]),
        s.xdot - target[3],
    ]
}

pub fn running_cost(s: &LipState, r: &Reference, w1: &[f64; 4]) -> f64 {
    weighted_deviation(s, &[r.pos[0], r.pos[1], r.theta, r.xdot], w1)
}

pub fn terminal_cost(s: &LipState, goal: Point, theta_terminal: f64, xdot_terminal: f64, w2: &[f64; 4]) -> f64 {
    weighted_deviation(s, &[goal[0], goal[1], theta_terminal, xdot_terminal], w2)
}

/// Tracking references from a world-frame path whose first point is the
/// current CoM. Entry `q` holds waypoint `q`, the heading of segment `q`
/// accumulated from the heading-change signal, and the sagittal velocity of
/// segment `q`.
pub fn references_from_path(path: &[Point], theta_start: f64, dt: f64) -> Result<Vec<Reference>, MpcError> {
    if path.len() < 2 {
        return Err(MpcError::InvalidConfig("reference path needs at least 2 points".into()));
    }
    let traj = Trajectory::new(path.to_vec(), dt);
    let dth = heading_change_signal(&traj, theta_start).map_err(|e| MpcError::InvalidConfig(e.to_string()))?;
    let (vs, _) = velocity_signals(&traj, dt, theta_start).map_err(|e| MpcError::InvalidConfig(e.to_string()))?;
    let mut heading = theta_start;
    Ok(dth
        .samples
        .iter()
        .zip(&vs.samples)
        .enumerate()
        .map(|(q, (d, v))| {
            heading += d;
            Reference {
                pos: path[q],
                theta: wrap_angle(heading),
                xdot: *v,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn worked_step() {
        let p = LipParams::default();
        let s = step_dynamics(&p, &LipState::new(0.0, 0.0, 0.0, 0.5), &ControlInput::default());
        assert!((s.x - 0.26342).abs() < 5e-6, "{}", s.x);
        assert!((s.xdot - 1.00317).abs() < 5e-6, "{}", s.xdot);
        assert_eq!(s.y, 0.0);
    }

    #[test]
    fn equilibrium_and_rotation() {
        let p = LipParams::default();
        let s0 = LipState::new(1.0, 2.0, 0.3, 0.0);
        assert_eq!(step_dynamics(&p, &s0, &ControlInput::default()), s0);
        let up = step_dynamics(&p, &LipState::new(0.0, 0.0, FRAC_PI_2, 0.5), &ControlInput::default());
        assert!(up.x.abs() < 1e-15 && (up.y - 0.26342).abs() < 5e-6);
    }

    #[test]
    fn barrier_values() {
        let at = |x, y| LipState::new(x, y, 0.0, 0.0);
        assert!(cbf_h(&at(0.2, 0.0), [0.0, 0.0]).abs() < 1e-15);
        assert!((cbf_h(&at(0.4, 0.0), [0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cbf_h(&at(0.0, 0.0), [0.0, 0.0]), -1.0);
    }

    #[test]
    fn cost_cases() {
        let w = [1.0, 1.0, 0.5, 0.5];
        let r = Reference {
            pos: [1.0, 2.0],
            theta: 0.4,
            xdot: 0.7,
        };
        let s = LipState::new(1.0, 2.0, 0.4, 0.7);
        assert_eq!(running_cost(&s, &r, &w), 0.0);
        let s = LipState::new(1.0, 2.0, 0.4, 1.7);
        assert!((running_cost(&s, &r, &w) - 0.5).abs() < 1e-15);
        let s = LipState::new(0.0, 0.0, 3.1, 0.0);
        let c = terminal_cost(&s, [0.0, 0.0], -3.1, 0.0, &[0.0, 0.0, 1.0, 0.0]);
        let wrapped = 2.0 * std::f64::consts::PI - 6.2;
        assert!((c.sqrt() - wrapped).abs() < 1e-12 && (c.sqrt() - 0.0832).abs() < 1e-4);
    }

    #[test]
    fn path_references() {
        let refs = references_from_path(&[[0.0, 0.0], [0.4, 0.0], [0.8, 0.4]], 0.0, 0.4).unwrap();
        assert_eq!(refs.len(), 2);
        assert_eq!(refs[0].pos, [0.0, 0.0]);
        assert!((refs[0].xdot - 1.0).abs() < 1e-12 && refs[0].theta == 0.0);
        assert!((refs[1].theta - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!((refs[1].xdot - 1.0).abs() < 1e-12);
    }
}
