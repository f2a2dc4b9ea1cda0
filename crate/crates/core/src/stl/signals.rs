use crate::diffmath::{Graph, NodeId, Tensor};
use crate::trajectory::{wrap_angle, Trajectory};

use super::StlError;

/// Displacements shorter than this (meters) keep the previous heading.
pub const EPS_DISP: f64 = 1e-3;

pub const CH_VSAG: &str = "v_sag";
pub const CH_VLAT: &str = "v_lat";
pub const CH_DTHETA: &str = "dtheta";

/// A named scalar signal sampled every `dt` seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub name: String,
    pub samples: Vec<f64>,
    pub dt: f64,
}

impl Signal {
    pub fn new(name: &str, samples: Vec<f64>, dt: f64) -> Result<Self, StlError> {
        if samples.is_empty() {
            return Err(StlError::Length("signal has no samples".into()));
        }
        if !(dt > 0.0) {
            return Err(StlError::InvalidParams(format!("dt = {dt}")));
        }
        Ok(Self {
            name: name.to_string(),
            samples,
            dt,
        })
    }
}

/// Heading of every segment, with degenerate segments inheriting the
/// previous heading (the first one inherits `theta0`).
pub fn segment_headings(traj: &Trajectory, theta0: f64) -> Result<Vec<f64>, StlError> {
    if traj.points.len() < 2 {
        return Err(StlError::Length(format!(
            "need at least 2 points, got {}",
            traj.points.len()
        )));
    }
    let mut prev = theta0;
    Ok(traj
        .points
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
            if dx.hypot(dy) >= EPS_DISP {
                prev = dy.atan2(dx);
            }
            prev
        })
        .collect())
}

/// Per-step heading change, wrapped to `(-pi, pi]`.
pub fn heading_change_signal(traj: &Trajectory, theta0: f64) -> Result<Signal, StlError> {
    let headings = segment_headings(traj, theta0)?;
    let mut prev = theta0;
    let samples = headings
        .iter()
        .map(|&h| {
            let d = wrap_angle(h - prev);
            prev = h;
            d
        })
        .collect();
    Signal::new(CH_DTHETA, samples, traj.dt)
}

/// Sagittal and lateral velocity of each step, expressed in the frame of the
/// previous segment's heading (`theta0` for the first step).
pub fn velocity_signals(traj: &Trajectory, dt: f64, theta0: f64) -> Result<(Signal, Signal), StlError> {
    if !(dt > 0.0) {
        return Err(StlError::InvalidParams(format!("dt = {dt}")));
    }
    let headings = segment_headings(traj, theta0)?;
    let mut sag = Vec::with_capacity(headings.len());
    let mut lat = Vec::with_capacity(headings.len());
    let mut frame = theta0;
    for (w, h) in traj.points.windows(2).zip(&headings) {
        let (vx, vy) = ((w[1][0] - w[0][0]) / dt, (w[1][1] - w[0][1]) / dt);
        let (s, c) = frame.sin_cos();
        sag.push(vx * c + vy * s);
        lat.push(-vx * s + vy * c);
        frame = *h;
    }
    Ok((Signal::new(CH_VSAG, sag, dt)?, Signal::new(CH_VLAT, lat, dt)?))
}

/// Differentiable signal channels for a batch of trajectories, each `[B, S]`.
#[derive(Clone, Copy, Debug)]
pub struct SignalNodes {
    pub v_sag: NodeId,
    pub v_lat: NodeId,
    pub dtheta: NodeId,
}

/// Builds the velocity and heading-change channels for a `[B, 2P]` batch of
/// interleaved trajectories (`x0, y0, x1, y1, ...`), one `theta0` per row.
pub fn signal_nodes(g: &mut Graph, traj: NodeId, theta0: &[f64], dt: f64) -> Result<SignalNodes, StlError> {
    let shape = g.shape(traj).to_vec();
    if shape.len() != 2 || shape[1] % 2 != 0 || shape[1] < 4 {
        return Err(StlError::Length(format!(
            "expected [batch, 2*points] with >= 2 points, got {shape:?}"
        )));
    }
    let (b, p) = (shape[0], shape[1] / 2);
    if theta0.len() != b {
        return Err(StlError::Length("one theta0 per trajectory required".into()));
    }
    let s = p - 1;
    let t3 = g.reshape(traj, vec![b, p, 2])?;
    let xs = g.slice(t3, 2, 0, 1)?;
    let xs = g.reshape(xs, vec![b, p])?;
    let ys = g.slice(t3, 2, 1, 2)?;
    let ys = g.reshape(ys, vec![b, p])?;
    let x_hi = g.slice(xs, 1, 1, p)?;
    let x_lo = g.slice(xs, 1, 0, s)?;
    let dx = g.sub(x_hi, x_lo)?;
    let y_hi = g.slice(ys, 1, 1, p)?;
    let y_lo = g.slice(ys, 1, 0, s)?;
    let dy = g.sub(y_hi, y_lo)?;
    let raw = g.atan2(dy, dx)?;

    let dxv = g.value(dx).values().to_vec();
    let dyv = g.value(dy).values().to_vec();

    let mut prev = g.constant(Tensor::new(vec![b, 1], theta0.to_vec())?);
    let (mut sag, mut lat, mut dth) = (Vec::with_capacity(s), Vec::with_capacity(s), Vec::with_capacity(s));
    for q in 0..s {
        let col = g.slice(raw, 1, q, q + 1)?;
        let mask: Vec<f64> = (0..b)
            .map(|i| {
                let k = i * s + q;
                if dxv[k].hypot(dyv[k]) >= EPS_DISP {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let mask = g.constant(Tensor::new(vec![b, 1], mask)?);
        let delta = g.sub(col, prev)?;
        let picked = g.mul(mask, delta)?;
        let heading = g.add(prev, picked)?;

        let diff = g.sub(heading, prev)?;
        let shift: Vec<f64> = g.value(diff).values().iter().map(|d| wrap_angle(*d) - d).collect();
        let shift = g.constant(Tensor::new(vec![b, 1], shift)?);
        dth.push(g.add(diff, shift)?);

        let dxq = g.slice(dx, 1, q, q + 1)?;
        let dyq = g.slice(dy, 1, q, q + 1)?;
        let c = g.cos(prev)?;
        let sn = g.sin(prev)?;
        let a1 = g.mul(dxq, c)?;
        let a2 = g.mul(dyq, sn)?;
        let along = g.add(a1, a2)?;
        sag.push(g.scale(along, 1.0 / dt)?);
        let b1 = g.mul(dyq, c)?;
        let b2 = g.mul(dxq, sn)?;
        let across = g.sub(b1, b2)?;
        lat.push(g.scale(across, 1.0 / dt)?);

        prev = heading;
    }
    Ok(SignalNodes {
        v_sag: g.concat(&sag, 1)?,
        v_lat: g.concat(&lat, 1)?,
        dtheta: g.concat(&dth, 1)?,
    })
}
