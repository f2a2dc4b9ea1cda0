use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// Timestep shared by the crowd datasets, the planner and the walking model.
pub const DEFAULT_DT: f64 = 0.4;

/// Positions sampled at a fixed timestep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<Point>,
}

impl Trajectory {
    pub fn new(points: Vec<Point>, dt: f64) -> Self {
        Self { dt, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same trajectory with `p` inserted at the front.
    pub fn prefixed(&self, p: Point) -> Self {
        let mut points = Vec::with_capacity(self.points.len() + 1);
        points.push(p);
        points.extend_from_slice(&self.points);
        Self { dt: self.dt, points }
    }

    pub fn translated(&self, by: Point) -> Self {
        Self {
            dt: self.dt,
            points: self.points.iter().map(|p| [p[0] + by[0], p[1] + by[1]]).collect(),
        }
    }

    /// Interleaved `x0, y0, x1, y1, ...`.
    pub fn flatten(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    pub fn from_flat(flat: &[f64], dt: f64) -> Self {
        Self {
            dt,
            points: flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        }
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Average and final displacement error between equally long trajectories.
pub fn ade_fde(pred: &[Point], truth: &[Point]) -> (f64, f64) {
    assert_eq!(pred.len(), truth.len(), "ADE/FDE needs equal lengths");
    if pred.is_empty() {
        return (0.0, 0.0);
    }
    let errs: Vec<f64> = pred.iter().zip(truth).map(|(a, b)| distance(*a, *b)).collect();
    let ade = errs.iter().sum::<f64>() / errs.len() as f64;
    (ade, *errs.last().unwrap())
}
