use serde::{Deserialize, Serialize};

use crate::stl::EPS_DISP;
use crate::trajectory::{distance, Point};

use super::{CrowdError, Scene, Track};

/// Windowing parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub n_obs: usize,
    pub n_pred: usize,
    /// Neighbor radius, meters.
    pub radius: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            n_obs: 8,
            n_pred: 8,
            radius: 4.0,
        }
    }
}

/// One planner instance in the ego frame (ego position at the anchor is the origin).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocialSample {
    pub scene: String,
    pub ego_id: i64,
    /// Step index of the anchor.
    pub t_anchor: usize,
    /// Past tracks of nearby pedestrians, `n_obs` points each, sorted by id.
    pub neighbors: Vec<Vec<Point>>,
    pub goal: Point,
    pub ego_future: Vec<Point>,
    /// World-frame heading at the anchor.
    pub theta0: f64,
    /// World position of the ego at the anchor.
    pub anchor_world: Point,
}

impl SocialSample {
    /// Stable identifier used to pair per-sample metrics.
    pub fn id(&self) -> String {
        format!("{}/{}/{}", self.scene, self.ego_id, self.t_anchor)
    }
}

/// Extraction result.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Extraction {
    pub samples: Vec<SocialSample>,
    /// Tracks too short to yield a single sample.
    pub skipped_tracks: usize,
}

/// Heading at the anchor: the latest non-degenerate history displacement,
/// else the bearing of `goal`, else 0.
pub fn anchor_heading(history: &[Point], goal_rel: Point) -> f64 {
    for w in history.windows(2).rev() {
        let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
        if dx.hypot(dy) >= EPS_DISP {
            return dy.atan2(dx);
        }
    }
    if goal_rel[0].hypot(goal_rel[1]) >= EPS_DISP {
        goal_rel[1].atan2(goal_rel[0])
    } else {
        0.0
    }
}

/// `n` points of `track` ending at step `t`, back-padded with the earliest point.
fn padded_history(track: &Track, t: usize, n: usize) -> Vec<Point> {
    let first = t + 1 - n.min(t + 1);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n - (t + 1 - first) {
        out.push(track.points[0]);
    }
    for k in first..=t {
        out.push(track.at(k).unwrap_or(track.points[0]));
    }
    out
}

fn rel(p: Point, origin: Point) -> Point {
    [p[0] - origin[0], p[1] - origin[1]]
}

/// Neighbor histories around `center` at step `t`, ego-frame, sorted by id.
pub fn neighbors_at(scene: &Scene, t: usize, center: Point, exclude: Option<i64>, cfg: &ExtractConfig) -> Vec<Vec<Point>> {
    scene
        .tracks
        .iter()
        .filter(|tr| Some(tr.ped_id) != exclude)
        .filter_map(|tr| {
            let p = tr.at(t)?;
            if distance(p, center) > cfg.radius {
                return None;
            }
            Some(padded_history(tr, t, cfg.n_obs).into_iter().map(|q| rel(q, center)).collect())
        })
        .collect()
}

/// Windows every track into samples with `n_obs` history and `n_pred` future.
pub fn extract_samples(scene: &Scene, cfg: &ExtractConfig) -> Extraction {
    let mut out = Extraction::default();
    let span = cfg.n_obs + cfg.n_pred;
    for ego in &scene.tracks {
        if ego.points.len() < span || cfg.n_obs == 0 {
            out.skipped_tracks += 1;
            continue;
        }
        for t in ego.start + cfg.n_obs - 1..=ego.end() - 1 - cfg.n_pred {
            let origin = ego.at(t).expect("anchor inside track");
            let future: Vec<Point> = (1..=cfg.n_pred)
                .map(|k| rel(ego.points[t + k - ego.start], origin))
                .collect();
            let goal = *future.last().unwrap();
            let hist = &ego.points[t + 1 - cfg.n_obs - ego.start..=t - ego.start];
            out.samples.push(SocialSample {
                scene: scene.name.clone(),
                ego_id: ego.ped_id,
                t_anchor: t,
                neighbors: neighbors_at(scene, t, origin, Some(ego.ped_id), cfg),
                goal,
                ego_future: future,
                theta0: anchor_heading(hist, goal),
                anchor_world: origin,
            });
        }
    }
    out
}

/// Maps an ego-frame trajectory back to the world frame.
pub fn to_world_frame(points: &[Point], anchor_world: Point) -> Vec<Point> {
    points.iter().map(|p| [p[0] + anchor_world[0], p[1] + anchor_world[1]]).collect()
}

/// Which scene is held out.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub holdout: String,
    pub train: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Split {
    pub spec: SplitSpec,
    pub train: Vec<SocialSample>,
    pub test: Vec<SocialSample>,
}

/// Test on `holdout`, train on every other scene.
pub fn leave_one_out(scenes: &[Scene], holdout: &str, cfg: &ExtractConfig) -> Result<Split, CrowdError> {
    if !scenes.iter().any(|s| s.name == holdout) {
        return Err(CrowdError::UnknownScene(holdout.to_string()));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut names = Vec::new();
    for s in scenes {
        let ex = extract_samples(s, cfg);
        if s.name == holdout {
            test.extend(ex.samples);
        } else {
            names.push(s.name.clone());
            train.extend(ex.samples);
        }
    }
    if train.is_empty() {
        log::warn!("leave-one-out with holdout {holdout}: training set is empty");
    }
    Ok(Split {
        spec: SplitSpec {
            holdout: holdout.to_string(),
            train: names,
        },
        train,
        test,
    })
}
