//! Deterministic social-force crowd generator.
//!
//! Produces recordings in the same `frame ped x y` layout as the public
//! crowd datasets, with per-scene speed profiles, standing pedestrians,
//! small groups, turning walkers and annotation noise.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::trajectory::{Point, DEFAULT_DT};

use super::{CrowdError, FormatSpec, Record, Scene};

pub const SCENE_NAMES: [&str; 5] = ["ETH", "HOTEL", "UNIV", "ZARA1", "ZARA2"];

/// Native frames per recorded step in generated files.
pub const FRAME_STEP: f64 = 10.0;

const SUBSTEPS: usize = 4;
const RELAX: f64 = 0.5;
const REPULSE_A: f64 = 2.0;
const REPULSE_B: f64 = 0.3;
const BODY: f64 = 0.3;
const ARRIVE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub name: String,
    pub steps: usize,
    /// Width and height of the walkable area, meters.
    pub area: [f64; 2],
    /// Expected new walkers per step.
    pub spawn_rate: f64,
    pub speed_mean: f64,
    pub speed_sd: f64,
    /// Fraction of spawns that stand in place for a while.
    pub stander_frac: f64,
    /// Fraction of walker spawns that bring a companion.
    pub group_frac: f64,
    /// Fraction of walkers that detour through an intermediate waypoint.
    pub turn_frac: f64,
    /// Standard deviation of the position noise, meters.
    pub noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Scene-specific defaults, keyed by the names in [`SCENE_NAMES`].
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        let base = |area: [f64; 2], rate, mean, sd, stand, group, turn, salt: u64| SynthConfig {
            name: name.to_string(),
            steps: 600,
            area,
            spawn_rate: rate,
            speed_mean: mean,
            speed_sd: sd,
            stander_frac: stand,
            group_frac: group,
            turn_frac: turn,
            noise: 0.02,
            seed: seed.wrapping_mul(31).wrapping_add(salt),
        };
        Some(match name {
            "ETH" => base([14.0, 16.0], 0.25, 1.3, 0.2, 0.0, 0.2, 0.3, 1),
            "HOTEL" => base([10.0, 12.0], 0.3, 1.0, 0.25, 0.3, 0.2, 0.2, 2),
            "UNIV" => base([16.0, 14.0], 0.45, 0.7, 0.15, 0.1, 0.3, 0.3, 3),
            "ZARA1" => base([15.0, 10.0], 0.25, 1.15, 0.2, 0.15, 0.3, 0.3, 4),
            "ZARA2" => base([15.0, 10.0], 0.35, 1.1, 0.2, 0.2, 0.3, 0.3, 5),
            _ => return None,
        })
    }
}

struct Agent {
    id: i64,
    pos: Point,
    vel: Point,
    speed: f64,
    waypoints: Vec<Point>,
    /// Remaining steps for a standing pedestrian.
    standing: Option<usize>,
    age: usize,
}

fn edge_point(rng: &mut ChaCha8Rng, area: [f64; 2], side: usize) -> Point {
    let (w, h) = (area[0], area[1]);
    match side {
        0 => [-0.5, rng.random_range(0.5..h - 0.5)],
        1 => [w + 0.5, rng.random_range(0.5..h - 0.5)],
        2 => [rng.random_range(0.5..w - 0.5), -0.5],
        _ => [rng.random_range(0.5..w - 0.5), h + 0.5],
    }
}

fn opposite(side: usize) -> usize {
    side ^ 1
}

/// Runs the crowd simulation and records every step.
pub fn generate(cfg: &SynthConfig) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let speed = Normal::new(cfg.speed_mean, cfg.speed_sd.max(1e-9)).expect("valid speed profile");
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("valid noise");
    let mut agents: Vec<Agent> = Vec::new();
    let mut records = Vec::new();
    let mut next_id = 1i64;
    let h = DEFAULT_DT / SUBSTEPS as f64;

    for step in 0..cfg.steps {
        // spawns
        let mut budget = cfg.spawn_rate;
        while budget > 0.0 {
            if rng.random::<f64>() < budget.min(1.0) {
                if rng.random::<f64>() < cfg.stander_frac {
                    let pos = [
                        rng.random_range(1.0..cfg.area[0] - 1.0),
                        rng.random_range(1.0..cfg.area[1] - 1.0),
                    ];
                    agents.push(Agent {
                        id: next_id,
                        pos,
                        vel: [0.0, 0.0],
                        speed: 0.0,
                        waypoints: Vec::new(),
                        standing: Some(rng.random_range(20..60)),
                        age: 0,
                    });
                    next_id += 1;
                } else {
                    let side = rng.random_range(0..4);
                    let start = edge_point(&mut rng, cfg.area, side);
                    let end = edge_point(&mut rng, cfg.area, opposite(side));
                    let mut waypoints = vec![end];
                    if rng.random::<f64>() < cfg.turn_frac {
                        let mid = [(start[0] + end[0]) / 2.0, (start[1] + end[1]) / 2.0];
                        let (dx, dy) = (end[0] - start[0], end[1] - start[1]);
                        let len = dx.hypot(dy).max(1e-9);
                        let off = rng.random_range(1.0..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                        waypoints.insert(0, [mid[0] - dy / len * off, mid[1] + dx / len * off]);
                    }
                    let v = speed.sample(&mut rng).clamp(0.3, 2.2);
                    let dir = {
                        let t = waypoints[0];
                        let (dx, dy) = (t[0] - start[0], t[1] - start[1]);
                        let n = dx.hypot(dy).max(1e-9);
                        [dx / n, dy / n]
                    };
                    let group = rng.random::<f64>() < cfg.group_frac;
                    agents.push(Agent {
                        id: next_id,
                        pos: start,
                        vel: [dir[0] * v, dir[1] * v],
                        speed: v,
                        waypoints: waypoints.clone(),
                        standing: None,
                        age: 0,
                    });
                    next_id += 1;
                    if group {
                        let lat = [-dir[1] * 0.7, dir[0] * 0.7];
                        agents.push(Agent {
                            id: next_id,
                            pos: [start[0] + lat[0], start[1] + lat[1]],
                            vel: [dir[0] * v, dir[1] * v],
                            speed: v,
                            waypoints: waypoints.iter().map(|w| [w[0] + lat[0], w[1] + lat[1]]).collect(),
                            standing: None,
                            age: 0,
                        });
                        next_id += 1;
                    }
                }
            }
            budget -= 1.0;
        }

        for a in &agents {
            records.push(Record {
                frame: step as f64 * FRAME_STEP,
                ped_id: a.id,
                pos: [a.pos[0] + noise.sample(&mut rng), a.pos[1] + noise.sample(&mut rng)],
            });
        }

        for _ in 0..SUBSTEPS {
            let snapshot: Vec<Point> = agents.iter().map(|a| a.pos).collect();
            for (i, a) in agents.iter_mut().enumerate() {
                if a.standing.is_some() {
                    continue;
                }
                let target = a.waypoints[0];
                let (dx, dy) = (target[0] - a.pos[0], target[1] - a.pos[1]);
                let d = dx.hypot(dy).max(1e-9);
                let mut f = [
                    (a.speed * dx / d - a.vel[0]) / RELAX,
                    (a.speed * dy / d - a.vel[1]) / RELAX,
                ];
                for (j, q) in snapshot.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let (rx, ry) = (a.pos[0] - q[0], a.pos[1] - q[1]);
                    let r = rx.hypot(ry);
                    if r > 3.0 || r < 1e-9 {
                        continue;
                    }
                    let mag = REPULSE_A * ((2.0 * BODY - r) / REPULSE_B).exp();
                    f[0] += mag * rx / r;
                    f[1] += mag * ry / r;
                }
                a.vel[0] += h * f[0];
                a.vel[1] += h * f[1];
                let v = a.vel[0].hypot(a.vel[1]);
                let cap = 1.3 * a.speed;
                if v > cap {
                    a.vel = [a.vel[0] * cap / v, a.vel[1] * cap / v];
                }
                a.pos[0] += h * a.vel[0];
                a.pos[1] += h * a.vel[1];
            }
        }

        for a in agents.iter_mut() {
            a.age += 1;
            if let Some(left) = a.standing.as_mut() {
                *left = left.saturating_sub(1);
            } else if crate::trajectory::distance(a.pos, a.waypoints[0]) < ARRIVE {
                a.waypoints.remove(0);
            }
        }
        agents.retain(|a| a.standing.is_none_or(|l| l > 0) && (a.standing.is_some() || !a.waypoints.is_empty()) && a.age < 200);
    }

    let spec = FormatSpec {
        name: Some(cfg.name.clone()),
        frame_step: FRAME_STEP,
        dt: DEFAULT_DT,
    };
    Scene::from_records(&cfg.name, &records, &spec).expect("generated scene is never empty")
}

/// Writes `<dir>/<name>.txt` and its sidecar.
pub fn write_scene(dir: &Path, scene: &Scene) -> Result<(), CrowdError> {
    fs::create_dir_all(dir).map_err(|e| CrowdError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{}.txt", scene.name));
    fs::write(&path, scene.to_text(FRAME_STEP)).map_err(|e| CrowdError::Io(format!("{}: {e}", path.display())))?;
    let spec = FormatSpec {
        name: Some(scene.name.clone()),
        frame_step: FRAME_STEP,
        dt: scene.dt,
    };
    let side = FormatSpec::sidecar_path(&path);
    let text = toml::to_string(&spec).map_err(|e| CrowdError::Sidecar(e.to_string()))?;
    fs::write(&side, text).map_err(|e| CrowdError::Io(format!("{}: {e}", side.display())))
}

/// All five preset scenes for `seed`.
pub fn corpus(seed: u64) -> Vec<Scene> {
    SCENE_NAMES
        .iter()
        .map(|n| generate(&SynthConfig::preset(n, seed).expect("known preset")))
        .collect()
}
