use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crowdsets::{neighbors_at, to_world_frame, Scene};
use crate::lip_mpc::{
    cbf_h, references_from_path, solve_with, step_dynamics, ControlInput, LipParams, LipState, MpcError, MpcProblem,
};
use crate::planner::{PlanInput, PlannerModel};
use crate::stl::{safety_robustness, Semantics, EPS_DISP};
use crate::trajectory::{distance, wrap_angle, Point};

use super::{HarnessError, RunConfig};

pub const ROLLOUT_FORMAT: &str = "socialnav-rollout";
pub const ROLLOUT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ReachedGoal,
    HorizonExhausted,
    SolverFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::ReachedGoal => "reached_goal",
            Status::HorizonExhausted => "horizon_exhausted",
            Status::SolverFailure => "solver_failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutHeader {
    pub format: String,
    pub version: u32,
    pub scene: String,
    pub ego_id: i64,
    pub variant: String,
    pub start: LipState,
    pub goal: Point,
    /// Planner goals farther than this are pulled in along the bearing.
    pub goal_clip: f64,
    /// Recorded track of the substituted pedestrian, one point per step.
    pub ground_truth: Vec<Point>,
}

/// Velocity and heading change realized by one applied step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSignals {
    pub v_sag: f64,
    pub v_lat: f64,
    pub dtheta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub state: LipState,
    pub control: ControlInput,
    pub next: LipState,
    /// Planner output in the world frame.
    pub plan: Vec<Point>,
    /// Hard robustness of the plan, `[velocity, heading change]`.
    pub plan_robustness: [f64; 2],
    pub pedestrian: Option<Point>,
    /// Barrier value of `state`; null when no pedestrian is present.
    pub h: Option<f64>,
    /// Barrier value of `next` against the same pedestrian position.
    pub h_next: Option<f64>,
    pub signals: StepSignals,
    pub solver: Option<SolverInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub status: Status,
    pub steps: usize,
    pub final_state: LipState,
    pub failure: Option<String>,
    pub min_h: Option<f64>,
    /// Mean distance between robot and recorded pedestrian over shared steps.
    pub ade_vs_truth: f64,
    pub path_length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutLog {
    pub header: RolloutHeader,
    pub steps: Vec<StepRecord>,
    pub summary: RolloutSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(RolloutHeader),
    Step(StepRecord),
    Summary(RolloutSummary),
}

impl RolloutLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        let io = |e: std::io::Error| HarnessError::Data(e.to_string());
        let mut put = |line: &Line| -> Result<(), HarnessError> {
            serde_json::to_writer(&mut w, line).map_err(|e| HarnessError::Data(e.to_string()))?;
            w.write_all(b"\n").map_err(io)
        };
        put(&Line::Header(self.header.clone()))?;
        for s in &self.steps {
            put(&Line::Step(s.clone()))?;
        }
        put(&Line::Summary(self.summary.clone()))
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, HarnessError> {
        let (mut header, mut steps, mut summary) = (None, Vec::new(), None);
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| HarnessError::Data(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|e| HarnessError::Data(format!("rollout line {}: {e}", i + 1)))?;
            match parsed {
                Line::Header(h) => {
                    if h.format != ROLLOUT_FORMAT || h.version != ROLLOUT_VERSION {
                        return Err(HarnessError::Data(format!(
                            "unsupported rollout format {} v{}",
                            h.format, h.version
                        )));
                    }
                    header = Some(h)
                }
                Line::Step(s) => steps.push(s),
                Line::Summary(s) => summary = Some(s),
            }
        }
        match (header, summary) {
            (Some(header), Some(summary)) => Ok(Self { header, steps, summary }),
            _ => Err(HarnessError::Data("rollout log lacks a header or summary line".into())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let f = std::fs::File::create(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let f = std::fs::File::open(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    /// Re-applies every logged control and checks the logged states bitwise.
    pub fn is_replayable(&self, p: &LipParams) -> bool {
        let mut s = self.header.start;
        for r in &self.steps {
            if r.state != s || step_dynamics(p, &r.state, &r.control) != r.next {
                return false;
            }
            s = r.next;
        }
        s == self.summary.final_state
    }
}

/// Pedestrians eligible for substitution: tracks of at least ten steps that
/// travel at least 2 m, sorted by id.
pub fn eligible_egos(scene: &Scene) -> Vec<i64> {
    scene
        .pedestrian_ids()
        .into_iter()
        .filter(|id| {
            let t = scene.track_of(*id).expect("id from scene");
            t.points.len() >= 10 && distance(t.points[0], *t.points.last().unwrap()) >= 2.0
        })
        .collect()
}

/// `count` eligible pedestrians spread evenly over the id range.
pub fn select_egos(scene: &Scene, count: usize) -> Vec<i64> {
    let ids = eligible_egos(scene);
    if ids.len() <= count {
        return ids;
    }
    (0..count).map(|i| ids[i * ids.len() / count]).collect()
}

fn initial_heading(track: &[Point], goal: Point) -> f64 {
    for w in track.windows(2) {
        let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
        if dx.hypot(dy) >= EPS_DISP {
            return dy.atan2(dx);
        }
    }
    let (dx, dy) = (goal[0] - track[0][0], goal[1] - track[0][1]);
    if dx.hypot(dy) >= EPS_DISP {
        dy.atan2(dx)
    } else {
        0.0
    }
}

fn clip_goal(g: Point, reach: f64) -> Point {
    let n = g[0].hypot(g[1]);
    if n > reach {
        [g[0] * reach / n, g[1] * reach / n]
    } else {
        g
    }
}

fn nearest(peds: &[(i64, Point)], pos: Point) -> Option<Point> {
    peds.iter()
        .map(|(_, p)| *p)
        .min_by(|a, b| distance(*a, pos).total_cmp(&distance(*b, pos)))
}

fn step_signals(s: &LipState, n: &LipState, dt: f64) -> StepSignals {
    let (dx, dy) = (n.x - s.x, n.y - s.y);
    let (sn, cs) = s.theta.sin_cos();
    StepSignals {
        v_sag: (dx * cs + dy * sn) / dt,
        v_lat: (-dx * sn + dy * cs) / dt,
        dtheta: wrap_angle(n.theta - s.theta),
    }
}

/// Substitutes pedestrian `ego_id` with the walking model and replays the
/// rest of the crowd open-loop around it.
pub fn replay_simulate(scene: &Scene, model: &PlannerModel, cfg: &RunConfig, ego_id: i64) -> Result<RolloutLog, HarnessError> {
    let track = scene.track_of(ego_id).ok_or_else(|| HarnessError::UnknownPedestrian {
        scene: scene.name.clone(),
        id: ego_id,
    })?;
    if track.points.len() < 2 {
        return Err(HarnessError::Data(format!(
            "pedestrian {ego_id} in {} has a single recorded position",
            scene.name
        )));
    }
    let lip = &cfg.mpc.lip;
    let mpc = &cfg.mpc.solver;
    let pc = &model.config;
    let dt = lip.step_time;
    let mode = cfg.predict_mode()?;
    let extract = cfg.extract_config();
    let goal = *track.points.last().unwrap();
    let goal_clip = pc.n_pred as f64 * pc.dt * pc.safety.v_max;
    let p0 = track.points[0];
    let start = LipState::new(p0[0], p0[1], initial_heading(&track.points, goal), 0.0);

    let mut state = start;
    let mut steps = Vec::new();
    let mut warm: Option<Vec<ControlInput>> = None;
    let mut status = None;
    let mut failure = None;
    for k in 0..cfg.run.max_steps {
        if distance(state.pos(), goal) <= cfg.run.goal_radius {
            status = Some(Status::ReachedGoal);
            break;
        }
        let t = track.start + (k as f64 * dt / scene.dt).round() as usize;
        let pos = state.pos();
        let input = PlanInput {
            neighbors: neighbors_at(scene, t, pos, Some(ego_id), &extract),
            goal: clip_goal([goal[0] - pos[0], goal[1] - pos[1]], goal_clip),
            theta0: state.theta,
        };
        let plan = model.predict(&input, mode)?;
        let rob = safety_robustness(&plan.prefixed([0.0, 0.0]), state.theta, &pc.safety, Semantics::Hard)?;
        let world = to_world_frame(&plan.points, pos);
        let mut path = vec![pos];
        path.extend_from_slice(&world);
        let refs = references_from_path(&path, state.theta, dt)?;
        let ped = nearest(&scene.positions_at(t, Some(ego_id)), pos);
        let h = ped.map(|p| cbf_h(&state, p));

        let (controls, solver) = if cfg.run.force_zero_controls {
            (vec![ControlInput::default(); mpc.horizon], None)
        } else {
            let pb = MpcProblem {
                params: lip,
                config: mpc,
                start: state,
                references: &refs,
                goal: path[mpc.horizon.min(path.len() - 1)],
                pedestrian: ped,
            };
            match solve_with(&pb, warm.as_deref()) {
                Ok(sol) => {
                    let info = SolverInfo {
                        objective: sol.objective,
                        iterations: sol.iterations,
                        converged: sol.converged,
                        max_violation: sol.max_violation,
                    };
                    (sol.controls, Some(info))
                }
                Err(e @ (MpcError::InfeasibleStart { .. } | MpcError::SolverFailure { .. })) => {
                    log::info!("{} ego {ego_id} step {k}: {e}", scene.name);
                    status = Some(Status::SolverFailure);
                    failure = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        };
        let u = controls[0];
        let next = step_dynamics(lip, &state, &u);
        steps.push(StepRecord {
            step: k,
            time: k as f64 * dt,
            state,
            control: u,
            next,
            plan: world,
            plan_robustness: [rob.vel, rob.dtheta],
            pedestrian: ped,
            h,
            h_next: ped.map(|p| cbf_h(&next, p)),
            signals: step_signals(&state, &next, dt),
            solver,
        });
        let mut w = controls[1..].to_vec();
        w.push(*controls.last().unwrap());
        warm = Some(w);
        state = next;
    }
    let status = status.unwrap_or(if distance(state.pos(), goal) <= cfg.run.goal_radius {
        Status::ReachedGoal
    } else {
        Status::HorizonExhausted
    });

    let mut visited = vec![start.pos()];
    visited.extend(steps.iter().map(|s| s.next.pos()));
    let shared = visited.len().min(track.points.len());
    let ade_vs_truth = (0..shared).map(|i| distance(visited[i], track.points[i])).sum::<f64>() / shared as f64;
    let path_length = visited.windows(2).map(|w| distance(w[0], w[1])).sum();
    let min_h = steps.iter().filter_map(|s| s.h).reduce(f64::min);
    Ok(RolloutLog {
        header: RolloutHeader {
            format: ROLLOUT_FORMAT.into(),
            version: ROLLOUT_VERSION,
            scene: scene.name.clone(),
            ego_id,
            variant: pc.variant().into(),
            start,
            goal,
            goal_clip,
            ground_truth: track.points.clone(),
        },
        summary: RolloutSummary {
            status,
            steps: steps.len(),
            final_state: state,
            failure,
            min_h,
            ade_vs_truth,
            path_length,
        },
        steps,
    })
}
