use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use socialnav::crowdsets::{read_archive, to_world_frame, write_archive, SocialSample};
use socialnav::harness::{
    metrics_report, read_metrics, replay_simulate, rollout_report, select_egos, write_metrics, HarnessError,
    RolloutLog, RunConfig, METRICS_FORMAT, ROLLOUT_FORMAT,
};
use socialnav::lip_mpc::{references_from_path, solve, LipState, MpcProblem};
use socialnav::planner::{evaluate, load_model, save_model, train, PlanInput, PlannerModel};
use socialnav::trajectory::distance;

#[derive(Parser)]
#[command(name = "socialnav", version, about = "Social path planning for bipedal robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set model.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse scenes into train/test sample archives.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Also write the scenes as text recordings here.
        #[arg(long)]
        scenes_out: Option<PathBuf>,
    },
    /// Train a planner and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training archive instead of the configured dataset.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Checkpoint path (default: <out_dir>/model.json).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the holdout scene.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Test archive instead of the configured holdout.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Plan one holdout sample and solve the step planner once.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Sample id `scene/ego/t`; the first holdout sample when absent.
        #[arg(long)]
        sample: Option<String>,
    },
    /// Replay a scene with the walking robot in place of pedestrians.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Tables and plots from metrics files or rollout logs.
    Report {
        /// Metrics (`eval`) or rollout (`simulate`) files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value = "report")]
        out: PathBuf,
    },
}

fn data_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Data(e.to_string())
}

fn load_config(c: &Common, checkpoint: Option<&PathBuf>) -> Result<RunConfig, HarnessError> {
    let mut overrides = c.set.clone();
    if let Some(p) = checkpoint {
        overrides.push(format!("model.checkpoint={}", toml::Value::String(p.display().to_string())));
    }
    RunConfig::load(c.config.as_deref(), &overrides)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(&cfg.run.out_dir).map_err(data_err)?;
    Ok(cfg.run.out_dir.clone())
}

fn read_samples(path: &Path) -> Result<Vec<SocialSample>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    Ok(read_archive(&text)?)
}

fn model_for(cfg: &RunConfig) -> Result<PlannerModel, HarnessError> {
    match &cfg.model.checkpoint {
        Some(p) => Ok(load_model(p)?),
        None => {
            log::warn!("no checkpoint given; using a freshly initialized model");
            Ok(PlannerModel::new(cfg.planner_config())?)
        }
    }
}

fn print_json(v: &serde_json::Value) -> Result<(), HarnessError> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(v).map_err(data_err)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(data_err),
    }
}

fn ingest(c: &Common, scenes_out: Option<&Path>) -> Result<(), HarnessError> {
    let cfg = load_config(c, None)?;
    let scenes = cfg.scenes()?;
    if let Some(dir) = scenes_out {
        std::fs::create_dir_all(dir).map_err(data_err)?;
        for s in &scenes {
            socialnav::crowdsets::synth::write_scene(dir, s)?;
        }
    }
    let split = cfg.split(&scenes)?;
    let out = out_dir(&cfg)?;
    for (name, set) in [("train.samples", &split.train), ("test.samples", &split.test)] {
        std::fs::write(out.join(name), write_archive(set)?).map_err(data_err)?;
    }
    print_json(&serde_json::json!({
        "holdout": split.spec.holdout,
        "train_scenes": split.spec.train,
        "train": split.train.len(),
        "test": split.test.len(),
        "out_dir": out,
    }))
}

fn train_cmd(c: &Common, samples: Option<&Path>, output: Option<&Path>) -> Result<(), HarnessError> {
    let cfg = load_config(c, None)?;
    let train_set = match samples {
        Some(p) => read_samples(p)?,
        None => cfg.split(&cfg.scenes()?)?.train,
    };
    let out = out_dir(&cfg)?;
    let mut model = match &cfg.model.checkpoint {
        Some(p) => {
            let mut m = load_model(p)?;
            m.config.epochs = cfg.model.planner.epochs;
            m
        }
        None => PlannerModel::new(cfg.planner_config())?,
    };
    log::info!("training {} on {} samples", model.config.variant(), train_set.len());
    let report = train(&mut model, &train_set, |e, l| {
        eprintln!("epoch {:4} total {:.6} kl {:.6} endpoint {:.6} avg_traj {:.6} stl_dtheta {:.6} stl_vel {:.6}",
            e + 1, l.total, l.kl, l.endpoint, l.avg_traj, l.stl_dtheta, l.stl_vel);
    })?;
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| out.join("model.json"));
    save_model(&model, &path)?;
    let trace = out.join("train_trace.jsonl");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&trace).map_err(data_err)?);
    for (i, e) in report.epochs.iter().enumerate() {
        serde_json::to_writer(&mut w, &serde_json::json!({ "epoch": i + 1, "loss": e })).map_err(data_err)?;
        w.write_all(b"\n").map_err(data_err)?;
    }
    serde_json::to_writer(&mut w, &serde_json::json!({ "step_totals": report.step_totals })).map_err(data_err)?;
    w.write_all(b"\n").map_err(data_err)?;
    print_json(&serde_json::json!({
        "variant": model.config.variant(),
        "checkpoint": path,
        "trace": trace,
        "final_loss": model.meta.final_loss,
    }))
}

fn eval_cmd(c: &Common, checkpoint: Option<&PathBuf>, samples: Option<&Path>) -> Result<(), HarnessError> {
    let cfg = load_config(c, checkpoint)?;
    let model = model_for(&cfg)?;
    let test = match samples {
        Some(p) => read_samples(p)?,
        None => cfg.split(&cfg.scenes()?)?.test,
    };
    let report = evaluate(&model, &test, &cfg.safety)?;
    let out = out_dir(&cfg)?;
    let path = out.join(format!("metrics_{}.jsonl", report.variant.to_lowercase().replace('-', "_")));
    write_metrics(&report, std::io::BufWriter::new(std::fs::File::create(&path).map_err(data_err)?))?;
    print_json(&serde_json::json!({
        "variant": report.variant,
        "samples": report.per_sample.len(),
        "ade": report.ade,
        "fde": report.fde,
        "heading_violation": report.heading_violation,
        "velocity_violation": report.velocity_violation,
        "metrics": path,
    }))
}

fn plan_cmd(c: &Common, checkpoint: Option<&PathBuf>, sample: Option<&str>) -> Result<(), HarnessError> {
    let cfg = load_config(c, checkpoint)?;
    let model = model_for(&cfg)?;
    let test = cfg.split(&cfg.scenes()?)?.test;
    let s = match sample {
        Some(id) => test
            .iter()
            .find(|s| s.id() == id)
            .ok_or_else(|| HarnessError::Data(format!("no holdout sample '{id}'")))?,
        None => test.first().ok_or_else(|| HarnessError::Data("empty holdout".into()))?,
    };
    let plan = model.predict(&PlanInput::from(s), cfg.predict_mode()?)?;
    let world = to_world_frame(&plan.points, s.anchor_world);
    let mut path = vec![s.anchor_world];
    path.extend_from_slice(&world);
    let dt = cfg.mpc.lip.step_time;
    let refs = references_from_path(&path, s.theta0, dt)?;
    let ped = s
        .neighbors
        .iter()
        .filter_map(|h| h.last())
        .map(|p| [p[0] + s.anchor_world[0], p[1] + s.anchor_world[1]])
        .min_by(|a, b| distance(*a, s.anchor_world).total_cmp(&distance(*b, s.anchor_world)));
    let start = LipState::new(s.anchor_world[0], s.anchor_world[1], s.theta0, 0.0);
    let n = cfg.mpc.solver.horizon.min(path.len() - 1);
    let sol = solve(&MpcProblem {
        params: &cfg.mpc.lip,
        config: &cfg.mpc.solver,
        start,
        references: &refs,
        goal: path[n],
        pedestrian: ped,
    })?;
    print_json(&serde_json::json!({
        "sample": s.id(),
        "variant": model.config.variant(),
        "plan_ego": plan.points,
        "plan_world": world,
        "pedestrian": ped,
        "mpc": {
            "controls": sol.controls,
            "states": sol.states,
            "objective": sol.objective,
            "iterations": sol.iterations,
            "converged": sol.converged,
            "max_violation": sol.max_violation,
        },
    }))
}

fn simulate_cmd(c: &Common, checkpoint: Option<&PathBuf>) -> Result<(), HarnessError> {
    let cfg = load_config(c, checkpoint)?;
    let model = model_for(&cfg)?;
    let scenes = cfg.scenes()?;
    let scene = cfg.scene(&scenes)?;
    let egos = if cfg.run.ego_ids.is_empty() {
        select_egos(&scene, cfg.run.rollouts)
    } else {
        cfg.run.ego_ids.clone()
    };
    let dir = out_dir(&cfg)?.join("rollouts");
    std::fs::create_dir_all(&dir).map_err(data_err)?;
    let mut rows = Vec::new();
    for ego in egos {
        let log = replay_simulate(&scene, &model, &cfg, ego)?;
        let path = dir.join(format!("{}_{ego}.jsonl", scene.name));
        log.save(&path)?;
        eprintln!("{} ego {ego}: {} after {} steps", scene.name, log.summary.status.as_str(), log.summary.steps);
        rows.push(serde_json::json!({
            "ego_id": ego,
            "status": log.summary.status,
            "steps": log.summary.steps,
            "min_h": log.summary.min_h,
            "ade_vs_truth": log.summary.ade_vs_truth,
            "log": path,
        }));
    }
    print_json(&serde_json::json!({ "scene": scene.name, "variant": model.config.variant(), "rollouts": rows }))
}

fn report_cmd(inputs: &[PathBuf], out: &Path) -> Result<(), HarnessError> {
    let mut metrics = Vec::new();
    let mut logs = Vec::new();
    for p in inputs {
        let f = std::fs::File::open(p).map_err(|e| HarnessError::Data(format!("{}: {e}", p.display())))?;
        let mut first = String::new();
        BufReader::new(f).read_line(&mut first).map_err(data_err)?;
        let text = std::fs::read(p).map_err(data_err)?;
        if first.contains(METRICS_FORMAT) {
            metrics.push(read_metrics(text.as_slice())?);
        } else if first.contains(ROLLOUT_FORMAT) {
            logs.push(RolloutLog::read_jsonl(text.as_slice())?);
        } else {
            return Err(HarnessError::Data(format!("{}: not a metrics file or rollout log", p.display())));
        }
    }
    let mut written = serde_json::Map::new();
    if !metrics.is_empty() {
        let f = metrics_report(&metrics, out)?;
        written.insert("metrics".into(), serde_json::json!({ "tables": f.tables, "plots": f.plots, "summary": f.summary }));
    }
    if !logs.is_empty() {
        let f = rollout_report(&logs, out)?;
        written.insert("rollouts".into(), serde_json::json!({ "tables": f.tables, "plots": f.plots, "summary": f.summary }));
    }
    print_json(&written.into())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Ingest { common, scenes_out } => ingest(&common, scenes_out.as_deref()),
        Command::Train { common, samples, output } => train_cmd(&common, samples.as_deref(), output.as_deref()),
        Command::Eval { common, checkpoint, samples } => eval_cmd(&common, checkpoint.as_ref(), samples.as_deref()),
        Command::Plan { common, checkpoint, sample } => plan_cmd(&common, checkpoint.as_ref(), sample.as_deref()),
        Command::Simulate { common, checkpoint } => simulate_cmd(&common, checkpoint.as_ref()),
        Command::Report { inputs, out } => report_cmd(&inputs, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
