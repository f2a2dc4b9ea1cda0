//! Trains a planner with the safety losses, substitutes ten ZARA1
//! pedestrians with the walking model and writes rollout logs and a report.
//!
//! cargo run --release --example crowd_replay -- [out_dir] [n_train] [epochs]

use std::time::Instant;

use socialnav::harness::{replay_simulate, rollout_report, select_egos, RunConfig};
use socialnav::planner::{train, PlannerModel};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let out = std::path::PathBuf::from(args.get(1).cloned().unwrap_or_else(|| "target/replay".into()));
    let overrides = vec![
        format!("dataset.max_train={}", args.get(2).map(String::as_str).unwrap_or("3000")),
        format!("model.epochs={}", args.get(3).map(String::as_str).unwrap_or("50")),
    ];
    let cfg = RunConfig::load(None, &overrides).expect("config");
    let scenes = cfg.scenes().expect("scenes");
    let split = cfg.split(&scenes).expect("split");
    let mut model = PlannerModel::new(cfg.planner_config()).expect("model");
    train(&mut model, &split.train, |_, _| {}).expect("train");

    let scene = cfg.scene(&scenes).expect("scene");
    std::fs::create_dir_all(&out).expect("out dir");
    let mut logs = Vec::new();
    for ego in select_egos(&scene, cfg.run.rollouts) {
        let t0 = Instant::now();
        let log = replay_simulate(&scene, &model, &cfg, ego).expect("rollout");
        println!(
            "ego {ego:4} {:18} steps {:3} min h {:>8} ade vs recorded {:.3} m ({:.1}s)",
            log.summary.status.as_str(),
            log.summary.steps,
            log.summary.min_h.map_or("-".into(), |h| format!("{h:.3}")),
            log.summary.ade_vs_truth,
            t0.elapsed().as_secs_f64()
        );
        if let Some(f) = &log.summary.failure {
            println!("    {f}");
        }
        log.save(&out.join(format!("{}_{ego}.jsonl", scene.name))).expect("save");
        logs.push(log);
    }
    let files = rollout_report(&logs, &out).expect("report");
    println!("summary: {}", files.summary.display());
}
