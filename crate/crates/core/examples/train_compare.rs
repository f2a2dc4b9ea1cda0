//! Trains a planner with and without the safety losses on a leave-one-out
//! split of the synthetic corpus and compares holdout metrics.
//!
//! Writes CSV tables and violin plots to `target/train_compare`.
//!
//! cargo run --release --example train_compare -- [holdout] [n_train] [epochs] [sgd|adam] [lr]

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socialnav::crowdsets::{leave_one_out, synth, ExtractConfig};
use socialnav::harness::metrics_report;
use socialnav::planner::{evaluate, train, OptimizerKind, PlannerConfig, PlannerModel};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let holdout = args.get(1).cloned().unwrap_or_else(|| "ZARA1".into());
    let n_train: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);
    let optimizer = match args.get(4).map(String::as_str) {
        Some("adam") => OptimizerKind::Adam,
        _ => OptimizerKind::Sgd,
    };
    let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let split = leave_one_out(&synth::corpus(0), &holdout, &ExtractConfig::default()).expect("split");
    let mut train_set = split.train;
    train_set.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    train_set.truncate(n_train);
    println!("train {} holdout {} ({})", train_set.len(), split.test.len(), holdout);

    let mut reports = Vec::new();
    for alpha in [0.0, 1.0] {
        let mut cfg = PlannerConfig {
            epochs,
            optimizer,
            lr,
            ..PlannerConfig::default()
        };
        cfg.safety.alpha1 = alpha;
        cfg.safety.alpha2 = alpha;
        let mut model = PlannerModel::new(cfg).expect("model");
        let t0 = Instant::now();
        train(&mut model, &train_set, |e, l| {
            if e % 10 == 9 {
                println!(
                    "  epoch {:3} total {:.4} kl {:.4} end {:.4} avg {:.4} stl_dth {:.4} stl_vel {:.4}",
                    e + 1,
                    l.total,
                    l.kl,
                    l.endpoint,
                    l.avg_traj,
                    l.stl_dtheta,
                    l.stl_vel
                )
            }
        })
        .expect("train");
        let r = evaluate(&model, &split.test, &model.config.safety.clone()).expect("eval");
        println!(
            "{:7} {:5.1}s ade {:.4} fde {:.4} heading {:.5} ({:.1}%) velocity {:.5} ({:.1}%)",
            r.variant,
            t0.elapsed().as_secs_f64(),
            r.ade.mean,
            r.fde.mean,
            r.heading_violation.mean,
            100.0 * r.heading_violation.positive_rate,
            r.velocity_violation.mean,
            100.0 * r.velocity_violation.positive_rate
        );
        for (lo, hi) in [(0.0, 0.5), (0.5, 3.2), (3.2, f64::INFINITY)] {
            let band: Vec<_> = split
                .test
                .iter()
                .zip(&r.per_sample)
                .filter(|(s, _)| (lo..hi).contains(&s.goal[0].hypot(s.goal[1])))
                .map(|(_, m)| m)
                .collect();
            let n = band.len().max(1) as f64;
            println!(
                "  goal {lo:.1}..{hi:.1} m: {:5} samples fde {:.4} heading {:.4} velocity {:.4}",
                band.len(),
                band.iter().map(|m| m.fde).sum::<f64>() / n,
                band.iter().map(|m| m.heading_violation).sum::<f64>() / n,
                band.iter().map(|m| m.velocity_violation).sum::<f64>() / n
            );
        }
        reports.push(r);
    }
    let files = metrics_report(&reports, "target/train_compare".as_ref()).expect("report");
    println!("wrote {} tables and {} plots", files.tables.len(), files.plots.len());
}
