//! Trains a small planner on one synthetic scene, saves and reloads the
//! checkpoint and compares the three prediction modes on a few samples.
//!
//! cargo run --release --example predict_checkpoint -- [epochs] [out.json]

use socialnav::crowdsets::{extract_samples, synth, ExtractConfig};
use socialnav::planner::{load_model, save_model, train, PlanInput, PlannerConfig, PlannerModel, PredictMode};
use socialnav::stl::{safety_robustness, Semantics};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let out = args.get(2).cloned().unwrap_or_else(|| "target/predict_checkpoint.json".into());
    let scene = synth::corpus(0).into_iter().find(|s| s.name == "HOTEL").expect("scene");
    let samples = extract_samples(&scene, &ExtractConfig::default()).samples;
    let cfg = PlannerConfig { epochs, ..PlannerConfig::default() };
    let mut model = PlannerModel::new(cfg).expect("model");
    train(&mut model, &samples, |e, l| println!("epoch {} loss {:.4}", e + 1, l.total)).expect("train");
    save_model(&model, out.as_ref()).expect("save");
    let loaded = load_model(out.as_ref()).expect("load");
    println!("saved {out}, {} parameters, reload identical: {}", loaded.param_count(), loaded == model);

    let modes = [
        PredictMode::Mean,
        PredictMode::Sample { k: 1, seed: 3 },
        PredictMode::BestOf { k: 16, seed: 3 },
    ];
    for s in samples.iter().step_by(samples.len() / 5 + 1) {
        let input = PlanInput::from(s);
        print!("{:24}", s.id());
        for mode in modes {
            let pred = loaded.predict(&input, mode).expect("predict");
            let r = safety_robustness(&pred.prefixed([0.0, 0.0]), s.theta0, &loaded.config.safety, Semantics::Hard)
                .expect("robustness");
            let end = pred.points.last().expect("points");
            let fde = (end[0] - s.ego_future.last().expect("future")[0])
                .hypot(end[1] - s.ego_future.last().expect("future")[1]);
            print!("  {:?}: rho {:+.3} fde {:.3}", mode, r.min(), fde);
        }
        println!();
    }
}
