//! Generates the five synthetic crowd scenes, writes them in the text layout
//! and prints per-scene sample counts and ground-truth safety statistics.
//!
//! cargo run --release --example synth_corpus -- [out_dir] [seed]

use socialnav::crowdsets::{extract_samples, synth, ExtractConfig};
use socialnav::stl::{safety_robustness, SafetyParams, Semantics};
use socialnav::trajectory::{Trajectory, DEFAULT_DT};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let out = args.get(1).cloned().unwrap_or_else(|| "target/synth".into());
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let p = SafetyParams::default();
    for scene in synth::corpus(seed) {
        synth::write_scene(out.as_ref(), &scene).expect("write scene");
        let samples = extract_samples(&scene, &ExtractConfig::default()).samples;
        let (mut vel, mut head, mut nb) = (0usize, 0usize, 0usize);
        for s in &samples {
            let t = Trajectory::new(s.ego_future.clone(), DEFAULT_DT).prefixed([0.0, 0.0]);
            let r = safety_robustness(&t, s.theta0, &p, Semantics::Hard).expect("robustness");
            vel += (r.vel < 0.0) as usize;
            head += (r.dtheta < 0.0) as usize;
            nb += s.neighbors.len();
        }
        let n = samples.len().max(1) as f64;
        println!(
            "{:6} tracks {:4} samples {:5} mean neighbors {:5.2} gt velocity-violating {:4.1}% heading-violating {:4.1}%",
            scene.name,
            scene.tracks.len(),
            samples.len(),
            nb as f64 / n,
            100.0 * vel as f64 / n,
            100.0 * head as f64 / n
        );
    }
    println!("wrote scenes to {out}");
}
