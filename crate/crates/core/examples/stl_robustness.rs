//! Parses a formula in prefix notation and evaluates hard and smooth
//! robustness, then scores a sharp turn against the locomotion-safety
//! formulas.
//!
//! cargo run --example stl_robustness -- "(always 0 3 (<= a 1.0))" [tau]

use socialnav::stl::{
    build_safety_formulas, robustness, safety_robustness, Formula, SafetyParams, Semantics, Signal, SignalMap,
};
use socialnav::trajectory::{Trajectory, DEFAULT_DT};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let text = args
        .get(1)
        .cloned()
        .unwrap_or_else(|| "(and (always 0 3 (<= a 1.0)) (eventually 0 3 (>= a 0.8)))".into());
    let tau: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let phi: Formula = text.parse().expect("formula");
    let mut signals = SignalMap::new();
    for ch in phi.channels() {
        let s = Signal::new(ch, vec![0.2, 0.9, 0.7, 1.1, 0.4, 0.3], DEFAULT_DT).expect("signal");
        signals.insert(ch.to_string(), s);
    }
    println!("{phi}  depth {} horizon {}", phi.depth(), phi.horizon());
    println!("hard   {:+.5}", robustness(&phi, &signals, 0, Semantics::Hard).expect("hard"));
    println!("smooth {:+.5}", robustness(&phi, &signals, 0, Semantics::Smooth(tau)).expect("smooth"));

    let p = SafetyParams::default();
    let (vel, dth) = build_safety_formulas(&p, 3).expect("formulas");
    println!("velocity formula {vel}");
    println!("heading formula  {dth}");
    let turn = Trajectory::new(vec![[0.0, 0.0], [0.3, 0.0], [0.5, 0.2], [0.5, 0.5]], DEFAULT_DT);
    let r = safety_robustness(&turn, 0.0, &p, Semantics::Hard).expect("robustness");
    println!(
        "sharp turn: vel {:+.4} dtheta {:+.4} (violations {:.4} {:.4})",
        r.vel,
        r.dtheta,
        r.velocity_violation(),
        r.heading_violation()
    );
}
