mod common;

use common::{random_formula, random_signals, stl_oracle_corpus, to_signal_map};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socialnav::diffmath::{Graph, Tensor};
use socialnav::stl::{robustness, safety_robustness, stl_loss, Formula, SafetyParams, Semantics};
use socialnav::trajectory::Trajectory;

#[test]
fn hard_robustness_matches_brute_force() {
    let rep = stl_oracle_corpus(1, 1000);
    assert!(rep.max_abs_diff <= 1e-9, "max diff {}", rep.max_abs_diff);
    assert_eq!(rep.unsound, 0, "of {}", rep.sound_checked);
    assert!(rep.sound_checked > 900);
}

#[test]
fn right_angle_turn_violates_both_bounds() {
    let t = Trajectory::new(vec![[0.0, 0.0], [0.4, 0.0], [0.4, 0.4]], 0.4);
    let r = safety_robustness(&t, 0.0, &SafetyParams::default(), Semantics::Hard).unwrap();
    assert!((r.dtheta - (0.3 - std::f64::consts::FRAC_PI_2)).abs() < 1e-12);
    // second step is lateral at 1 m/s against a 0.5 m/s bound
    assert!((r.vel + 0.5).abs() < 1e-12);
}

fn traj_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..9).prop_map(|steps| {
        let mut p = [0.0, 0.0];
        let mut v = vec![p];
        for (dx, dy) in steps {
            p = [p[0] + 0.5 * dx, p[1] + 0.5 * dy];
            v.push(p);
        }
        v
    })
}

fn rotate(p: [f64; 2], a: f64) -> [f64; 2] {
    [a.cos() * p[0] - a.sin() * p[1], a.sin() * p[0] + a.cos() * p[1]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn smooth_robustness_is_close_below_for_always(v in prop::collection::vec(-3.0..3.0f64, 2..12), tau in 0.01..0.5f64) {
        let n = v.len();
        let phi = Formula::always(0, n - 1, Formula::le("a", 0.0)).unwrap();
        let mut sig = std::collections::BTreeMap::new();
        sig.insert("a".to_string(), v);
        let s = to_signal_map(&sig);
        let hard = robustness(&phi, &s, 0, Semantics::Hard).unwrap();
        let smooth = robustness(&phi, &s, 0, Semantics::Smooth(tau)).unwrap();
        prop_assert!(smooth <= hard + 1e-12);
        prop_assert!(smooth >= hard - tau * (n as f64).ln() - 1e-12);
    }

    #[test]
    fn smooth_stays_within_depth_bound(seed in 0u64..10_000, tau in 0.001..0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = rng.random_range(1..=12);
        let depth = rng.random_range(0..=4);
        let phi = random_formula(&mut rng, depth, len - 1);
        let sig = to_signal_map(&random_signals(&mut rng, len));
        let hard = robustness(&phi, &sig, 0, Semantics::Hard).unwrap();
        let smooth = robustness(&phi, &sig, 0, Semantics::Smooth(tau)).unwrap();
        let w = len.max(2) as f64;
        prop_assert!((hard - smooth).abs() <= tau * w.ln() * phi.depth() as f64 + 1e-12, "{} {} {}", phi, hard, smooth);
    }

    #[test]
    fn parse_print_round_trip(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_formula(&mut rng, 4, 11);
        let back: Formula = phi.to_string().parse().unwrap();
        prop_assert_eq!(back, phi);
    }

    #[test]
    fn safety_robustness_is_rigid_motion_invariant(pts in traj_strategy(), th in -3.0..3.0f64,
                                                    a in -3.1..3.1f64, dx in -20.0..20.0f64, dy in -20.0..20.0f64) {
        let p = SafetyParams::default();
        let t = Trajectory::new(pts.clone(), 0.4);
        let moved = Trajectory::new(pts.iter().map(|q| { let r = rotate(*q, a); [r[0] + dx, r[1] + dy] }).collect(), 0.4);
        for sem in [Semantics::Hard, Semantics::Smooth(0.1)] {
            let r0 = safety_robustness(&t, th, &p, sem).unwrap();
            let r1 = safety_robustness(&moved, th + a, &p, sem).unwrap();
            prop_assert!((r0.vel - r1.vel).abs() < 1e-9, "{:?} {:?}", r0, r1);
            prop_assert!((r0.dtheta - r1.dtheta).abs() < 1e-9, "{:?} {:?}", r0, r1);
        }
    }

    #[test]
    fn loss_is_nonnegative_and_zero_when_robustly_safe(pts in traj_strategy(), th in -3.0..3.0f64) {
        let p = SafetyParams::default();
        let n = pts.len() - 1;
        let flat: Vec<f64> = pts.iter().flatten().copied().collect();
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![1, 2 * (n + 1)], flat).unwrap());
        let l = stl_loss(&mut g, x, &[th], &p, 0.4, Semantics::Smooth(0.1)).unwrap();
        prop_assert!(g.item(l) >= 0.0);

        let slow: Vec<f64> = (0..=n).flat_map(|k| [0.1 * k as f64 * th.cos(), 0.1 * k as f64 * th.sin()]).collect();
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![1, 2 * (n + 1)], slow).unwrap());
        let l = stl_loss(&mut g, x, &[th], &p, 0.4, Semantics::Hard).unwrap();
        prop_assert_eq!(g.item(l), 0.0);
    }
}
