mod common;

use common::{grid_oracle_two_step, random_mpc_instance, rk4_lip};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socialnav::lip_mpc::{
    cbf_h, rollout, solve, step_dynamics, ControlInput, LipParams, LipState, MpcConfig, MpcProblem,
};

#[test]
fn closed_form_step_matches_rk4() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let p = LipParams { height: rng.random_range(0.6..1.2), ..LipParams::default() };
        let (xdot, uf) = (rng.random_range(-0.3..1.0), rng.random_range(-0.25..0.25));
        let s = step_dynamics(&p, &LipState::new(0.0, 0.0, 0.0, xdot), &ControlInput { u_f: uf, u_dtheta: 0.0 });
        let (x, v) = rk4_lip(p.height, p.step_time, xdot, uf, 1e-5);
        assert!((s.x - x).abs() < 1e-6 && (s.xdot - v).abs() < 1e-6);
    }
}

#[test]
fn two_step_solutions_match_grid_search() {
    let p = LipParams::default();
    let cfg = MpcConfig { horizon: 2, ..MpcConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..4 {
        let inst = random_mpc_instance(&mut rng, 2);
        let pb = MpcProblem {
            params: &p,
            config: &cfg,
            start: inst.start,
            references: &inst.refs,
            goal: inst.goal,
            pedestrian: inst.ped,
        };
        let sol = solve(&pb).unwrap();
        let grid = grid_oracle_two_step(p.height, &cfg, &inst.start, &inst.refs, inst.goal, inst.ped);
        assert!(sol.objective <= grid * 1.01 + 1e-9, "instance {i}: solver {} grid {grid}", sol.objective);
        assert!(sol.max_violation <= 1e-6);
    }
}

#[test]
fn far_pedestrian_goal_ahead() {
    let p = LipParams::default();
    let cfg = MpcConfig { horizon: 2, ..MpcConfig::default() };
    let start = LipState::new(0.0, 0.0, 0.0, 0.3);
    let refs = socialnav::lip_mpc::references_from_path(&[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]], 0.0, 0.4).unwrap();
    let pb = MpcProblem { params: &p, config: &cfg, start, references: &refs, goal: [1.0, 0.0], pedestrian: Some([100.0, 0.0]) };
    let sol = solve(&pb).unwrap();
    let grid = grid_oracle_two_step(p.height, &cfg, &start, &refs, [1.0, 0.0], Some([100.0, 0.0]));
    assert!(sol.objective <= grid * 1.01 + 1e-9, "{} vs {grid}", sol.objective);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn barrier_is_translation_invariant(x in -5.0..5.0f64, y in -5.0..5.0f64, px in -5.0..5.0f64, py in -5.0..5.0f64,
                                        dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
        let a = cbf_h(&LipState::new(x, y, 0.0, 0.0), [px, py]);
        let b = cbf_h(&LipState::new(x + dx, y + dy, 0.0, 0.0), [px + dx, py + dy]);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn solutions_are_feasible_replayable_and_monotone(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_mpc_instance(&mut rng, 4);
        let p = LipParams::default();
        let cfg = MpcConfig::default();
        let pb = MpcProblem { params: &p, config: &cfg, start: inst.start, references: &inst.refs, goal: inst.goal, pedestrian: inst.ped };
        let sol = solve(&pb).unwrap();
        prop_assert_eq!(&sol.states, &rollout(&p, &inst.start, &sol.controls));
        for u in &sol.controls {
            prop_assert!(u.u_f.abs() <= 0.25 + 1e-6 && u.u_dtheta.abs() <= 0.3 + 1e-6);
        }
        for s in &sol.states {
            prop_assert!(s.xdot >= -0.3 - 1e-6 && s.xdot <= 1.0 + 1e-6);
        }
        if let Some(ped) = inst.ped {
            let mut prev = cbf_h(&inst.start, ped);
            for s in &sol.states {
                let h = cbf_h(s, ped);
                prop_assert!(h - 0.7 * prev >= -1e-6);
                prev = h;
            }
        }
        for w in sol.trace.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective + 1e-12);
        }
    }
}
