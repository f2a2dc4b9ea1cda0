//! Steps the walking model toward a goal with the barrier-constrained
//! planner while a standing pedestrian blocks the straight line.
//!
//! cargo run --release --example walking_mpc -- [ped_x] [ped_y]

use socialnav::lip_mpc::{
    cbf_h, references_from_path, solve_with, step_dynamics, LipParams, LipState, MpcConfig, MpcProblem,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let px: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let py: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let ped = [px, py];
    let goal = [4.0, 0.0];
    let p = LipParams::default();
    let cfg = MpcConfig::default();
    let mut s = LipState::new(0.0, 0.0, 0.0, 0.0);
    let mut warm = None;
    println!("omega {:.4}", p.omega());
    for k in 0..40 {
        if (s.x - goal[0]).hypot(s.y - goal[1]) < 0.3 {
            println!("reached goal after {k} steps");
            return;
        }
        let n = cfg.horizon;
        let path: Vec<[f64; 2]> = (0..=n)
            .map(|q| {
                let f = (q as f64 * 0.4 / (goal[0] - s.x).hypot(goal[1] - s.y)).min(1.0);
                [s.x + f * (goal[0] - s.x), s.y + f * (goal[1] - s.y)]
            })
            .collect();
        let refs = references_from_path(&path, s.theta, p.step_time).expect("references");
        let pb = MpcProblem {
            params: &p,
            config: &cfg,
            start: s,
            references: &refs,
            goal: path[n],
            pedestrian: Some(ped),
        };
        let sol = match solve_with(&pb, warm.as_deref()) {
            Ok(sol) => sol,
            Err(e) => {
                println!("step {k}: {e}");
                return;
            }
        };
        let u = sol.controls[0];
        s = step_dynamics(&p, &s, &u);
        println!(
            "step {k:2} u_f {:+.3} u_dth {:+.3} -> ({:+.3}, {:+.3}) theta {:+.3} xdot {:.3} h {:.3} iters {}",
            u.u_f,
            u.u_dtheta,
            s.x,
            s.y,
            s.theta,
            s.xdot,
            cbf_h(&s, ped),
            sol.iterations
        );
        let mut next = sol.controls[1..].to_vec();
        next.push(*sol.controls.last().expect("controls"));
        warm = Some(next);
    }
    println!("goal not reached");
}
