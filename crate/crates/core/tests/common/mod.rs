//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socialnav::crowdsets::{extract_samples, synth, ExtractConfig, SocialSample};
use socialnav::diffmath::{finite_diff_check, max_relative_error, DiffError, Graph, NodeId, Reduce, Tensor};
use socialnav::lip_mpc::{LipState, MpcConfig, Reference};
use socialnav::planner::{PlanInput, PlannerConfig, PlannerModel, PredictMode};
use socialnav::stl::{robustness, Comparator, Formula, Semantics, Signal, SignalMap};

/// Plain-loop LIP rollout used by the grid oracle.
pub fn lip_rollout(height: f64, t: f64, s0: [f64; 4], controls: &[[f64; 2]]) -> Vec<[f64; 4]> {
    let w = (9.81 / height).sqrt();
    let mut s = s0;
    let mut out = Vec::new();
    for u in controls {
        let disp = (w * t).sinh() / w * s[3] + (1.0 - (w * t).cosh()) * u[0];
        s = [
            s[0] + disp * s[2].cos(),
            s[1] + disp * s[2].sin(),
            s[2] + u[1],
            (w * t).cosh() * s[3] - w * (w * t).sinh() * u[0],
        ];
        out.push(s);
    }
    out
}

fn ang(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    if r <= -std::f64::consts::PI {
        r += two_pi;
    }
    r
}

fn dev(s: &[f64; 4], t: [f64; 4], w: &[f64; 4]) -> f64 {
    let r = [s[0] - t[0], s[1] - t[1], ang(s[2] - t[2]), s[3] - t[3]];
    (0..4).map(|i| w[i] * r[i] * r[i]).sum()
}

fn h(s: &[f64; 4], ped: [f64; 2]) -> f64 {
    (((s[0] - ped[0]) / 0.2).powi(2) + ((s[1] - ped[1]) / 0.2).powi(2)).sqrt() - 1.0
}

/// Exhaustive search over a 0.01 m x 0.01 rad control grid for a 2-step
/// problem. Returns the best feasible objective.
pub fn grid_oracle_two_step(
    height: f64,
    cfg: &MpcConfig,
    s0: &LipState,
    refs: &[Reference],
    goal: [f64; 2],
    ped: Option<[f64; 2]>,
) -> f64 {
    assert_eq!(cfg.horizon, 2);
    let s0a = [s0.x, s0.y, s0.theta, s0.xdot];
    let r = |q: usize| refs[q.min(refs.len() - 1)];
    let target = |x: Reference| [x.pos[0], x.pos[1], x.theta, x.xdot];
    let tt = cfg.theta_terminal.unwrap_or_else(|| (goal[1] - s0.y).atan2(goal[0] - s0.x));
    let j0 = dev(&s0a, target(r(0)), &cfg.w_running);
    let axis = |b: [f64; 2]| -> Vec<f64> {
        let n = ((b[1] - b[0]) / 0.01).round() as usize;
        (0..=n).map(|i| b[0] + i as f64 * 0.01).collect()
    };
    let uf = axis(cfg.u_f_bounds);
    let ud = axis(cfg.u_dtheta_bounds);
    let ok_x = |x: f64| x >= cfg.xdot_bounds[0] && x <= cfg.xdot_bounds[1];
    let h0 = ped.map(|p| h(&s0a, p));
    let mut best = f64::INFINITY;
    for &a in &uf {
        for &b in &ud {
            let s1 = lip_rollout(height, 0.4, s0a, &[[a, b]])[0];
            if !ok_x(s1[3]) {
                continue;
            }
            let h1 = ped.map(|p| h(&s1, p));
            if let (Some(h0), Some(h1)) = (h0, h1) {
                if h1 < (1.0 - cfg.gamma) * h0 {
                    continue;
                }
            }
            let j1 = j0 + dev(&s1, target(r(1)), &cfg.w_running);
            if j1 >= best {
                continue;
            }
            for &c in &uf {
                for &d in &ud {
                    let s2 = lip_rollout(height, 0.4, s1, &[[c, d]])[0];
                    if !ok_x(s2[3]) {
                        continue;
                    }
                    if let (Some(h1), Some(p)) = (h1, ped) {
                        if h(&s2, p) < (1.0 - cfg.gamma) * h1 {
                            continue;
                        }
                    }
                    let j = j1 + dev(&s2, [goal[0], goal[1], tt, cfg.xdot_terminal], &cfg.w_terminal);
                    if j < best {
                        best = j;
                    }
                }
            }
        }
    }
    best
}

/// Fourth-order Runge-Kutta integration of xdd = w^2 (x - u_f) over one step.
/// Returns `(displacement, final velocity)`.
pub fn rk4_lip(height: f64, t: f64, xdot: f64, u_f: f64, dt: f64) -> (f64, f64) {
    let w2 = 9.81 / height;
    let f = |x: f64, v: f64| (v, w2 * (x - u_f));
    // foot at u_f relative to the CoM at the step start, CoM at the origin
    let (mut x, mut v) = (0.0, xdot);
    let n = (t / dt).round() as usize;
    for _ in 0..n {
        let (k1x, k1v) = f(x, v);
        let (k2x, k2v) = f(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v);
        let (k3x, k3v) = f(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v);
        let (k4x, k4v) = f(x + dt * k3x, v + dt * k3v);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    (x, v)
}

/// Direct recursive evaluation of hard robustness, written against the
/// textbook definition with explicit loops.
pub fn brute_robustness(phi: &Formula, sig: &BTreeMap<String, Vec<f64>>, t: usize) -> f64 {
    match phi {
        Formula::Pred { channel, cmp, threshold } => {
            let v = sig[channel][t];
            match cmp {
                Comparator::Le => threshold - v,
                Comparator::Ge => v - threshold,
            }
        }
        Formula::Not(c) => -brute_robustness(c, sig, t),
        Formula::And(l, r) => {
            let (a, b) = (brute_robustness(l, sig, t), brute_robustness(r, sig, t));
            if a < b { a } else { b }
        }
        Formula::Or(l, r) => {
            let (a, b) = (brute_robustness(l, sig, t), brute_robustness(r, sig, t));
            if a > b { a } else { b }
        }
        Formula::Always { a, b, child } => {
            let mut m = f64::INFINITY;
            for k in t + a..=t + b {
                let v = brute_robustness(child, sig, k);
                if v < m {
                    m = v;
                }
            }
            m
        }
        Formula::Eventually { a, b, child } => {
            let mut m = f64::NEG_INFINITY;
            for k in t + a..=t + b {
                let v = brute_robustness(child, sig, k);
                if v > m {
                    m = v;
                }
            }
            m
        }
    }
}

/// Boolean satisfaction, independent of the quantitative semantics.
pub fn satisfied(phi: &Formula, sig: &BTreeMap<String, Vec<f64>>, t: usize) -> bool {
    match phi {
        Formula::Pred { channel, cmp, threshold } => {
            let v = sig[channel][t];
            match cmp {
                Comparator::Le => v <= *threshold,
                Comparator::Ge => v >= *threshold,
            }
        }
        Formula::Not(c) => !satisfied(c, sig, t),
        Formula::And(l, r) => satisfied(l, sig, t) && satisfied(r, sig, t),
        Formula::Or(l, r) => satisfied(l, sig, t) || satisfied(r, sig, t),
        Formula::Always { a, b, child } => (t + a..=t + b).all(|k| satisfied(child, sig, k)),
        Formula::Eventually { a, b, child } => (t + a..=t + b).any(|k| satisfied(child, sig, k)),
    }
}

pub const CHANNELS: [&str; 3] = ["a", "b", "c"];

/// Random formula of at most `depth` operator levels whose horizon fits `len`.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize, budget: usize) -> Formula {
    let leaf = depth == 0 || rng.random::<f64>() < 0.2;
    if leaf {
        let ch = CHANNELS[rng.random_range(0..CHANNELS.len())];
        let c = (rng.random_range(-20..=20) as f64) / 10.0;
        return if rng.random::<bool>() { Formula::le(ch, c) } else { Formula::ge(ch, c) };
    }
    match rng.random_range(0..5) {
        0 => Formula::not(random_formula(rng, depth - 1, budget)),
        1 => Formula::and(random_formula(rng, depth - 1, budget), random_formula(rng, depth - 1, budget)),
        2 => Formula::or(random_formula(rng, depth - 1, budget), random_formula(rng, depth - 1, budget)),
        k => {
            let b = rng.random_range(0..=budget);
            let a = rng.random_range(0..=b);
            let child = random_formula(rng, depth - 1, budget - b);
            if k == 3 {
                Formula::always(a, b, child).unwrap()
            } else {
                Formula::eventually(a, b, child).unwrap()
            }
        }
    }
}

/// Random signals of length `len` on a coarse grid so that ties occur.
pub fn random_signals(rng: &mut ChaCha8Rng, len: usize) -> BTreeMap<String, Vec<f64>> {
    CHANNELS
        .iter()
        .map(|c| {
            let v = (0..len).map(|_| rng.random_range(-25..=25) as f64 / 10.0 + rng.random_range(-1e-3..1e-3)).collect();
            (c.to_string(), v)
        })
        .collect()
}

/// A random tracking instance: start, references, goal and pedestrian.
pub struct MpcInstance {
    pub start: LipState,
    pub refs: Vec<Reference>,
    pub goal: [f64; 2],
    pub ped: Option<[f64; 2]>,
}

pub fn random_mpc_instance(rng: &mut ChaCha8Rng, horizon: usize) -> MpcInstance {
    use socialnav::lip_mpc::references_from_path;
    let theta = rng.random_range(-3.0..3.0);
    let start = LipState::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), theta, rng.random_range(-0.2..0.9));
    let bearing = theta + rng.random_range(-1.0..1.0);
    let dist = rng.random_range(0.5..2.0);
    let goal = [start.x + dist * bearing.cos(), start.y + dist * bearing.sin()];
    let path: Vec<[f64; 2]> = (0..=horizon)
        .map(|q| {
            let f = q as f64 / horizon as f64;
            let n = if q == 0 { 0.0 } else { 0.05 };
            [
                start.x + f * (goal[0] - start.x) + rng.random_range(-n..=n),
                start.y + f * (goal[1] - start.y) + rng.random_range(-n..=n),
            ]
        })
        .collect();
    let refs = references_from_path(&path, theta, 0.4).unwrap();
    let ped = if rng.random::<bool>() {
        None
    } else {
        loop {
            let along = rng.random_range(0.4..1.2);
            let lat = rng.random_range(-0.3..0.3);
            let (c, s) = (bearing.cos(), bearing.sin());
            let p = [start.x + along * c - lat * s, start.y + along * s + lat * c];
            if socialnav::lip_mpc::cbf_h(&start, p) >= 0.5 && braking_is_safe(&start, p, horizon) {
                break Some(p);
            }
        }
    };
    MpcInstance { start, refs, goal, ped }
}

/// Whether braking as hard as possible without turning satisfies the barrier
/// decay at every step, which certifies a feasible instance.
fn braking_is_safe(s0: &LipState, ped: [f64; 2], horizon: usize) -> bool {
    let w = (9.81f64 / 0.9).sqrt();
    let mut s = [s0.x, s0.y, s0.theta, s0.xdot];
    let mut prev = h(&s, ped);
    for _ in 0..horizon {
        let uf = ((w * 0.4).cosh() * s[3] / (w * (w * 0.4).sinh())).clamp(-0.25, 0.25);
        s = lip_rollout(0.9, 0.4, s, &[[uf, 0.0]])[0];
        let hn = h(&s, ped);
        if hn < 0.7 * prev + 1e-3 || s[3] < -0.3 || s[3] > 1.0 {
            return false;
        }
        prev = hn;
    }
    true
}

/// One differentiable test case: input length, a sampler for admissible
/// points and the scalar function under test.
pub struct OpCase {
    pub name: &'static str,
    pub len: usize,
    pub domain: fn(f64) -> f64,
    pub f: fn(&mut Graph, NodeId) -> Result<NodeId, DiffError>,
}

fn any(u: f64) -> f64 {
    u
}

fn positive(u: f64) -> f64 {
    0.2 + u.abs()
}

fn off_zero(u: f64) -> f64 {
    if u < 0.0 { u - 0.1 } else { u + 0.1 }
}

/// Weighted sum with fixed, distinct weights, so every output element
/// contributes a different amount to the scalar.
pub fn contract(g: &mut Graph, y: NodeId) -> Result<NodeId, DiffError> {
    let shape = g.shape(y).to_vec();
    let n: usize = shape.iter().product();
    let w = g.constant(Tensor::new(shape, (0..n).map(|i| (1.0 + i as f64).sin() + 0.1).collect())?);
    let p = g.mul(y, w)?;
    g.sum(p)
}

fn halves(g: &mut Graph, x: NodeId) -> Result<(NodeId, NodeId), DiffError> {
    let n = g.shape(x)[0] / 2;
    let p = g.split(x, 0, &[n, n])?;
    Ok((p[0], p[1]))
}

fn matrix(g: &mut Graph, x: NodeId) -> Result<NodeId, DiffError> {
    g.reshape(x, vec![2, 3])
}

macro_rules! unary {
    ($name:expr, $dom:expr, $op:ident) => {
        OpCase { name: $name, len: 6, domain: $dom, f: |g, x| { let y = g.$op(x)?; contract(g, y) } }
    };
}

macro_rules! binary {
    ($name:expr, $dom:expr, $op:ident) => {
        OpCase {
            name: $name,
            len: 12,
            domain: $dom,
            f: |g, x| {
                let (a, b) = halves(g, x)?;
                let y = g.$op(a, b)?;
                contract(g, y)
            },
        }
    };
}

macro_rules! reduction {
    ($name:expr, $kind:expr, $axis:expr) => {
        OpCase {
            name: $name,
            len: 6,
            domain: any,
            f: |g, x| {
                let m = matrix(g, x)?;
                let y = g.reduce($kind, m, $axis)?;
                contract(g, y)
            },
        }
    };
}

/// Every public differentiable operation of the graph.
pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "matmul",
            len: 12,
            domain: any,
            f: |g, x| {
                let (a, b) = halves(g, x)?;
                let a = g.reshape(a, vec![2, 3])?;
                let b = g.reshape(b, vec![3, 2])?;
                let y = g.matmul(a, b)?;
                contract(g, y)
            },
        },
        binary!("add", any, add),
        binary!("sub", any, sub),
        binary!("mul", any, mul),
        binary!("div", off_zero, div),
        binary!("atan2", off_zero, atan2),
        unary!("neg", any, neg),
        unary!("square", any, square),
        unary!("sqrt", positive, sqrt),
        unary!("relu", off_zero, relu),
        unary!("exp", any, exp),
        unary!("ln", positive, ln),
        unary!("cos", any, cos),
        unary!("sin", any, sin),
        OpCase { name: "scale", len: 6, domain: any, f: |g, x| { let y = g.scale(x, -1.7)?; contract(g, y) } },
        OpCase { name: "add_scalar", len: 6, domain: any, f: |g, x| { let y = g.add_scalar(x, 0.4)?; contract(g, y) } },
        OpCase {
            name: "add_bias",
            len: 9,
            domain: any,
            f: |g, x| {
                let p = g.split(x, 0, &[6, 3])?;
                let m = g.reshape(p[0], vec![2, 3])?;
                let y = g.add_bias(m, p[1])?;
                contract(g, y)
            },
        },
        reduction!("sum", Reduce::Sum, None),
        reduction!("sum_axis0", Reduce::Sum, Some(0)),
        reduction!("mean_axis1", Reduce::Mean, Some(1)),
        reduction!("min", Reduce::Min, None),
        reduction!("max_axis0", Reduce::Max, Some(0)),
        reduction!("min_axis1", Reduce::Min, Some(1)),
        reduction!("logsumexp", Reduce::LogSumExp(0.3), None),
        reduction!("logsumexp_axis1", Reduce::LogSumExp(0.5), Some(1)),
        OpCase {
            name: "concat",
            len: 6,
            domain: any,
            f: |g, x| {
                let m = matrix(g, x)?;
                let s = g.square(m)?;
                let r = g.concat(&[m, s], 0)?;
                let c = g.concat(&[r, r], 1)?;
                contract(g, c)
            },
        },
        OpCase {
            name: "slice",
            len: 6,
            domain: any,
            f: |g, x| {
                let m = matrix(g, x)?;
                let y = g.slice(m, 1, 1, 3)?;
                let y = g.square(y)?;
                contract(g, y)
            },
        },
        OpCase {
            name: "reshape",
            len: 6,
            domain: any,
            f: |g, x| {
                let m = g.reshape(x, vec![3, 2])?;
                let y = g.sin(m)?;
                contract(g, y)
            },
        },
    ]
}

/// Worst relative gradient error of every op over `points` random inputs.
pub fn gradient_suite(rng: &mut ChaCha8Rng, points: usize, eps: f64) -> Vec<(&'static str, f64)> {
    op_cases()
        .into_iter()
        .map(|case| {
            let mut worst = 0.0f64;
            for _ in 0..points {
                let x: Vec<f64> = (0..case.len).map(|_| (case.domain)(rng.random_range(-2.0..2.0))).collect();
                let err = finite_diff_check(case.f, &Tensor::vector(x), eps).expect("gradient check");
                worst = worst.max(err);
            }
            (case.name, worst)
        })
        .collect()
}

/// Training samples from one synthetic scene.
pub fn scene_samples(name: &str, count: usize) -> Vec<SocialSample> {
    let scene = synth::corpus(0).into_iter().find(|s| s.name == name).expect("scene");
    let mut v = extract_samples(&scene, &ExtractConfig::default()).samples;
    v.truncate(count);
    v
}

/// Samples from one synthetic scene with exactly two neighbors.
pub fn two_neighbor_samples(count: usize) -> Vec<SocialSample> {
    let mut v: Vec<SocialSample> = scene_samples("UNIV", usize::MAX).into_iter().filter(|s| s.neighbors.len() == 2).collect();
    v.truncate(count);
    assert_eq!(v.len(), count);
    v
}

/// Worst relative error between the reverse-mode loss gradient of a tiny
/// planner and central differences, with the noise held fixed.
pub fn planner_loss_gradient_error(samples: &[SocialSample], alpha: f64, eps: f64) -> f64 {
    let mut cfg = PlannerConfig::tiny(6, 8, 8, 2);
    cfg.safety.alpha1 = alpha;
    cfg.safety.alpha2 = alpha;
    let mut model = PlannerModel::new(cfg).expect("model");
    let batch: Vec<&SocialSample> = samples.iter().collect();
    let noise: Vec<f64> = (0..batch.len() * 2).map(|i| (0.7 * i as f64).sin()).collect();
    let (_, grads) = model.batch_loss(&batch, &noise).expect("loss");
    let flat_grad: Vec<f64> = grads.concat();
    let flat_x: Vec<f64> = model.params_mut().iter().flat_map(|t| t.values().to_vec()).collect();
    max_relative_error(&flat_grad, &flat_x, eps, |x| {
        let mut off = 0;
        for t in model.params_mut() {
            let n = t.len();
            t.values_mut().copy_from_slice(&x[off..off + n]);
            off += n;
        }
        Ok(model.batch_loss_value(&batch, &noise).expect("loss").total)
    })
    .expect("finite differences")
}

pub fn to_signal_map(sig: &BTreeMap<String, Vec<f64>>) -> SignalMap {
    sig.iter()
        .map(|(k, v)| (k.clone(), Signal::new(k, v.clone(), 0.4).expect("signal")))
        .collect()
}

/// Outcome of comparing hard robustness against the brute-force evaluator.
pub struct OracleReport {
    pub pairs: usize,
    pub max_abs_diff: f64,
    pub sound_checked: usize,
    pub unsound: usize,
}

/// Runs `pairs` random formula/signal pairs of depth at most 4 and length
/// at most 12.
pub fn stl_oracle_corpus(seed: u64, pairs: usize) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = OracleReport { pairs, max_abs_diff: 0.0, sound_checked: 0, unsound: 0 };
    for _ in 0..pairs {
        let len = rng.random_range(1..=12);
        let depth = rng.random_range(0..=4);
        let phi = random_formula(&mut rng, depth, len - 1);
        let sig = random_signals(&mut rng, len);
        let t = rng.random_range(0..len - phi.horizon());
        let rho = robustness(&phi, &to_signal_map(&sig), t, Semantics::Hard).expect("robustness");
        let want = brute_robustness(&phi, &sig, t);
        rep.max_abs_diff = rep.max_abs_diff.max((rho - want).abs());
        if rho.abs() >= 1e-9 {
            rep.sound_checked += 1;
            if (rho > 0.0) != satisfied(&phi, &sig, t) {
                rep.unsound += 1;
            }
        }
    }
    rep
}

/// Number of (sample, permutation) pairs whose mean-mode prediction differs
/// bitwise from the unpermuted one.
pub fn permutation_mismatches(model: &PlannerModel, samples: &[SocialSample], perms: usize, seed: u64) -> usize {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for s in samples {
        let base = model.predict(&PlanInput::from(s), PredictMode::Mean).expect("predict");
        for _ in 0..perms {
            let mut input = PlanInput::from(s);
            input.neighbors.shuffle(&mut rng);
            let p = model.predict(&input, PredictMode::Mean).expect("predict");
            let same = p.points.iter().zip(&base.points).all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits());
            bad += (!same) as usize;
        }
    }
    bad
}
