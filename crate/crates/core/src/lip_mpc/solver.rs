use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::trajectory::{wrap_angle, Point};

use super::model::{cbf_h, residuals, rollout, Coeffs, CBF_RADIUS};
use super::{ControlInput, LipParams, LipState, MpcError, Reference};

/// Step-planner configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    /// Horizon in walking steps.
    pub horizon: usize,
    /// Sagittal velocity bounds `[lo, hi]`, m/s.
    pub xdot_bounds: [f64; 2],
    /// Foot placement bounds, meters.
    pub u_f_bounds: [f64; 2],
    /// Heading change bounds, radians.
    pub u_dtheta_bounds: [f64; 2],
    /// Barrier decay rate in `(0, 1]`.
    pub gamma: f64,
    /// Running-cost weights on `[x, y, theta, xdot]`.
    pub w_running: [f64; 4],
    /// Terminal-cost weights.
    pub w_terminal: [f64; 4],
    /// Terminal heading; `None` uses the bearing from the start to the goal.
    pub theta_terminal: Option<f64>,
    pub xdot_terminal: f64,
    /// Final barrier weight.
    pub mu_min: f64,
    /// Newton iterations allowed per barrier weight.
    pub inner_iters: usize,
    /// Total Newton iterations allowed.
    pub max_iters: usize,
    /// Stationarity tolerance on the Newton decrement.
    pub tol: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 4,
            xdot_bounds: [-0.3, 1.0],
            u_f_bounds: [-0.25, 0.25],
            u_dtheta_bounds: [-0.3, 0.3],
            gamma: 0.3,
            w_running: [1.0, 1.0, 0.5, 0.5],
            w_terminal: [4.0, 4.0, 1.0, 1.0],
            theta_terminal: None,
            xdot_terminal: 0.0,
            mu_min: 1e-10,
            inner_iters: 60,
            max_iters: 800,
            tol: 1e-12,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        let ordered = |b: [f64; 2]| b[0] < b[1];
        let ok = self.horizon >= 1
            && ordered(self.xdot_bounds)
            && ordered(self.u_f_bounds)
            && ordered(self.u_dtheta_bounds)
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && self.w_running.iter().chain(&self.w_terminal).all(|w| *w >= 0.0)
            && self.mu_min > 0.0
            && self.max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(MpcError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// One accepted solver iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcSolution {
    pub controls: Vec<ControlInput>,
    /// States after each control.
    pub states: Vec<LipState>,
    pub objective: f64,
    pub iterations: usize,
    /// Whether the last barrier stage met the stationarity tolerance.
    pub converged: bool,
    /// Largest constraint violation (0 for the interior iterates returned).
    pub max_violation: f64,
    /// Accepted iterates of the run that produced the solution.
    pub trace: Vec<TraceRow>,
}

/// The tracking problem for one solve.
#[derive(Clone, Debug)]
pub struct MpcProblem<'a> {
    pub params: &'a LipParams,
    pub config: &'a MpcConfig,
    pub start: LipState,
    /// References for states `0..N`; shorter lists repeat their last entry.
    pub references: &'a [Reference],
    pub goal: Point,
    /// Closest pedestrian, if any.
    pub pedestrian: Option<Point>,
}

impl MpcProblem<'_> {
    fn reference(&self, q: usize) -> Reference {
        self.references[q.min(self.references.len() - 1)]
    }

    pub fn theta_terminal(&self) -> f64 {
        self.config.theta_terminal.unwrap_or_else(|| {
            let (dx, dy) = (self.goal[0] - self.start.x, self.goal[1] - self.start.y);
            if dx.hypot(dy) < 1e-9 {
                self.start.theta
            } else {
                dy.atan2(dx)
            }
        })
    }

    /// Full objective of a control sequence, including the constant first running term.
    pub fn objective(&self, controls: &[ControlInput]) -> f64 {
        let states = rollout(self.params, &self.start, controls);
        let w1 = &self.config.w_running;
        let mut j = super::running_cost(&self.start, &self.reference(0), w1);
        for q in 1..controls.len() {
            j += super::running_cost(&states[q - 1], &self.reference(q), w1);
        }
        j + super::terminal_cost(
            states.last().unwrap_or(&self.start),
            self.goal,
            self.theta_terminal(),
            self.config.xdot_terminal,
            &self.config.w_terminal,
        )
    }

    /// Largest violation of the box, velocity and barrier constraints.
    pub fn max_violation(&self, controls: &[ControlInput]) -> f64 {
        let cfg = self.config;
        let states = rollout(self.params, &self.start, controls);
        let mut v = 0.0f64;
        for u in controls {
            v = v
                .max(cfg.u_f_bounds[0] - u.u_f)
                .max(u.u_f - cfg.u_f_bounds[1])
                .max(cfg.u_dtheta_bounds[0] - u.u_dtheta)
                .max(u.u_dtheta - cfg.u_dtheta_bounds[1]);
        }
        for s in &states {
            v = v.max(cfg.xdot_bounds[0] - s.xdot).max(s.xdot - cfg.xdot_bounds[1]);
        }
        if let Some(ped) = self.pedestrian {
            let mut prev = cbf_h(&self.start, ped);
            for s in &states {
                let h = cbf_h(s, ped);
                v = v.max((1.0 - cfg.gamma) * prev - h);
                prev = h;
            }
        }
        v
    }
}

/// Objective, gradient, Gauss-Newton Hessian and constraints at one point.
struct Eval {
    f: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    cons: Vec<f64>,
    cons_grad: Vec<DVector<f64>>,
    /// Indices of the nonlinear (barrier-function) constraints.
    nonlinear: std::ops::Range<usize>,
}

fn to_controls(z: &DVector<f64>) -> Vec<ControlInput> {
    z.as_slice()
        .chunks_exact(2)
        .map(|c| ControlInput {
            u_f: c[0],
            u_dtheta: c[1],
        })
        .collect()
}

fn from_controls(u: &[ControlInput]) -> DVector<f64> {
    DVector::from_iterator(2 * u.len(), u.iter().flat_map(|c| [c.u_f, c.u_dtheta]))
}

/// Rollout with forward sensitivities `d s_q / d z` (4 x 2N each), `q = 0..=N`.
fn sensitivities(k: &Coeffs, s0: &LipState, z: &DVector<f64>) -> (Vec<[f64; 4]>, Vec<DMatrix<f64>>) {
    let n = z.len() / 2;
    let mut states = Vec::with_capacity(n + 1);
    let mut jac = Vec::with_capacity(n + 1);
    let mut s = [s0.x, s0.y, s0.theta, s0.xdot];
    let mut j = DMatrix::<f64>::zeros(4, 2 * n);
    states.push(s);
    jac.push(j.clone());
    for q in 0..n {
        let (uf, ud) = (z[2 * q], z[2 * q + 1]);
        let disp = k.a * s[3] + k.b * uf;
        let (sn, cs) = s[2].sin_cos();
        let mut a = DMatrix::<f64>::identity(4, 4);
        a[(0, 2)] = -disp * sn;
        a[(0, 3)] = k.a * cs;
        a[(1, 2)] = disp * cs;
        a[(1, 3)] = k.a * sn;
        a[(3, 3)] = k.c;
        let mut next = &a * &j;
        next[(0, 2 * q)] += k.b * cs;
        next[(1, 2 * q)] += k.b * sn;
        next[(2, 2 * q + 1)] += 1.0;
        next[(3, 2 * q)] += -k.d;
        s = [s[0] + disp * cs, s[1] + disp * sn, s[2] + ud, k.c * s[3] - k.d * uf];
        j = next;
        states.push(s);
        jac.push(j.clone());
    }
    (states, jac)
}

fn evaluate(pb: &MpcProblem, k: &Coeffs, z: &DVector<f64>) -> Eval {
    let cfg = pb.config;
    let n = z.len() / 2;
    let dim = z.len();
    let (states, jac) = sensitivities(k, &pb.start, z);
    let mut f = 0.0;
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    let mut add_block = |s: &[f64; 4], j: &DMatrix<f64>, target: [f64; 4], w: &[f64; 4]| {
        let st = LipState {
            x: s[0],
            y: s[1],
            theta: s[2],
            xdot: s[3],
        };
        let r = residuals(&st, &target);
        for i in 0..4 {
            if w[i] == 0.0 {
                continue;
            }
            f += w[i] * r[i] * r[i];
            let row = j.row(i).transpose();
            grad.axpy(2.0 * w[i] * r[i], &row, 1.0);
            hess.ger(2.0 * w[i], &row, &row, 1.0);
        }
    };
    for q in 0..n {
        let r = pb.reference(q);
        add_block(&states[q], &jac[q], [r.pos[0], r.pos[1], r.theta, r.xdot], &cfg.w_running);
    }
    let tt = pb.theta_terminal();
    add_block(
        &states[n],
        &jac[n],
        [pb.goal[0], pb.goal[1], tt, cfg.xdot_terminal],
        &cfg.w_terminal,
    );

    let mut cons = Vec::new();
    let mut cons_grad = Vec::new();
    let unit = |i: usize, sign: f64| {
        let mut g = DVector::zeros(dim);
        g[i] = sign;
        g
    };
    for q in 0..n {
        for (i, b) in [(2 * q, cfg.u_f_bounds), (2 * q + 1, cfg.u_dtheta_bounds)] {
            cons.push(z[i] - b[0]);
            cons_grad.push(unit(i, 1.0));
            cons.push(b[1] - z[i]);
            cons_grad.push(unit(i, -1.0));
        }
    }
    for q in 1..=n {
        let row = jac[q].row(3).transpose();
        cons.push(states[q][3] - cfg.xdot_bounds[0]);
        cons_grad.push(row.clone());
        cons.push(cfg.xdot_bounds[1] - states[q][3]);
        cons_grad.push(-row);
    }
    let nl_start = cons.len();
    if let Some(ped) = pb.pedestrian {
        let hv = |s: &[f64; 4], j: &DMatrix<f64>| {
            let (dx, dy) = (s[0] - ped[0], s[1] - ped[1]);
            let d = dx.hypot(dy);
            let h = d / CBF_RADIUS - 1.0;
            let g = if d > 0.0 {
                (j.row(0).transpose() * dx + j.row(1).transpose() * dy) / (CBF_RADIUS * d)
            } else {
                DVector::zeros(dim)
            };
            (h, g)
        };
        for q in 0..n {
            let (h0, g0) = hv(&states[q], &jac[q]);
            let (h1, g1) = hv(&states[q + 1], &jac[q + 1]);
            cons.push(h1 - (1.0 - cfg.gamma) * h0);
            cons_grad.push(g1 - g0 * (1.0 - cfg.gamma));
        }
    }
    let nl_end = cons.len();
    Eval {
        f,
        grad,
        hess,
        cons,
        cons_grad,
        nonlinear: nl_start..nl_end,
    }
}

fn min_nonlinear(e: &Eval) -> f64 {
    e.cons[e.nonlinear.clone()].iter().copied().fold(f64::INFINITY, f64::min)
}

fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut reg = 1e-12 * scale;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            let d = -ch.solve(g);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg *= 100.0;
    }
    None
}

/// Strictly feasible point for the linear constraints closest to `guess`,
/// built step by step.
fn interior_guess(pb: &MpcProblem, k: &Coeffs, guess: &[ControlInput]) -> DVector<f64> {
    let cfg = pb.config;
    let shrink = |b: [f64; 2]| {
        let m = 1e-3 * (b[1] - b[0]);
        [b[0] + m, b[1] - m]
    };
    let (bf, bd, bx) = (shrink(cfg.u_f_bounds), shrink(cfg.u_dtheta_bounds), shrink(cfg.xdot_bounds));
    let mut xdot = pb.start.xdot;
    let mut out = Vec::with_capacity(guess.len());
    for u in guess {
        // xdot' = c*xdot - d*u_f must stay inside bx
        let lo = ((k.c * xdot - bx[1]) / k.d).max(bf[0]);
        let hi = ((k.c * xdot - bx[0]) / k.d).min(bf[1]);
        let uf = if lo <= hi { u.u_f.clamp(lo, hi) } else { 0.5 * (lo + hi) };
        let ud = u.u_dtheta.clamp(bd[0], bd[1]);
        xdot = k.c * xdot - k.d * uf;
        out.push(ControlInput { u_f: uf, u_dtheta: ud });
    }
    from_controls(&out)
}

fn linear_ok(e: &Eval) -> bool {
    e.cons[..e.nonlinear.start].iter().all(|c| *c > 0.0)
}

/// Pushes the barrier constraints strictly positive while keeping the
/// linear ones strictly feasible. Returns the point and whether it succeeded.
fn phase_one(pb: &MpcProblem, k: &Coeffs, z0: DVector<f64>) -> (DVector<f64>, bool) {
    let e0 = evaluate(pb, k, &z0);
    if e0.nonlinear.is_empty() || min_nonlinear(&e0) > 0.0 {
        return (z0, linear_ok(&e0));
    }
    if !linear_ok(&e0) {
        return (z0, false);
    }
    let dim = z0.len();
    // variables (z, t); minimize t subject to c_nl(z) + t > 0 and linear constraints
    let mut z = z0;
    let mut t = -min_nonlinear(&e0) + 1.0;
    let mut mu = 1.0;
    for _ in 0..200 {
        let e = evaluate(pb, k, &z);
        if min_nonlinear(&e) > 1e-9 {
            return (z, true);
        }
        let merit = |e: &Eval, t: f64, mu: f64| -> f64 {
            let mut m = t;
            for (i, c) in e.cons.iter().enumerate() {
                let c = if e.nonlinear.contains(&i) { c + t } else { *c };
                if c <= 0.0 {
                    return f64::INFINITY;
                }
                m -= mu * c.ln();
            }
            m
        };
        let mut g = DVector::zeros(dim + 1);
        g[dim] = 1.0;
        let mut h = DMatrix::zeros(dim + 1, dim + 1);
        for (i, c) in e.cons.iter().enumerate() {
            let mut gc = DVector::zeros(dim + 1);
            gc.rows_mut(0, dim).copy_from(&e.cons_grad[i]);
            let c = if e.nonlinear.contains(&i) {
                gc[dim] = 1.0;
                c + t
            } else {
                *c
            };
            g.axpy(-mu / c, &gc, 1.0);
            h.ger(mu / (c * c), &gc, &gc, 1.0);
        }
        let Some(d) = newton_direction(h, &g) else { break };
        let m0 = merit(&e, t, mu);
        let slope = g.dot(&d);
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let zn = &z + d.rows(0, dim) * alpha;
            let tn = t + alpha * d[dim];
            let en = evaluate(pb, k, &zn);
            let mn = merit(&en, tn, mu);
            if mn.is_finite() && mn <= m0 + 1e-4 * alpha * slope {
                z = zn;
                t = tn;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved || -slope < 1e-14 {
            mu *= 0.2;
            if mu < 1e-12 {
                break;
            }
        }
    }
    let e = evaluate(pb, k, &z);
    let ok = min_nonlinear(&e) > 0.0 && linear_ok(&e);
    (z, ok)
}

struct Run {
    z: DVector<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<TraceRow>,
}

fn barrier(e: &Eval, mu: f64) -> f64 {
    let mut b = e.f;
    for c in &e.cons {
        if *c <= 0.0 {
            return f64::INFINITY;
        }
        b -= mu * c.ln();
    }
    b
}

/// Log-barrier Newton iterations from a strictly feasible point. Every accepted
/// step keeps strict feasibility and does not increase the objective.
fn phase_two(pb: &MpcProblem, k: &Coeffs, z0: DVector<f64>) -> Run {
    let cfg = pb.config;
    let mut z = z0;
    let mut e = evaluate(pb, k, &z);
    let mut mu = 1e-2 * e.f.abs().max(1e-2);
    let mut trace = vec![TraceRow {
        iteration: 0,
        objective: e.f,
        max_violation: 0.0,
        mu,
    }];
    let mut iters = 0;
    let converged;
    loop {
        let mut stage_done = false;
        for _ in 0..cfg.inner_iters {
            if iters >= cfg.max_iters {
                break;
            }
            let mut g = e.grad.clone();
            let mut h = e.hess.clone();
            for (c, gc) in e.cons.iter().zip(&e.cons_grad) {
                g.axpy(-mu / c, gc, 1.0);
                h.ger(mu / (c * c), gc, gc, 1.0);
            }
            let Some(d) = newton_direction(h, &g) else { break };
            let slope = g.dot(&d);
            if -slope <= cfg.tol * e.f.abs().max(1.0) {
                stage_done = true;
                break;
            }
            let phi0 = barrier(&e, mu);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..50 {
                let zn = &z + &d * alpha;
                let en = evaluate(pb, k, &zn);
                let phi = barrier(&en, mu);
                if phi.is_finite() && phi <= phi0 + 1e-4 * alpha * slope && en.f <= e.f {
                    accepted = Some((zn, en));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((zn, en)) = accepted else {
                stage_done = true;
                break;
            };
            iters += 1;
            z = zn;
            e = en;
            trace.push(TraceRow {
                iteration: iters,
                objective: e.f,
                max_violation: 0.0,
                mu,
            });
        }
        if mu <= cfg.mu_min || iters >= cfg.max_iters {
            converged = stage_done && mu <= cfg.mu_min;
            break;
        }
        mu = (mu * 0.1).max(cfg.mu_min);
    }
    Run {
        f: e.f,
        z,
        iterations: iters,
        converged,
        trace,
    }
}

/// Candidate control sequences used as starting points.
fn initial_guesses(pb: &MpcProblem, k: &Coeffs, warm: Option<&[ControlInput]>) -> Vec<Vec<ControlInput>> {
    let cfg = pb.config;
    let n = cfg.horizon;
    let mut out = Vec::new();
    if let Some(w) = warm {
        let mut w: Vec<ControlInput> = w.iter().copied().take(n).collect();
        let last = w.last().copied().unwrap_or_default();
        w.resize(n, last);
        out.push(w);
    }
    out.push(vec![ControlInput::default(); n]);
    // greedy tracking of the reference headings and velocities
    let mut s = pb.start;
    let mut track = Vec::with_capacity(n);
    for q in 0..n {
        let r = pb.reference(q);
        let u = ControlInput {
            u_f: (k.c * s.xdot - r.xdot) / k.d,
            u_dtheta: wrap_angle(r.theta - s.theta),
        };
        s = super::step_dynamics(pb.params, &s, &u);
        track.push(u);
    }
    out.push(track);
    // braking while turning to either side
    for sign in [1.0, -1.0] {
        let mut s = pb.start;
        let mut brake = Vec::with_capacity(n);
        for _ in 0..n {
            let u = ControlInput {
                u_f: k.c * s.xdot / k.d,
                u_dtheta: sign * cfg.u_dtheta_bounds[1].abs().max(cfg.u_dtheta_bounds[0].abs()),
            };
            s = super::step_dynamics(pb.params, &s, &u);
            brake.push(u);
        }
        out.push(brake);
    }
    out
}

/// Solves the step-planning problem. `warm` seeds one of the starting points.
pub fn solve_with(pb: &MpcProblem, warm: Option<&[ControlInput]>) -> Result<MpcSolution, MpcError> {
    pb.params.validate()?;
    pb.config.validate()?;
    if pb.references.is_empty() {
        return Err(MpcError::InvalidConfig("no reference points".into()));
    }
    if let Some(ped) = pb.pedestrian {
        let h = cbf_h(&pb.start, ped);
        if h < 0.0 {
            return Err(MpcError::InfeasibleStart { h });
        }
    }
    let k = pb.params.coefficients();
    let mut best: Option<Run> = None;
    let mut closest: Option<(f64, Vec<ControlInput>)> = None;
    for guess in initial_guesses(pb, &k, warm) {
        let z0 = interior_guess(pb, &k, &guess);
        let (z1, ok) = phase_one(pb, &k, z0);
        if !ok {
            let u = to_controls(&z1);
            let v = pb.max_violation(&u);
            if closest.as_ref().is_none_or(|(bv, _)| v < *bv) {
                closest = Some((v, u));
            }
            continue;
        }
        let run = phase_two(pb, &k, z1);
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
    }
    let Some(run) = best else {
        let (max_violation, best) = closest.unwrap_or((f64::INFINITY, Vec::new()));
        return Err(MpcError::SolverFailure { best, max_violation });
    };
    let controls = to_controls(&run.z);
    let states = rollout(pb.params, &pb.start, &controls);
    let objective = pb.objective(&controls);
    let max_violation = pb.max_violation(&controls).max(0.0);
    Ok(MpcSolution {
        controls,
        states,
        objective,
        iterations: run.iterations,
        converged: run.converged,
        max_violation,
        trace: run.trace,
    })
}

pub fn solve(pb: &MpcProblem) -> Result<MpcSolution, MpcError> {
    solve_with(pb, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs_at(p: Point) -> Vec<Reference> {
        vec![Reference {
            pos: p,
            theta: 0.0,
            xdot: 0.0,
        }]
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let p = LipParams::default();
        let k = p.coefficients();
        let s0 = LipState::new(0.3, -0.2, 0.4, 0.6);
        let z = DVector::from_vec(vec![0.1, 0.2, -0.05, -0.1, 0.02, 0.25]);
        let (_, jac) = sensitivities(&k, &s0, &z);
        let eps = 1e-6;
        for i in 0..z.len() {
            let mut zp = z.clone();
            zp[i] += eps;
            let mut zm = z.clone();
            zm[i] -= eps;
            let sp = rollout(&p, &s0, &to_controls(&zp));
            let sm = rollout(&p, &s0, &to_controls(&zm));
            for q in 0..3 {
                let (a, b) = (sp[q].as_array(), sm[q].as_array());
                for r in 0..4 {
                    let mut d = b[r] - a[r];
                    if r == 2 {
                        d = wrap_angle(d);
                    }
                    let fd = -d / (2.0 * eps);
                    assert!((fd - jac[q + 1][(r, i)]).abs() < 1e-6, "q{q} r{r} i{i}");
                }
            }
        }
    }

    #[test]
    fn stationary_start_at_goal() {
        let p = LipParams::default();
        let cfg = MpcConfig::default();
        let refs = refs_at([1.0, 1.0]);
        let pb = MpcProblem {
            params: &p,
            config: &cfg,
            start: LipState::new(1.0, 1.0, 0.0, 0.0),
            references: &refs,
            goal: [1.0, 1.0],
            pedestrian: Some([5.0, 5.0]),
        };
        let sol = solve(&pb).unwrap();
        assert!(sol.objective < 1e-6, "{}", sol.objective);
        assert!(sol.controls.iter().all(|u| u.u_f.abs() < 1e-3 && u.u_dtheta.abs() < 1e-3));
    }

    #[test]
    fn infeasible_start() {
        let p = LipParams::default();
        let cfg = MpcConfig::default();
        let refs = refs_at([1.0, 0.0]);
        let pb = MpcProblem {
            params: &p,
            config: &cfg,
            start: LipState::new(0.0, 0.0, 0.0, 0.0),
            references: &refs,
            goal: [1.0, 0.0],
            pedestrian: Some([0.1, 0.0]),
        };
        assert!(matches!(solve(&pb), Err(MpcError::InfeasibleStart { .. })));
    }

    #[test]
    fn pedestrian_on_path_keeps_barrier_decay() {
        let p = LipParams::default();
        let cfg = MpcConfig::default();
        let path: Vec<Point> = (0..=8).map(|q| [0.4 * q as f64, 0.0]).collect();
        let refs = super::super::references_from_path(&path, 0.0, 0.4).unwrap();
        let ped = [0.5, 0.0];
        let start = LipState::new(0.0, 0.0, 0.0, 0.6);
        let pb = MpcProblem {
            params: &p,
            config: &cfg,
            start,
            references: &refs,
            goal: [3.2, 0.0],
            pedestrian: Some(ped),
        };
        let sol = solve(&pb).unwrap();
        let mut prev = cbf_h(&start, ped);
        for s in &sol.states {
            let h = cbf_h(s, ped);
            assert!(h - (1.0 - cfg.gamma) * prev >= -1e-6);
            prev = h;
        }
        assert!(sol.max_violation <= 1e-6);
        assert_eq!(sol.states, rollout(&p, &start, &sol.controls));
        for w in sol.trace.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12);
        }
    }
}
