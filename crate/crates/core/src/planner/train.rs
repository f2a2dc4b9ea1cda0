use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crowdsets::SocialSample;
use crate::diffmath::{DiffError, Graph, NodeId, Reduce, Tensor};
use crate::stl::{stl_loss_terms, Semantics};
use crate::trajectory::Point;

use super::model::{BatchInput, PlanInput};
use super::{OptimizerKind, PlannerError, PlannerModel};

/// Batch-mean loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub kl: f64,
    pub endpoint: f64,
    pub avg_traj: f64,
    pub stl_dtheta: f64,
    pub stl_vel: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn is_finite(&self) -> bool {
        [self.kl, self.endpoint, self.avg_traj, self.stl_dtheta, self.stl_vel, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    fn accumulate(&mut self, other: &LossBreakdown, w: f64) {
        self.kl += w * other.kl;
        self.endpoint += w * other.endpoint;
        self.avg_traj += w * other.avg_traj;
        self.stl_dtheta += w * other.stl_dtheta;
        self.stl_vel += w * other.stl_vel;
        self.total += w * other.total;
    }
}

struct LossNodes {
    kl: NodeId,
    endpoint: NodeId,
    avg_traj: NodeId,
    stl_dtheta: NodeId,
    stl_vel: NodeId,
    total: NodeId,
}

impl PlannerModel {
    fn loss_graph(&self, g: &mut Graph, x: &BatchInput, eps: &[f64]) -> Result<(Vec<NodeId>, LossNodes), PlannerError> {
        let c = &self.config;
        let (b, ld, np) = (x.batch, c.latent_dim, c.n_pred);
        if eps.len() != b * ld {
            return Err(PlannerError::Dimension(format!("noise has {} values, expected {}", eps.len(), b * ld)));
        }
        let futures = x
            .futures
            .as_ref()
            .ok_or_else(|| PlannerError::Usage("training needs ground-truth futures".into()))?;
        let net = self.bind(g, true);
        let env = self.env_node(g, &net, x)?;
        let fut = g.constant(futures.clone());
        let te = net.e_traj.forward(g, fut)?;
        let enc_in = g.concat(&[env, te], 1)?;
        let stats = net.e_latent.forward(g, enc_in)?;
        let mu = g.slice(stats, 1, 0, ld)?;
        let logvar = g.slice(stats, 1, ld, 2 * ld)?;
        let half = g.scale(logvar, 0.5)?;
        let sigma = g.exp(half)?;
        let noise = g.constant(Tensor::new(vec![b, ld], eps.to_vec())?);
        let spread = g.mul(sigma, noise)?;
        let z = g.add(mu, spread)?;
        let pred = self.decode_node(g, &net, env, z)?;

        // KL(N(mu, sigma^2) || N(0, I)) per sample
        let mu2 = g.square(mu)?;
        let var = g.exp(logvar)?;
        let s = g.add(mu2, var)?;
        let s = g.sub(s, logvar)?;
        let s = g.add_scalar(s, -1.0)?;
        let s = g.scale(s, 0.5)?;
        let kl_each = g.reduce(Reduce::Sum, s, Some(1))?;
        let kl = g.mean(kl_each)?;

        let err = g.sub(pred, fut)?;
        let sq = g.square(err)?;
        let last = g.slice(sq, 1, 2 * np - 2, 2 * np)?;
        let last = g.reduce(Reduce::Sum, last, Some(1))?;
        let endpoint = g.mean(last)?;
        let pts = g.reshape(sq, vec![b, np, 2])?;
        let per_point = g.reduce(Reduce::Sum, pts, Some(2))?;
        let avg_traj = g.mean(per_point)?;

        let origin = g.constant(Tensor::zeros(&[b, 2]));
        let full = g.concat(&[origin, pred], 1)?;
        let terms = stl_loss_terms(g, full, &x.theta0, &c.safety, c.dt, Semantics::Smooth(c.safety.tau))?;
        let stl_dtheta = g.mean(terms.dtheta)?;
        let stl_vel = g.mean(terms.vel)?;

        let base = g.add(kl, endpoint)?;
        let mut total = g.add(base, avg_traj)?;
        if !c.safety.stl_disabled() {
            let a = g.scale(stl_dtheta, c.safety.alpha1)?;
            let v = g.scale(stl_vel, c.safety.alpha2)?;
            total = g.add(total, a)?;
            total = g.add(total, v)?;
        }
        Ok((
            net.leaves(),
            LossNodes {
                kl,
                endpoint,
                avg_traj,
                stl_dtheta,
                stl_vel,
                total,
            },
        ))
    }

    fn batch_loss_inner(&self, samples: &[&SocialSample], eps: &[f64], grads: bool) -> Result<(LossBreakdown, Vec<Vec<f64>>), PlannerError> {
        let inputs: Vec<PlanInput> = samples.iter().map(|s| PlanInput::from(*s)).collect();
        let futures: Vec<&[Point]> = samples.iter().map(|s| s.ego_future.as_slice()).collect();
        let x = self.batch_input(&inputs, Some(&futures))?;
        let mut g = Graph::new();
        let (leaves, n) = self.loss_graph(&mut g, &x, eps)?;
        let lb = LossBreakdown {
            kl: g.item(n.kl),
            endpoint: g.item(n.endpoint),
            avg_traj: g.item(n.avg_traj),
            stl_dtheta: g.item(n.stl_dtheta),
            stl_vel: g.item(n.stl_vel),
            total: g.item(n.total),
        };
        if !lb.is_finite() {
            return Err(PlannerError::Diff(DiffError::NonFinite("loss".into())));
        }
        if lb.kl < -1e-12 {
            return Err(PlannerError::Usage(format!("negative KL divergence {}", lb.kl)));
        }
        let mut out = Vec::new();
        if grads {
            g.backward(n.total)?;
            out = leaves.iter().map(|id| g.grad(*id).expect("leaf gradient").to_vec()).collect();
        }
        Ok((lb, out))
    }

    /// Batch-mean losses and the gradient of the total with respect to every
    /// parameter (ordered as [`named_params`](Self::named_params)). `eps` is the
    /// reparameterization noise, `batch * latent_dim` values.
    pub fn batch_loss(&self, samples: &[&SocialSample], eps: &[f64]) -> Result<(LossBreakdown, Vec<Vec<f64>>), PlannerError> {
        if samples.is_empty() {
            return Err(PlannerError::Usage("empty batch".into()));
        }
        match self.batch_loss_inner(samples, eps, true) {
            Err(PlannerError::Diff(DiffError::NonFinite(_))) => Err(self.locate_divergence(samples, eps)),
            other => other,
        }
    }

    /// Loss terms without gradients.
    pub fn batch_loss_value(&self, samples: &[&SocialSample], eps: &[f64]) -> Result<LossBreakdown, PlannerError> {
        if samples.is_empty() {
            return Err(PlannerError::Usage("empty batch".into()));
        }
        self.batch_loss_inner(samples, eps, false).map(|r| r.0)
    }

    fn locate_divergence(&self, samples: &[&SocialSample], eps: &[f64]) -> PlannerError {
        let ld = self.config.latent_dim;
        for (i, s) in samples.iter().enumerate() {
            if self.batch_loss_inner(&[*s], &eps[i * ld..(i + 1) * ld], false).is_err() {
                return PlannerError::Divergence { sample: s.id() };
            }
        }
        PlannerError::Divergence {
            sample: samples[0].id(),
        }
    }
}

/// Optimizer buffers; serializable so training can resume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step: u64,
    /// Momentum (SGD) or first moment (Adam), one buffer per parameter tensor.
    pub m: Vec<Vec<f64>>,
    /// Second moment (Adam only).
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(model: &PlannerModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.named_params().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            kind: model.config.optimizer,
            step: 0,
            v: if model.config.optimizer == OptimizerKind::Adam { zeros.clone() } else { Vec::new() },
            m: zeros,
        }
    }

    pub fn apply(&mut self, model: &mut PlannerModel, grads: &mut [Vec<f64>]) {
        let cfg = model.config.clone();
        if cfg.clip_norm > 0.0 {
            let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.clip_norm {
                let s = cfg.clip_norm / norm;
                grads.iter_mut().flatten().for_each(|g| *g *= s);
            }
        }
        self.step += 1;
        let t = self.step as f64;
        for (k, p) in model.params_mut().into_iter().enumerate() {
            let vals = p.values_mut();
            let g = &grads[k];
            match self.kind {
                OptimizerKind::Sgd => {
                    let m = &mut self.m[k];
                    for i in 0..vals.len() {
                        m[i] = cfg.momentum * m[i] + g[i];
                        vals[i] -= cfg.lr * m[i];
                    }
                }
                OptimizerKind::Adam => {
                    let (b1, b2, e) = (0.9, 0.999, 1e-8);
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..vals.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                        let mh = m[i] / (1.0 - b1.powf(t));
                        let vh = v[i] / (1.0 - b2.powf(t));
                        vals[i] -= cfg.lr * mh / (vh.sqrt() + e);
                    }
                }
            }
        }
    }
}

/// Draws reparameterization noise for a batch.
pub fn draw_noise(rng: &mut ChaCha8Rng, batch: usize, latent_dim: usize) -> Vec<f64> {
    (0..batch * latent_dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// One optimizer update on a batch; returns the batch-mean losses before the update.
pub fn train_step(
    model: &mut PlannerModel,
    batch: &[&SocialSample],
    opt: &mut OptimizerState,
    rng: &mut ChaCha8Rng,
) -> Result<LossBreakdown, PlannerError> {
    let eps = draw_noise(rng, batch.len(), model.config.latent_dim);
    let (lb, mut grads) = model.batch_loss(batch, &eps)?;
    opt.apply(model, &mut grads);
    if !model.all_finite() {
        return Err(PlannerError::Divergence { sample: batch[0].id() });
    }
    model.meta.steps += 1;
    Ok(lb)
}

/// Per-epoch means and the per-step loss trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<LossBreakdown>,
    pub step_totals: Vec<f64>,
}

/// Trains for `config.epochs` epochs with shuffled mini-batches.
pub fn train(
    model: &mut PlannerModel,
    samples: &[SocialSample],
    mut on_epoch: impl FnMut(usize, &LossBreakdown),
) -> Result<TrainReport, PlannerError> {
    if samples.is_empty() {
        return Err(PlannerError::Usage("no training samples".into()));
    }
    let mut opt = OptimizerState::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x5eed_7a11);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..model.config.epochs {
        order.shuffle(&mut rng);
        let mut mean = LossBreakdown::default();
        for chunk in order.chunks(model.config.batch_size) {
            let batch: Vec<&SocialSample> = chunk.iter().map(|i| &samples[*i]).collect();
            let lb = train_step(model, &batch, &mut opt, &mut rng)?;
            mean.accumulate(&lb, batch.len() as f64 / samples.len() as f64);
            report.step_totals.push(lb.total);
        }
        model.meta.epochs += 1;
        model.meta.final_loss = Some(mean);
        on_epoch(epoch, &mean);
        report.epochs.push(mean);
    }
    Ok(report)
}
