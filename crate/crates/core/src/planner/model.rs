use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crowdsets::SocialSample;
use crate::diffmath::{Graph, NodeId, Tensor};
use crate::trajectory::Point;

use super::{PlannerConfig, PlannerError};

/// Fully connected network: ReLU after every layer except the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// `(weight [in, out], bias [out])` per layer.
    pub layers: Vec<(Tensor, Tensor)>,
}

impl Mlp {
    pub fn init(widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let weight = (0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect();
                let bias = (0..w[1]).map(|_| rng.random_range(-bound..bound)).collect();
                (
                    Tensor::new(vec![w[0], w[1]], weight).expect("shape"),
                    Tensor::new(vec![w[1]], bias).expect("shape"),
                )
            })
            .collect();
        Self { layers }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(|(wt, _)| wt.shape()[0]).collect();
        if let Some((wt, _)) = self.layers.last() {
            w.push(wt.shape()[1]);
        }
        w
    }
}

/// Graph handles for one network's parameters.
#[derive(Clone, Debug)]
pub(crate) struct BoundMlp {
    pub layers: Vec<(NodeId, NodeId)>,
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, mut x: NodeId) -> Result<NodeId, PlannerError> {
        let last = self.layers.len() - 1;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let y = g.matmul(x, *w)?;
            x = g.add_bias(y, *b)?;
            if i < last {
                x = g.relu(x)?;
            }
        }
        Ok(x)
    }
}

/// Epochs seen and the latest losses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub steps: usize,
    pub final_loss: Option<super::LossBreakdown>,
}

/// The five sub-networks of the planner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerModel {
    pub config: PlannerConfig,
    pub e_ped: Mlp,
    pub e_goal: Mlp,
    pub e_traj: Mlp,
    pub e_latent: Mlp,
    pub d_latent: Mlp,
    pub meta: TrainingMeta,
}

pub(crate) struct Bound {
    pub e_ped: BoundMlp,
    pub e_goal: BoundMlp,
    pub e_traj: BoundMlp,
    pub e_latent: BoundMlp,
    pub d_latent: BoundMlp,
}

impl Bound {
    pub fn leaves(&self) -> Vec<NodeId> {
        [&self.e_ped, &self.e_goal, &self.e_traj, &self.e_latent, &self.d_latent]
            .iter()
            .flat_map(|m| m.layers.iter().flat_map(|(w, b)| [*w, *b]))
            .collect()
    }
}

/// Batched network inputs.
pub(crate) struct BatchInput {
    pub batch: usize,
    /// `[M, 2*n_obs]`, neighbors of all samples stacked in canonical order.
    pub neighbors: Option<Tensor>,
    /// `[B, M]` with ones marking each sample's neighbors.
    pub membership: Option<Tensor>,
    pub goals: Tensor,
    pub futures: Option<Tensor>,
    pub theta0: Vec<f64>,
}

/// Neighbor histories sorted by their coordinates so that the summation order
/// does not depend on the order they were listed in.
pub fn canonical_neighbors(neighbors: &[Vec<Point>]) -> Vec<Vec<f64>> {
    let mut flat: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|n| n.iter().flat_map(|p| [p[0], p[1]]).collect())
        .collect();
    flat.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    flat
}

/// Planner input at inference time.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanInput {
    pub neighbors: Vec<Vec<Point>>,
    pub goal: Point,
    /// Current heading, used to score candidate trajectories.
    pub theta0: f64,
}

impl From<&SocialSample> for PlanInput {
    fn from(s: &SocialSample) -> Self {
        Self {
            neighbors: s.neighbors.clone(),
            goal: s.goal,
            theta0: s.theta0,
        }
    }
}

impl PlannerModel {
    pub fn new(config: PlannerConfig) -> Result<Self, PlannerError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            e_ped: Mlp::init(&config.e_ped, &mut rng),
            e_goal: Mlp::init(&config.e_goal, &mut rng),
            e_traj: Mlp::init(&config.e_traj, &mut rng),
            e_latent: Mlp::init(&config.e_latent, &mut rng),
            d_latent: Mlp::init(&config.d_latent, &mut rng),
            config,
            meta: TrainingMeta::default(),
        })
    }

    fn nets(&self) -> [(&'static str, &Mlp); 5] {
        [
            ("e_ped", &self.e_ped),
            ("e_goal", &self.e_goal),
            ("e_traj", &self.e_traj),
            ("e_latent", &self.e_latent),
            ("d_latent", &self.d_latent),
        ]
    }

    fn nets_mut(&mut self) -> [&mut Mlp; 5] {
        [
            &mut self.e_ped,
            &mut self.e_goal,
            &mut self.e_traj,
            &mut self.e_latent,
            &mut self.d_latent,
        ]
    }

    /// Named parameters in a fixed order (`e_ped.0.weight`, `e_ped.0.bias`, ...).
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (name, net) in self.nets() {
            for (i, (w, b)) in net.layers.iter().enumerate() {
                out.push((format!("{name}.{i}.weight"), w));
                out.push((format!("{name}.{i}.bias"), b));
            }
        }
        out
    }

    /// Mutable parameters in the order of [`named_params`](Self::named_params).
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for net in self.nets_mut() {
            for (w, b) in net.layers.iter_mut() {
                out.push(w);
                out.push(b);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named_params().iter().all(|(_, t)| t.is_finite())
    }

    /// Checks that weight shapes match the configuration.
    pub fn check_shapes(&self) -> Result<(), PlannerError> {
        let c = &self.config;
        for ((name, net), want) in self.nets().iter().zip([&c.e_ped, &c.e_goal, &c.e_traj, &c.e_latent, &c.d_latent]) {
            if &net.widths() != want {
                return Err(PlannerError::Dimension(format!(
                    "{name}: weights have widths {:?}, config says {want:?}",
                    net.widths()
                )));
            }
            for (w, b) in &net.layers {
                if b.shape() != [w.shape()[1]] {
                    return Err(PlannerError::Dimension(format!("{name}: bias shape {:?}", b.shape())));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        let mut bind = |m: &Mlp| BoundMlp {
            layers: m
                .layers
                .iter()
                .map(|(w, b)| {
                    if trainable {
                        (g.leaf(w.clone()), g.leaf(b.clone()))
                    } else {
                        (g.constant(w.clone()), g.constant(b.clone()))
                    }
                })
                .collect(),
        };
        Bound {
            e_ped: bind(&self.e_ped),
            e_goal: bind(&self.e_goal),
            e_traj: bind(&self.e_traj),
            e_latent: bind(&self.e_latent),
            d_latent: bind(&self.d_latent),
        }
    }

    fn check_neighbors(&self, neighbors: &[Vec<Point>]) -> Result<(), PlannerError> {
        if let Some(n) = neighbors.iter().find(|n| n.len() != self.config.n_obs) {
            return Err(PlannerError::Dimension(format!(
                "neighbor history has {} points, expected {}",
                n.len(),
                self.config.n_obs
            )));
        }
        Ok(())
    }

    pub(crate) fn batch_input(&self, inputs: &[PlanInput], futures: Option<&[&[Point]]>) -> Result<BatchInput, PlannerError> {
        let b = inputs.len();
        let width = 2 * self.config.n_obs;
        let mut rows = Vec::new();
        let mut owner = Vec::new();
        for (i, inp) in inputs.iter().enumerate() {
            self.check_neighbors(&inp.neighbors)?;
            for n in canonical_neighbors(&inp.neighbors) {
                rows.extend(n);
                owner.push(i);
            }
        }
        let m = owner.len();
        let (neighbors, membership) = if m == 0 {
            (None, None)
        } else {
            let mut mem = vec![0.0; b * m];
            for (j, i) in owner.iter().enumerate() {
                mem[i * m + j] = 1.0;
            }
            (Some(Tensor::new(vec![m, width], rows)?), Some(Tensor::new(vec![b, m], mem)?))
        };
        let goals = Tensor::new(vec![b, 2], inputs.iter().flat_map(|i| i.goal).collect())?;
        let futures = match futures {
            None => None,
            Some(f) => {
                if let Some(bad) = f.iter().find(|f| f.len() != self.config.n_pred) {
                    return Err(PlannerError::Dimension(format!(
                        "future has {} points, expected {}",
                        bad.len(),
                        self.config.n_pred
                    )));
                }
                Some(Tensor::new(
                    vec![b, 2 * self.config.n_pred],
                    f.iter().flat_map(|f| f.iter().flat_map(|p| [p[0], p[1]])).collect(),
                )?)
            }
        };
        Ok(BatchInput {
            batch: b,
            neighbors,
            membership,
            goals,
            futures,
            theta0: inputs.iter().map(|i| i.theta0).collect(),
        })
    }

    /// `[B, env_width]` environment feature: summed neighbor encodings next to the goal encoding.
    pub(crate) fn env_node(&self, g: &mut Graph, net: &Bound, x: &BatchInput) -> Result<NodeId, PlannerError> {
        let out_ped = *self.config.e_ped.last().unwrap();
        let agg = match (&x.neighbors, &x.membership) {
            (Some(n), Some(mem)) => {
                let n = g.constant(n.clone());
                let enc = net.e_ped.forward(g, n)?;
                let mem = g.constant(mem.clone());
                g.matmul(mem, enc)?
            }
            _ => g.constant(Tensor::zeros(&[x.batch, out_ped])),
        };
        let goals = g.constant(x.goals.clone());
        let ge = net.e_goal.forward(g, goals)?;
        Ok(g.concat(&[agg, ge], 1)?)
    }

    /// Decodes `[B, 2*n_pred]` from the environment feature and a latent code.
    pub(crate) fn decode_node(&self, g: &mut Graph, net: &Bound, env: NodeId, z: NodeId) -> Result<NodeId, PlannerError> {
        let inp = g.concat(&[env, z], 1)?;
        net.d_latent.forward(g, inp)
    }

    /// Environment feature of a single input.
    pub fn encode_env(&self, input: &PlanInput) -> Result<Vec<f64>, PlannerError> {
        let mut g = Graph::new();
        let net = self.bind(&mut g, false);
        let x = self.batch_input(std::slice::from_ref(input), None)?;
        let env = self.env_node(&mut g, &net, &x)?;
        Ok(g.value(env).values().to_vec())
    }

    /// Decoded trajectories for a batch of inputs, one latent row per input.
    pub fn decode_batch(&self, inputs: &[PlanInput], z: &[Vec<f64>]) -> Result<Vec<Vec<Point>>, PlannerError> {
        let ld = self.config.latent_dim;
        if z.len() != inputs.len() || z.iter().any(|r| r.len() != ld) {
            return Err(PlannerError::Dimension(format!("need {} latent rows of width {ld}", inputs.len())));
        }
        let mut g = Graph::new();
        let net = self.bind(&mut g, false);
        let x = self.batch_input(inputs, None)?;
        let env = self.env_node(&mut g, &net, &x)?;
        let zt = g.constant(Tensor::new(vec![inputs.len(), ld], z.concat())?);
        let out = self.decode_node(&mut g, &net, env, zt)?;
        let vals = g.value(out).values();
        let w = 2 * self.config.n_pred;
        Ok(vals
            .chunks_exact(w)
            .map(|row| row.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
            .collect())
    }
}
