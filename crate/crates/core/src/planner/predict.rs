use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stl::{safety_robustness, Semantics};
use crate::trajectory::{distance, Trajectory};

use super::model::PlanInput;
use super::train::draw_noise;
use super::{PlannerError, PlannerModel};

/// How the latent code is chosen at inference time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PredictMode {
    /// `z = 0`.
    Mean,
    /// `k` draws from the standard normal prior.
    Sample { k: usize, seed: u64 },
    /// The draw with the largest exact safety robustness among `k`.
    BestOf { k: usize, seed: u64 },
}

impl Default for PredictMode {
    fn default() -> Self {
        PredictMode::Mean
    }
}

impl std::str::FromStr for PredictMode {
    type Err = PlannerError;

    /// `mean`, `sample:K:SEED` or `best_of:K:SEED`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<u64, PlannerError> {
            parts
                .get(i)
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| PlannerError::Usage(format!("bad predict mode '{s}'")))
        };
        match parts[0] {
            "mean" if parts.len() == 1 => Ok(PredictMode::Mean),
            "sample" if parts.len() == 3 => Ok(PredictMode::Sample {
                k: num(1)? as usize,
                seed: num(2)?,
            }),
            "best_of" if parts.len() == 3 => Ok(PredictMode::BestOf {
                k: num(1)? as usize,
                seed: num(2)?,
            }),
            _ => Err(PlannerError::Usage(format!("bad predict mode '{s}'"))),
        }
    }
}

impl PlannerModel {
    /// Every trajectory produced by `mode` (one for `Mean` and `BestOf`).
    pub fn predict_all(&self, input: &PlanInput, mode: PredictMode) -> Result<Vec<Trajectory>, PlannerError> {
        let ld = self.config.latent_dim;
        let draws = |k: usize, seed: u64| -> Result<Vec<Trajectory>, PlannerError> {
            if k < 1 {
                return Err(PlannerError::Usage("k must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z: Vec<Vec<f64>> = (0..k).map(|_| draw_noise(&mut rng, 1, ld)).collect();
            let inputs = vec![input.clone(); k];
            Ok(self
                .decode_batch(&inputs, &z)?
                .into_iter()
                .map(|p| Trajectory::new(p, self.config.dt))
                .collect())
        };
        match mode {
            PredictMode::Mean => {
                let p = self.decode_batch(std::slice::from_ref(input), &[vec![0.0; ld]])?;
                Ok(vec![Trajectory::new(p.into_iter().next().unwrap(), self.config.dt)])
            }
            PredictMode::Sample { k, seed } => draws(k, seed),
            PredictMode::BestOf { k, seed } => {
                let cands = draws(k, seed)?;
                let mut best: Option<(f64, f64, Trajectory)> = None;
                for t in cands {
                    let rho = safety_robustness(&t.prefixed([0.0, 0.0]), input.theta0, &self.config.safety, Semantics::Hard)?
                        .min();
                    let miss = distance(*t.points.last().unwrap(), input.goal);
                    let better = match &best {
                        None => true,
                        Some((br, bm, _)) => rho > *br || (rho == *br && miss < *bm),
                    };
                    if better {
                        best = Some((rho, miss, t));
                    }
                }
                Ok(vec![best.expect("k >= 1").2])
            }
        }
    }

    /// The first trajectory of [`predict_all`](Self::predict_all).
    pub fn predict(&self, input: &PlanInput, mode: PredictMode) -> Result<Trajectory, PlannerError> {
        Ok(self.predict_all(input, mode)?.swap_remove(0))
    }

    /// Mean-mode predictions for many inputs at once.
    pub fn predict_mean_batch(&self, inputs: &[PlanInput]) -> Result<Vec<Trajectory>, PlannerError> {
        let ld = self.config.latent_dim;
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(256) {
            let z = vec![vec![0.0; ld]; chunk.len()];
            out.extend(
                self.decode_batch(chunk, &z)?
                    .into_iter()
                    .map(|p| Trajectory::new(p, self.config.dt)),
            );
        }
        Ok(out)
    }
}
