use serde::{Deserialize, Serialize};

use crate::stl::SafetyParams;

use super::PlannerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Stochastic gradient descent with momentum.
    #[default]
    Sgd,
    Adam,
}

/// Network widths and training hyperparameters.
///
/// Each width list includes the input and output sizes, e.g. `[16, 64, 32, 16]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub n_obs: usize,
    pub n_pred: usize,
    pub latent_dim: usize,
    pub e_ped: Vec<usize>,
    pub e_goal: Vec<usize>,
    pub e_traj: Vec<usize>,
    pub e_latent: Vec<usize>,
    pub d_latent: Vec<usize>,
    pub safety: SafetyParams,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    /// Timestep of predicted trajectories, seconds.
    pub dt: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_obs: 8,
            n_pred: 8,
            latent_dim: 8,
            e_ped: vec![16, 64, 32, 16],
            e_goal: vec![2, 32, 16],
            e_traj: vec![16, 64, 32, 16],
            e_latent: vec![48, 64, 16],
            d_latent: vec![40, 128, 64, 16],
            safety: SafetyParams::default(),
            optimizer: OptimizerKind::Sgd,
            lr: 1e-3,
            momentum: 0.9,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            clip_norm: 0.0,
            dt: crate::trajectory::DEFAULT_DT,
        }
    }
}

impl PlannerConfig {
    /// Width of the environment feature.
    pub fn env_width(&self) -> usize {
        self.e_ped.last().copied().unwrap_or(0) + self.e_goal.last().copied().unwrap_or(0)
    }

    /// A small configuration with every hidden width equal to `w`.
    pub fn tiny(w: usize, n_obs: usize, n_pred: usize, latent_dim: usize) -> Self {
        let env = 2 * w;
        Self {
            n_obs,
            n_pred,
            latent_dim,
            e_ped: vec![2 * n_obs, w, w],
            e_goal: vec![2, w, w],
            e_traj: vec![2 * n_pred, w, w],
            e_latent: vec![env + w, w, 2 * latent_dim],
            d_latent: vec![env + latent_dim, w, 2 * n_pred],
            ..Self::default()
        }
    }

    /// `"STL"` when either loss weight is positive, otherwise `"no-STL"`.
    pub fn variant(&self) -> &'static str {
        if self.safety.stl_disabled() {
            "no-STL"
        } else {
            "STL"
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let dim = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(PlannerError::Dimension(format!("{what}: width {got}, expected {want}")))
            }
        };
        for (name, w) in [
            ("e_ped", &self.e_ped),
            ("e_goal", &self.e_goal),
            ("e_traj", &self.e_traj),
            ("e_latent", &self.e_latent),
            ("d_latent", &self.d_latent),
        ] {
            if w.len() < 2 || w.contains(&0) {
                return Err(PlannerError::Dimension(format!("{name} needs at least input and output widths")));
            }
        }
        if self.n_obs == 0 || self.n_pred == 0 || self.latent_dim == 0 {
            return Err(PlannerError::Usage("n_obs, n_pred and latent_dim must be positive".into()));
        }
        dim("e_ped input", self.e_ped[0], 2 * self.n_obs)?;
        dim("e_goal input", self.e_goal[0], 2)?;
        dim("e_traj input", self.e_traj[0], 2 * self.n_pred)?;
        dim("e_latent input", self.e_latent[0], self.env_width() + self.e_traj[self.e_traj.len() - 1])?;
        dim("e_latent output", self.e_latent[self.e_latent.len() - 1], 2 * self.latent_dim)?;
        dim("d_latent input", self.d_latent[0], self.env_width() + self.latent_dim)?;
        dim("d_latent output", self.d_latent[self.d_latent.len() - 1], 2 * self.n_pred)?;
        if !(self.lr > 0.0) || self.batch_size == 0 || !(0.0..1.0).contains(&self.momentum) || self.clip_norm < 0.0 {
            return Err(PlannerError::Usage("lr > 0, batch_size >= 1, momentum in [0, 1), clip_norm >= 0".into()));
        }
        self.safety.validate()?;
        Ok(())
    }
}
