use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crowdsets::{leave_one_out, load_dir, synth, ExtractConfig, Scene, Split};
use crate::lip_mpc::{LipParams, MpcConfig};
use crate::planner::{PlannerConfig, PredictMode};
use crate::stl::SafetyParams;

use super::HarnessError;

/// Where samples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Directory of recordings; the synthetic corpus when absent.
    pub dir: Option<PathBuf>,
    pub synth_seed: u64,
    pub holdout: String,
    /// Neighbor radius, meters.
    pub radius: f64,
    /// Random training subset size; 0 keeps every sample.
    pub max_train: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            dir: None,
            synth_seed: 0,
            holdout: "ZARA1".into(),
            radius: 4.0,
            max_train: 0,
        }
    }
}

/// Planner hyperparameters plus an optional checkpoint. `safety` is taken
/// from the top-level section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ModelSection {
    pub checkpoint: Option<PathBuf>,
    #[serde(flatten)]
    pub planner: PlannerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MpcSection {
    #[serde(flatten)]
    pub solver: MpcConfig,
    #[serde(flatten)]
    pub lip: LipParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Scene to replay; the holdout scene when absent.
    pub scene: Option<String>,
    /// Pedestrians to substitute; chosen automatically when empty.
    pub ego_ids: Vec<i64>,
    /// Number of automatically chosen pedestrians.
    pub rollouts: usize,
    pub goal_radius: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `mean`, `sample:K:SEED` or `best_of:K:SEED`.
    pub predict: String,
    pub force_zero_controls: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            scene: None,
            ego_ids: Vec::new(),
            rollouts: 10,
            goal_radius: 0.5,
            max_steps: 100,
            seed: 0,
            out_dir: PathBuf::from("runs"),
            predict: "mean".into(),
            force_zero_controls: false,
        }
    }
}

/// Everything a command needs, read from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub safety: SafetyParams,
    pub mpc: MpcSection,
    pub run: RunSection,
}

/// Sets `a.b.c = value` in a TOML table. The value is parsed as TOML and
/// falls back to a bare string.
fn set_path(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), HarnessError> {
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Usage(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let next = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match next {
            toml::Value::Table(t) => t,
            _ => return Err(HarnessError::Usage(format!("override '{key}': '{p}' is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, then applies `key=value` overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Usage(format!("config: {e}")))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| HarnessError::Usage(format!("override '{o}' is not key=value")))?;
            set_path(&mut table, k.trim(), v.trim())?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (or defaults when `None`) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| HarnessError::Data(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let usage = |m: String| Err(HarnessError::Usage(m));
        if !(self.run.goal_radius > 0.0) || self.run.max_steps == 0 {
            return usage("run.goal_radius and run.max_steps must be positive".into());
        }
        if !(self.dataset.radius > 0.0) {
            return usage("dataset.radius must be positive".into());
        }
        if (self.mpc.lip.step_time - self.model.planner.dt).abs() > 1e-12 {
            return usage(format!(
                "mpc.step_time {} differs from model.dt {}",
                self.mpc.lip.step_time, self.model.planner.dt
            ));
        }
        self.planner_config()
            .validate()
            .map_err(|e| HarnessError::Usage(format!("model: {e}")))?;
        self.mpc.solver.validate()?;
        self.mpc.lip.validate()?;
        self.predict_mode()?;
        if let Some(d) = &self.dataset.dir {
            if !d.is_dir() {
                return Err(HarnessError::Data(format!("dataset directory {} does not exist", d.display())));
            }
        }
        if let Some(c) = &self.model.checkpoint {
            if !c.is_file() {
                return Err(HarnessError::Data(format!("checkpoint {} does not exist", c.display())));
            }
        }
        Ok(())
    }

    /// Model hyperparameters with the top-level safety section.
    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            safety: self.safety.clone(),
            ..self.model.planner.clone()
        }
    }

    pub fn extract_config(&self) -> ExtractConfig {
        ExtractConfig {
            n_obs: self.model.planner.n_obs,
            n_pred: self.model.planner.n_pred,
            radius: self.dataset.radius,
        }
    }

    pub fn predict_mode(&self) -> Result<PredictMode, HarnessError> {
        Ok(self.run.predict.parse()?)
    }

    pub fn scenes(&self) -> Result<Vec<Scene>, HarnessError> {
        match &self.dataset.dir {
            Some(d) => Ok(load_dir(d)?),
            None => Ok(synth::corpus(self.dataset.synth_seed)),
        }
    }

    pub fn scene(&self, scenes: &[Scene]) -> Result<Scene, HarnessError> {
        let name = self.run.scene.as_deref().unwrap_or(&self.dataset.holdout);
        scenes
            .iter()
            .find(|s| s.name == name)
            .cloned()
            .ok_or_else(|| HarnessError::Data(format!("unknown scene '{name}'")))
    }

    /// Leave-one-out split, with the training side subsampled to `max_train`.
    pub fn split(&self, scenes: &[Scene]) -> Result<Split, HarnessError> {
        let mut split = leave_one_out(scenes, &self.dataset.holdout, &self.extract_config())?;
        if self.dataset.max_train > 0 && split.train.len() > self.dataset.max_train {
            split.train.shuffle(&mut ChaCha8Rng::seed_from_u64(self.run.seed));
            split.train.truncate(self.dataset.max_train);
        }
        Ok(split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.run.goal_radius, 0.5);
        assert_eq!(c.run.max_steps, 100);
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[model]\nlr = 0.01\nepochs = 3\n[safety]\nalpha1 = 0.0\nalpha2 = 0.0\n[mpc]\nhorizon = 3\nheight = 1.0\n";
        let over = vec!["run.predict=best_of:4:7".to_string(), "dataset.holdout=ETH".into(), "model.epochs=5".into()];
        let c = RunConfig::from_toml(text, &over).unwrap();
        assert_eq!(c.model.planner.lr, 0.01);
        assert_eq!(c.model.planner.epochs, 5);
        assert_eq!(c.mpc.solver.horizon, 3);
        assert_eq!(c.mpc.lip.height, 1.0);
        assert_eq!(c.dataset.holdout, "ETH");
        assert_eq!(c.planner_config().variant(), "no-STL");
        assert_eq!(c.predict_mode().unwrap(), PredictMode::BestOf { k: 4, seed: 7 });
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.run.ego_ids = vec![3, 5];
        c.model.planner.epochs = 7;
        assert_eq!(RunConfig::from_toml(&c.to_toml(), &[]).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in ["run.goal_radius=0", "run.max_steps=0", "safety.tau=-1", "run.predict=best_of:0", "mpc.gamma=2"] {
            assert!(matches!(
                RunConfig::from_toml("", &[bad.to_string()]),
                Err(HarnessError::Usage(_))
            ), "{bad}");
        }
        assert!(matches!(RunConfig::from_toml("[run]\nbogus = 1\n", &[]), Err(HarnessError::Usage(_))));
        assert!(matches!(
            RunConfig::from_toml("", &["dataset.dir=\"/nonexistent/x\"".into()]),
            Err(HarnessError::Data(_))
        ));
    }
}
