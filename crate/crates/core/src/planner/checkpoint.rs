//! Versioned JSON checkpoints.
//!
//! ```json
//! { "format": "socialnav-checkpoint", "version": 1,
//!   "config": { ... },
//!   "params": [ { "name": "e_ped.0.weight", "shape": [16, 64], "values": [...] }, ... ],
//!   "meta": { "epochs": 50, "steps": 1600, "final_loss": { ... } },
//!   "optimizer": null }
//! ```
//!
//! Floats are written with round-trip precision, so loading reproduces
//! every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffmath::Tensor;

use super::model::TrainingMeta;
use super::train::OptimizerState;
use super::{PlannerConfig, PlannerError, PlannerModel};

pub const CHECKPOINT_FORMAT: &str = "socialnav-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: PlannerConfig,
    params: Vec<NamedTensor>,
    meta: TrainingMeta,
    #[serde(default)]
    optimizer: Option<OptimizerState>,
}

pub fn to_json(model: &PlannerModel, optimizer: Option<&OptimizerState>) -> Result<String, PlannerError> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        params: model
            .named_params()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                shape: t.shape().to_vec(),
                values: t.values().to_vec(),
            })
            .collect(),
        meta: model.meta.clone(),
        optimizer: optimizer.cloned(),
    };
    serde_json::to_string(&ck).map_err(|e| PlannerError::Load(e.to_string()))
}

pub fn from_json(text: &str) -> Result<(PlannerModel, Option<OptimizerState>), PlannerError> {
    let env: Envelope = serde_json::from_str::<serde_json::Value>(text)
        .and_then(serde_json::from_value)
        .map_err(|e| PlannerError::Load(format!("corrupt checkpoint: {e}")))?;
    if env.format != CHECKPOINT_FORMAT {
        return Err(PlannerError::Load(format!("not a checkpoint (format '{}')", env.format)));
    }
    if env.version != CHECKPOINT_VERSION {
        return Err(PlannerError::Version {
            found: env.version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let ck: Checkpoint = serde_json::from_str(text).map_err(|e| PlannerError::Load(format!("corrupt checkpoint: {e}")))?;
    let mut model = PlannerModel::new(ck.config)?;
    {
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != ck.params.len() {
            return Err(PlannerError::Load(format!(
                "expected {} parameter tensors, found {}",
                names.len(),
                ck.params.len()
            )));
        }
        for ((slot, name), nt) in model.params_mut().into_iter().zip(&names).zip(ck.params) {
            if &nt.name != name || nt.shape != slot.shape() {
                return Err(PlannerError::Load(format!(
                    "parameter '{}' {:?} does not match '{name}' {:?}",
                    nt.name,
                    nt.shape,
                    slot.shape()
                )));
            }
            *slot = Tensor::new(nt.shape, nt.values)?;
        }
    }
    if !model.all_finite() {
        return Err(PlannerError::Load("non-finite parameters".into()));
    }
    model.meta = ck.meta;
    Ok((model, ck.optimizer))
}

pub fn save_model(model: &PlannerModel, path: &Path) -> Result<(), PlannerError> {
    let text = to_json(model, None)?;
    fs::write(path, text).map_err(|e| PlannerError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<PlannerModel, PlannerError> {
    let text = fs::read_to_string(path).map_err(|e| PlannerError::Io(format!("{}: {e}", path.display())))?;
    Ok(from_json(&text)?.0)
}
