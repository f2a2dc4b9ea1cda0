use serde::{Deserialize, Serialize};

use crate::crowdsets::SocialSample;
use crate::stl::{safety_robustness, SafetyParams, Semantics};
use crate::trajectory::{ade_fde, Trajectory};

use super::model::PlanInput;
use super::{PlannerError, PlannerModel};

/// Distribution statistics of one metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction of strictly positive values.
    pub positive_rate: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(xs: &[f64]) -> Summary {
    if xs.is_empty() {
        return Summary::default();
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    Summary {
        count: s.len(),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        median: quantile(&s, 0.5),
        q1: quantile(&s, 0.25),
        q3: quantile(&s, 0.75),
        min: s[0],
        max: s[s.len() - 1],
        positive_rate: s.iter().filter(|v| **v > 0.0).count() as f64 / s.len() as f64,
    }
}

/// Accuracy and exact safety metrics of one prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    pub ade: f64,
    pub fde: f64,
    pub heading_violation: f64,
    pub velocity_violation: f64,
}

impl SampleMetrics {
    /// Scores a predicted ego-frame trajectory against the ground truth.
    pub fn score(sample: &SocialSample, pred: &Trajectory, safety: &SafetyParams) -> Result<Self, PlannerError> {
        if pred.len() != sample.ego_future.len() {
            return Err(PlannerError::Dimension(format!(
                "prediction has {} points, ground truth {}",
                pred.len(),
                sample.ego_future.len()
            )));
        }
        let (ade, fde) = ade_fde(&pred.points, &sample.ego_future);
        let r = safety_robustness(&pred.prefixed([0.0, 0.0]), sample.theta0, safety, Semantics::Hard)?;
        Ok(Self {
            id: sample.id(),
            ade,
            fde,
            heading_violation: r.heading_violation(),
            velocity_violation: r.velocity_violation(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub per_sample: Vec<SampleMetrics>,
    pub ade: Summary,
    pub fde: Summary,
    pub heading_violation: Summary,
    pub velocity_violation: Summary,
}

impl EvalReport {
    pub fn from_metrics(variant: &str, per_sample: Vec<SampleMetrics>) -> Self {
        let col = |f: fn(&SampleMetrics) -> f64| summarize(&per_sample.iter().map(f).collect::<Vec<_>>());
        Self {
            variant: variant.to_string(),
            ade: col(|m| m.ade),
            fde: col(|m| m.fde),
            heading_violation: col(|m| m.heading_violation),
            velocity_violation: col(|m| m.velocity_violation),
            per_sample,
        }
    }
}

/// Mean-mode predictions on `samples`, scored against the ground truth.
pub fn evaluate(model: &PlannerModel, samples: &[SocialSample], safety: &SafetyParams) -> Result<EvalReport, PlannerError> {
    if samples.is_empty() {
        return Err(PlannerError::Usage("empty evaluation set".into()));
    }
    let inputs: Vec<PlanInput> = samples.iter().map(PlanInput::from).collect();
    let preds = model.predict_mean_batch(&inputs)?;
    let metrics = samples
        .iter()
        .zip(&preds)
        .map(|(s, p)| SampleMetrics::score(s, p, safety))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_metrics(model.config.variant(), metrics))
}
