use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::MetricsReport;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub stage: u32,
    pub start_checkpoint: String,
    pub dataset: String,
}

/// Sequential fine-tuning stages, serialized as a JSON list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrainingPlan {
    pub stages: Vec<Stage>,
}

impl TrainingPlan {
    pub const BASE_CHECKPOINT: &'static str = "base";

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&body)?)
    }
}

/// Stage 1 trains from the base model on the best-EM dataset; each later
/// stage continues from the previous stage's checkpoint with the next-best
/// dataset that beat the baseline. Equal EMs order by dataset name.
pub fn plan_continuous_finetune(
    individual_results: &BTreeMap<String, MetricsReport>,
    baseline: &MetricsReport,
) -> Result<TrainingPlan> {
    if individual_results.is_empty() {
        return Err(Error::Contract("no individual results to plan from".into()));
    }
    let mut ranked: Vec<(&str, f64)> = individual_results
        .iter()
        .map(|(name, r)| (name.as_str(), r.em))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut stages = vec![Stage {
        stage: 1,
        start_checkpoint: TrainingPlan::BASE_CHECKPOINT.to_string(),
        dataset: ranked[0].0.to_string(),
    }];
    for (name, em) in &ranked[1..] {
        if *em <= baseline.em {
            break;
        }
        let prev = stages.last().expect("stage 1 exists");
        stages.push(Stage {
            stage: prev.stage + 1,
            start_checkpoint: prev.dataset.clone(),
            dataset: name.to_string(),
        });
    }
    Ok(TrainingPlan { stages })
}
