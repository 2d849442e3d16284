use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioPlan;
use crate::error::{Error, Result};
use crate::qoe::BitrateLadder;
use crate::rl::{TrainConfig, TrainData};
use crate::simulator::SimConfig;
use crate::traces::ThroughputTrace;

/// A training run: configuration plus the trace sets it draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub ladder: BitrateLadder,
    pub traces: Vec<ScenarioPlan>,
    #[serde(default)]
    pub mix: Vec<ScenarioPlan>,
    pub validation: Vec<ScenarioPlan>,
}

impl TrainPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.sim.validate()?;
        if self.traces.is_empty() {
            return Err(Error::NoData("training trace set is empty".into()));
        }
        if self.validation.is_empty() {
            return Err(Error::NoData("validation trace set is empty".into()));
        }
        let names = |v: &[ScenarioPlan]| v.iter().map(|s| s.name.clone()).collect::<Vec<_>>();
        let train = names(&self.traces);
        if let Some(n) = names(&self.validation).iter().find(|n| train.contains(n)) {
            return Err(Error::Config(format!("trace `{n}` is in both training and validation sets")));
        }
        Ok(())
    }

    /// Loads every trace set; windows without a start are drawn from the
    /// training seed.
    pub fn data(&self, base_dir: &Path) -> Result<TrainData> {
        let load = |set: &[ScenarioPlan], offset: u64| -> Result<Vec<ThroughputTrace>> {
            set.iter()
                .enumerate()
                .map(|(i, s)| s.load(base_dir, self.train.seed, offset + i as u64).map(|(t, _)| t))
                .collect()
        };
        Ok(TrainData {
            train: load(&self.traces, 0)?,
            mix: load(&self.mix, 1 << 32)?,
            validation: load(&self.validation, 2 << 32)?,
        })
    }
}
