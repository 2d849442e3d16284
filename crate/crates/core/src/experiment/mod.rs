//! Experiment plans, the scenario × algorithm evaluation matrix, result
//! tables and normalisation against a reference algorithm.

mod eval;
mod report;
mod train_plan;

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use eval::{evaluate, write_evaluation, CellStatus, Evaluation, ResolvedScenario, ResultRow};
pub use train_plan::TrainPlan;
pub use report::{aggregates, normalize_rows, read_results_csv, report, results_csv, Aggregates, BaselineGap, Report};

use crate::abr::PolicyKind;
use crate::error::{Error, Result};
use crate::qoe::{BitrateLadder, MetricId};
use crate::scenarios::Scenario;
use crate::simulator::SimConfig;
use crate::traces::{parse_csv, synthesize, SyntheticSpec, ThroughputTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// Window start; drawn from the plan seed when absent.
    #[serde(default)]
    pub start_s: Option<f64>,
    pub duration_s: f64,
}

/// One scenario; exactly one of `trace`, `synthetic` or `preset` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPlan {
    pub name: String,
    /// Canonical CSV trace, relative to the plan file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Scenario>,
    /// Seed for `preset`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmPlan {
    pub name: String,
    pub policy: PolicyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioPlan>,
    pub algorithms: Vec<AlgorithmPlan>,
    pub metrics: Vec<MetricId>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub ladder: BitrateLadder,
    /// Algorithm every score is normalised against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    /// Learned baseline the reference is compared with in the aggregates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

/// Names end up in file names and CSV cells.
fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl ExperimentPlan {
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
        let bad = |m: String| Err(Error::Config(format!("plan: {m}")));
        if self.scenarios.is_empty() || self.algorithms.is_empty() || self.metrics.is_empty() {
            return bad("needs at least one scenario, algorithm and metric".into());
        }
        self.sim.validate()?;
        let mut seen = HashSet::new();
        for s in &self.scenarios {
            if !valid_name(&s.name) || !seen.insert(&s.name) {
                return bad(format!("scenario name `{}` is invalid or repeated", s.name));
            }
            let sources = s.trace.is_some() as u8 + s.synthetic.is_some() as u8 + s.preset.is_some() as u8;
            if sources != 1 {
                return bad(format!("scenario `{}` needs exactly one of trace, synthetic, preset", s.name));
            }
            if let Some(w) = &s.window {
                if !(w.duration_s > 0.0) || w.start_s.is_some_and(|t| !(t >= 0.0)) {
                    return bad(format!("scenario `{}` has an invalid window", s.name));
                }
            }
        }
        let mut seen = HashSet::new();
        for a in &self.algorithms {
            if !valid_name(&a.name) || !seen.insert(&a.name) {
                return bad(format!("algorithm name `{}` is invalid or repeated", a.name));
            }
        }
        let mut seen = HashSet::new();
        if !self.metrics.iter().all(|m| seen.insert(m)) {
            return bad("metrics repeated".into());
        }
        for r in [&self.reference, &self.baseline].into_iter().flatten() {
            if !self.algorithms.iter().any(|a| &a.name == r) {
                return bad(format!("`{r}` is not one of the algorithms"));
            }
        }
        Ok(())
    }

    /// Loads scenario `index`; see [`ScenarioPlan::load`].
    pub fn scenario_trace(&self, index: usize, base_dir: &Path) -> Result<(ThroughputTrace, Option<Window>)> {
        self.scenarios[index].load(base_dir, self.seed, index as u64)
    }
}

impl ScenarioPlan {
    /// A preset scenario with no window.
    pub fn preset(name: impl Into<String>, scenario: Scenario, seed: u64) -> Self {
        Self {
            name: name.into(),
            trace: None,
            synthetic: None,
            preset: Some(scenario),
            seed,
            window: None,
        }
    }

    /// Loads or synthesises the trace and cuts its window. A window
    /// without a start draws one from `(window_seed, stream)`; the resolved
    /// window is returned so it can be recorded.
    pub fn load(&self, base_dir: &Path, window_seed: u64, stream: u64) -> Result<(ThroughputTrace, Option<Window>)> {
        let full = if let Some(path) = &self.trace {
            let path = base_dir.join(path);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            parse_csv(&text).map_err(|e| in_file(&path, e))?
        } else if let Some(spec) = &self.synthetic {
            synthesize(spec)?
        } else if let Some(preset) = self.preset {
            preset.synthesize(self.seed)?
        } else {
            return Err(Error::Config(format!("scenario `{}` has no trace source", self.name)));
        };
        let full = full.with_name(self.name.clone());
        let Some(w) = self.window else {
            return Ok((full, None));
        };
        let start_s = match w.start_s {
            Some(t) => t,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(window_seed);
                rng.set_stream(stream);
                let room = (full.duration_s() - w.duration_s).max(0.0);
                // whole milliseconds so the recorded value reproduces the cut
                (rng.random::<f64>() * room * 1000.0).floor() / 1000.0
            }
        };
        let resolved = Window {
            start_s: Some(start_s),
            duration_s: w.duration_s,
        };
        let cut = full.slice_window(start_s, w.duration_s)?.with_name(self.name.clone());
        Ok((cut, Some(resolved)))
    }
}

/// Prefixes parse errors with the file they came from.
pub fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::MalformedTrace { line, reason } => Error::MalformedTrace {
            line,
            reason: format!("{reason} (in {})", path.display()),
        },
        e => e,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_json() -> &'static str {
        r#"{
            "scenarios": [{"name": "flat", "preset": "concert", "seed": 3, "window": {"duration_s": 600}}],
            "algorithms": [{"name": "bb", "policy": {"kind": "bb"}}, {"name": "mpc", "policy": {"kind": "mpc"}}],
            "metrics": ["hd"],
            "reference": "mpc",
            "seed": 9
        }"#
    }

    #[test]
    fn parses_and_windows_deterministically() {
        let p = ExperimentPlan::from_json(plan_json()).unwrap();
        let (a, wa) = p.scenario_trace(0, Path::new(".")).unwrap();
        let (b, wb) = p.scenario_trace(0, Path::new(".")).unwrap();
        assert_eq!(a, b);
        assert_eq!(wa, wb);
        assert_eq!(a.duration_s(), 600.0);
        assert!(wa.unwrap().start_s.unwrap() <= 1200.0);
    }

    #[test]
    fn rejects_duplicates_and_unknown_reference() {
        let mut p = ExperimentPlan::from_json(plan_json()).unwrap();
        p.algorithms[1].name = "bb".into();
        assert!(p.validate().is_err());
        let mut p = ExperimentPlan::from_json(plan_json()).unwrap();
        p.reference = Some("rl".into());
        assert!(p.validate().is_err());
        let mut p = ExperimentPlan::from_json(plan_json()).unwrap();
        p.scenarios[0].trace = Some("x.csv".into());
        assert!(p.validate().is_err());
        let mut p = ExperimentPlan::from_json(plan_json()).unwrap();
        p.metrics.clear();
        assert!(p.validate().is_err());
    }
}
