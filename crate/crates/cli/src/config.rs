//! Run configuration: a single JSON document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_STEP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Local,
    Nonlocal,
    Analytic,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Local => "local",
            Solver::Nonlocal => "nonlocal",
            Solver::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SemiMarkov,
    XstateDephasing,
    PureDecoherence,
    TanDephasing,
    Dilation,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::SemiMarkov => "semi_markov",
            ScenarioKind::XstateDephasing => "xstate_dephasing",
            ScenarioKind::PureDecoherence => "pure_decoherence",
            ScenarioKind::TanDephasing => "tan_dephasing",
            ScenarioKind::Dilation => "dilation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Coherences,
    Populations,
    Concurrence,
    CpWitness,
    TpWitness,
    /// `(t, s, t0)` triple for the divisibility test.
    CompositionDefect { t: f64, s: f64, t0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    /// Scenario-specific; see [`crate::scenario`].
    #[serde(default)]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    /// Output spacing, also the Volterra step.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<Tolerance>,
    pub solvers: Vec<Solver>,
    #[serde(default)]
    pub observables: Vec<Observable>,
    /// Complex matrix as rows of `[re, im]`; defaults per scenario.
    #[serde(default)]
    pub initial_state: Option<Vec<Vec<[f64; 2]>>>,
    /// Shift used for the homogeneity defect of each solver.
    #[serde(default)]
    pub homogeneity_shift: Option<f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(CliError::validation)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn step(&self) -> f64 {
        self.step.unwrap_or(DEFAULT_STEP)
    }

    /// Checks that do not need the scenario built; dimension-dependent
    /// checks happen in [`crate::run`].
    pub fn validate(&self) -> CliResult<()> {
        if !(self.t0.is_finite() && self.t1.is_finite()) || !(self.t1 > self.t0) {
            return Err(CliError::Validation(format!("need t1 > t0, got t0 = {}, t1 = {}", self.t0, self.t1)));
        }
        let h = self.step();
        if !(h > 0.0) || !h.is_finite() || h > self.t1 - self.t0 {
            return Err(CliError::Validation(format!("step {h} must be positive and at most t1 - t0")));
        }
        if self.solvers.is_empty() {
            return Err(CliError::Validation("at least one solver must be selected".into()));
        }
        if let Some(tol) = self.tolerance {
            if !(tol.rtol > 0.0 && tol.atol > 0.0) {
                return Err(CliError::Validation("tolerances must be positive".into()));
            }
        }
        if let Some(shift) = self.homogeneity_shift {
            if !(shift >= 0.0) || !shift.is_finite() {
                return Err(CliError::Validation(format!("homogeneity shift {shift} must be nonnegative")));
            }
        }
        let span = self.t1 - self.t0;
        for obs in &self.observables {
            if let Observable::CompositionDefect { t, s, t0 } = *obs {
                if !(t0 >= self.t0 && t >= s && s >= t0 && t > t0 && t - t0 <= span + 1e-12) {
                    return Err(CliError::Validation(format!(
                        "composition triple (t, s, t0) = ({t}, {s}, {t0}) needs t0 <= s <= t, t > t0, \
                         t0 >= {} and t - t0 <= {span}",
                        self.t0
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dedup_solvers(&self) -> Vec<Solver> {
        let mut s = self.solvers.clone();
        s.sort();
        s.dedup();
        s
    }
}

/// Cartesian parameter grid over a base run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    /// Keys are `t0`, `t1`, `step`, or a dotted path into `parameters`.
    pub grid: BTreeMap<String, Vec<serde_json::Value>>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let config: SweepConfig = serde_json::from_str(&text).map_err(CliError::validation)?;
        if config.grid.is_empty() || config.grid.values().any(Vec::is_empty) {
            return Err(CliError::Validation("sweep grid needs at least one key with values".into()));
        }
        Ok(config)
    }

    /// All points in row-major order over the sorted keys.
    pub fn points(&self) -> Vec<Vec<(String, serde_json::Value)>> {
        let mut points = vec![Vec::new()];
        for (key, values) in &self.grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn instantiate(&self, point: &[(String, serde_json::Value)]) -> CliResult<RunConfig> {
        let mut doc = serde_json::to_value(&self.base).map_err(CliError::validation)?;
        for (key, value) in point {
            let target = if matches!(key.as_str(), "t0" | "t1" | "step") {
                doc.get_mut(key.as_str())
            } else {
                let params = doc
                    .get_mut("parameters")
                    .expect("serialized config has parameters");
                if params.is_null() {
                    *params = serde_json::Value::Object(Default::default());
                }
                let mut cursor = params;
                let parts: Vec<&str> = key.split('.').collect();
                for part in &parts[..parts.len() - 1] {
                    let obj = cursor
                        .as_object_mut()
                        .ok_or_else(|| CliError::Validation(format!("sweep key {key}: {part} is not an object")))?;
                    cursor = obj.entry(part.to_string()).or_insert_with(|| serde_json::json!({}));
                }
                let obj = cursor
                    .as_object_mut()
                    .ok_or_else(|| CliError::Validation(format!("sweep key {key} does not name an object field")))?;
                Some(obj.entry(parts[parts.len() - 1].to_string()).or_insert(serde_json::Value::Null))
            };
            match target {
                Some(slot) => *slot = value.clone(),
                None => return Err(CliError::Validation(format!("unknown sweep key {key}"))),
            }
        }
        let config: RunConfig = serde_json::from_value(doc).map_err(CliError::validation)?;
        config.validate()?;
        Ok(config)
    }
}
