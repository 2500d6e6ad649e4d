//! Experiment configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::connections::{ConnectionSettings, LaunchPlan};
use crate::dynamics::{StepControl, StopRule};
use crate::expr::Expr;
use crate::problem::{ProblemSpec, ProblemSpecDoc};
use crate::verify::VerifySettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootingScan {
    pub u_lefts: Vec<f64>,
    #[serde(default)]
    pub slope_left: f64,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
}

fn default_u_max() -> f64 {
    1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaSettings {
    pub constant_roots: bool,
    /// Newton starting guesses, as expressions in `x`.
    pub newton_guesses: Vec<String>,
    pub newton_max_iter: usize,
    pub shooting: Option<ShootingScan>,
    /// `(lower, upper)` for the boundedness flags.
    pub thresholds: (f64, f64),
    /// Entries closer than this in sup norm are merged.
    pub dedup_tol: f64,
}

impl Default for EquilibriaSettings {
    fn default() -> Self {
        EquilibriaSettings {
            constant_roots: true,
            newton_guesses: Vec::new(),
            newton_max_iter: 50,
            shooting: None,
            thresholds: (-1e3, 1e3),
            dedup_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectSection {
    pub settings: ConnectionSettings,
    pub plan: Vec<LaunchPlan>,
}

fn default_initial_condition() -> String {
    "0".into()
}

fn default_t_max() -> f64 {
    50.0
}

fn default_stride() -> usize {
    64
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: ProblemSpecDoc,
    #[serde(default)]
    pub control: StepControl,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default = "default_initial_condition")]
    pub initial_condition: String,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub equilibria: EquilibriaSettings,
    #[serde(default)]
    pub connect: ConnectSection,
    #[serde(default)]
    pub verify: VerifySettings,
}

/// A configuration whose parts have all been validated.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub spec: ProblemSpec,
    pub initial_condition: Expr,
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Loaded> {
        let config: RunConfig = serde_json::from_str(text).context("invalid configuration")?;
        config.validate()
    }

    pub fn load(path: &Path) -> anyhow::Result<Loaded> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(self) -> anyhow::Result<Loaded> {
        let spec = ProblemSpec::from_doc(&self.spec)?;
        self.control.validate()?;
        self.connect.settings.control.validate().context("connect.settings.control")?;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            bail!("t_max must be positive and finite, got {}", self.t_max);
        }
        if !(self.stop.tol_eq > 0.0) {
            bail!("stop.tol_eq must be positive");
        }
        if self.snapshot_stride == 0 {
            bail!("snapshot_stride must be at least 1");
        }
        let (lo, hi) = self.equilibria.thresholds;
        if !(lo < hi) {
            bail!("equilibria.thresholds must satisfy lower < upper");
        }
        let initial_condition = Expr::parse(&self.initial_condition).context("initial_condition")?;
        for (i, g) in self.equilibria.newton_guesses.iter().enumerate() {
            Expr::parse(g).with_context(|| format!("equilibria.newton_guesses[{i}]"))?;
        }
        for (i, p) in self.connect.plan.iter().enumerate() {
            if let LaunchPlan::Free { initial_condition, .. } = p {
                Expr::parse(initial_condition).with_context(|| format!("connect.plan[{i}].initial_condition"))?;
            }
        }
        Ok(Loaded { config: self, spec, initial_condition })
    }
}
