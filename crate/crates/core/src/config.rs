//! Run configuration: one TOML file per run.
//!
//! ```toml
//! experiment = "theorem1"   # simulate | theorem1 | remark1 | lemma-jump | tracker-bound | utility | l2
//!
//! [grid]
//! horizon = 1.0
//! base_steps = 512          # N₀
//! kappa_scaling = 0.0       # c in N(κ) ≥ c·κ^{1/2}
//!
//! [ladder]
//! start = 16.0
//! ratio = 2.0
//! count = 9                 # or: values = [16.0, 64.0, 256.0]
//!
//! [monte_carlo]
//! paths = 1
//! seed = 42
//!
//! [book.ask]
//! shape = 1.0
//! depth = 1.0
//! permanent = 0.25
//! base_spread = 0.01
//!
//! [fundamental]
//! s0 = 100.0
//! drift = 0.0
//! vol = 0.0
//!
//! [strategy]
//! kind = "rate"
//! rate = { fn = "sine", amplitude = 1.0, frequency = 1.0 }
//! ```
//!
//! Coefficients are numbers or `{ fn = "linear" | "sine" | "cosine", ... }`
//! tables. Experiment-specific sections are `[simulate]`, `[lemma]`,
//! `[tracker]`, `[utility]` and `[bounds]`; gate thresholds can be overridden
//! in `[gates]`. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lab::{
    BookTemplate, FundamentalSpec, GridRule, KappaLadder, MonteCarlo, StrategySpec,
    TrackerBoundSpec, UniformBounds, UtilityConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Theorem1,
    Remark1,
    LemmaJump,
    TrackerBound,
    Utility,
    L2,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Theorem1 => "theorem1",
            ExperimentKind::Remark1 => "remark1",
            ExperimentKind::LemmaJump => "lemma-jump",
            ExperimentKind::TrackerBound => "tracker-bound",
            ExperimentKind::Utility => "utility",
            ExperimentKind::L2 => "l2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LadderSpec {
    Explicit(ExplicitLadder),
    Geometric(GeometricLadder),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitLadder {
    pub values: Vec<f64>,
}

/// `start · ratio^j`, `j = 0..count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricLadder {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec::Geometric(GeometricLadder { start: 16.0, ratio: 2.0, count: 9 })
    }
}

impl LadderSpec {
    pub fn build(&self) -> Result<KappaLadder> {
        match self {
            LadderSpec::Explicit(l) => KappaLadder::new(l.values.clone()),
            LadderSpec::Geometric(l) => KappaLadder::geometric(l.start, l.ratio, l.count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_simulate_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub initial_wealth: f64,
}

fn default_simulate_kappa() -> f64 {
    256.0
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { kappa: default_simulate_kappa(), initial_wealth: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    /// Smoothing window `w` in `w · κ^{-1/4}`.
    #[serde(default = "default_width")]
    pub width: f64,
    /// Limit of `D(κ)`; the closed form is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_limit: Option<f64>,
}

fn default_width() -> f64 {
    1.0
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self { width: default_width(), expected_limit: None }
    }
}

/// Gate thresholds; unset values take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_positive_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<f64>,
}

/// Work budget for the dry run, in simulated grid steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default = "default_max_steps")]
    pub max_steps: f64,
}

fn default_max_steps() -> f64 {
    2e9
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_steps: default_max_steps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridRule,
    #[serde(default)]
    pub ladder: LadderSpec,
    #[serde(default)]
    pub monte_carlo: MonteCarlo,
    #[serde(default)]
    pub book: BookTemplate,
    #[serde(default)]
    pub fundamental: FundamentalSpec,
    #[serde(default)]
    pub strategy: StrategySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker: Option<TrackerBoundSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<UniformBounds>,
    #[serde(default)]
    pub gates: GateConfig,
    #[serde(default)]
    pub budget: Budget,
}

fn validation(e: Error) -> Error {
    match e {
        Error::InvalidArgument(msg) | Error::NumericFailure { detail: msg, .. } => {
            Error::Validation(msg)
        }
        other => other,
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 of the canonical TOML form, excluding the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        Ok(hex::encode(Sha256::digest(canonical.to_toml()?.as_bytes())))
    }

    pub fn ladder(&self) -> Result<KappaLadder> {
        self.ladder.build().map_err(validation)
    }

    /// Kappa values the run actually simulates.
    pub fn kappas(&self) -> Result<Vec<f64>> {
        Ok(match self.experiment {
            ExperimentKind::Simulate => vec![self.simulate.clone().unwrap_or_default().kappa],
            ExperimentKind::Utility => {
                let mut k = self.ladder()?.values().to_vec();
                if let Some(u) = &self.utility {
                    k.push(u.kappa);
                }
                k
            }
            _ => self.ladder()?.values().to_vec(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate().map_err(validation)?;
        let ladder = self.ladder()?;
        if self.monte_carlo.paths == 0 {
            return Err(Error::Validation("monte_carlo.paths must be >= 1".into()));
        }
        let base = self.grid.grid_for(ladder.values()[0]).map_err(validation)?;
        for kappa in self.kappas()? {
            if !(kappa.is_finite() && kappa > 0.0) {
                return Err(Error::Validation(format!("kappa must be > 0, got {kappa}")));
            }
            self.book.build(self.grid.grid_for(kappa).map_err(validation)?, kappa).map_err(validation)?;
        }
        self.strategy.build(base).map_err(validation)?;
        let need = |present: bool, section: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "experiment {} needs a [{section}] section",
                    self.experiment.name()
                )))
            }
        };
        match self.experiment {
            ExperimentKind::Simulate => {
                let s = self.simulate.clone().unwrap_or_default();
                if !(s.kappa.is_finite() && s.kappa > 0.0) {
                    return Err(Error::Validation("simulate.kappa must be > 0".into()));
                }
            }
            ExperimentKind::Theorem1 | ExperimentKind::L2 => {
                if self.strategy.has_blocks() {
                    return Err(Error::Validation(
                        "convergence experiments need a strategy without blocks".into(),
                    ));
                }
                if self.experiment == ExperimentKind::L2 {
                    need(self.bounds.is_some(), "bounds")?;
                }
            }
            ExperimentKind::Remark1 => {
                if !matches!(self.strategy, StrategySpec::Rate { .. }) {
                    return Err(Error::Validation(
                        "remark1 needs strategy.kind = \"rate\" (the base rate)".into(),
                    ));
                }
            }
            ExperimentKind::LemmaJump => {
                if !self.strategy.has_blocks() {
                    return Err(Error::Validation(
                        "lemma-jump needs a nonzero block strategy (strategy.kind = \"blocks\")".into(),
                    ));
                }
                let width = self.lemma.clone().unwrap_or_default().width;
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::Validation("lemma.width must be > 0".into()));
                }
            }
            ExperimentKind::TrackerBound => need(self.tracker.is_some(), "tracker")?,
            ExperimentKind::Utility => {
                need(self.utility.is_some(), "utility")?;
                let u = self.utility.as_ref().expect("checked");
                if !(u.gamma.is_finite() && u.gamma > 0.0) {
                    return Err(Error::Validation("utility.gamma must be > 0".into()));
                }
                if !u.multipliers.contains(&1.0) {
                    return Err(Error::Validation("utility.multipliers must include 1".into()));
                }
            }
        }
        Ok(())
    }
}
