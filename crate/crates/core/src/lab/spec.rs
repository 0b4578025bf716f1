//! Declarative inputs shared by the experiments and the run configuration.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::book::{BookParams, SideParams};
use crate::error::{invalid, Result};
use crate::paths::{SampledPath, TimeGrid};
use crate::strategy::{block_schedule, Strategy};

/// A deterministic function of time: a constant or a named function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Function(NamedFunction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "lowercase", deny_unknown_fields)]
pub enum NamedFunction {
    /// `intercept + slope · t`
    Linear {
        #[serde(default)]
        intercept: f64,
        #[serde(default)]
        slope: f64,
    },
    /// `offset + amplitude · sin(2π · frequency · t + phase)`
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude · cos(2π · frequency · t + phase)`
    Cosine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant(0.0)
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

impl Coefficient {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Function(f) => match *f {
                NamedFunction::Linear { intercept, slope } => intercept + slope * t,
                NamedFunction::Sine { amplitude, frequency, phase, offset } => {
                    offset + amplitude * (TAU * frequency * t + phase).sin()
                }
                NamedFunction::Cosine { amplitude, frequency, phase, offset } => {
                    offset + amplitude * (TAU * frequency * t + phase).cos()
                }
            },
        }
    }

    pub fn sample(&self, grid: TimeGrid) -> Result<SampledPath> {
        SampledPath::from_fn(grid, |t| self.eval(t))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::Function(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// Largest `|value|` on the grid points.
    pub fn sup_abs(&self, grid: &TimeGrid) -> f64 {
        grid.times().map(|t| self.eval(t).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideTemplate {
    #[serde(default = "unit_coefficient")]
    pub shape: Coefficient,
    #[serde(default = "unit_coefficient")]
    pub depth: Coefficient,
    #[serde(default)]
    pub permanent: Coefficient,
    #[serde(default)]
    pub base_spread: Coefficient,
}

fn unit_coefficient() -> Coefficient {
    Coefficient::Constant(1.0)
}

impl Default for SideTemplate {
    fn default() -> Self {
        Self {
            shape: unit_coefficient(),
            depth: unit_coefficient(),
            permanent: Coefficient::default(),
            base_spread: Coefficient::default(),
        }
    }
}

impl SideTemplate {
    pub fn constant(shape: f64, depth: f64, permanent: f64, base_spread: f64) -> Self {
        Self {
            shape: shape.into(),
            depth: depth.into(),
            permanent: permanent.into(),
            base_spread: base_spread.into(),
        }
    }

    fn sample(&self, grid: TimeGrid) -> Result<SideParams> {
        Ok(SideParams {
            shape: self.shape.sample(grid)?,
            depth: self.depth.sample(grid)?,
            permanent: self.permanent.sample(grid)?,
            base_spread: self.base_spread.sample(grid)?,
        })
    }
}

/// Book coefficients as functions of time, independent of the grid and `κ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BookTemplate {
    #[serde(default)]
    pub ask: SideTemplate,
    #[serde(default)]
    pub bid: SideTemplate,
}

impl BookTemplate {
    pub fn symmetric(side: SideTemplate) -> Self {
        Self { ask: side.clone(), bid: side }
    }

    pub fn build(&self, grid: TimeGrid, kappa: f64) -> Result<BookParams> {
        BookParams::new(kappa, self.ask.sample(grid)?, self.bid.sample(grid)?)
    }
}

/// Fundamental price `dS = μ(t) dt + σ(t) dW`, `S_0 = s0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundamentalSpec {
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(default)]
    pub drift: Coefficient,
    #[serde(default)]
    pub vol: Coefficient,
}

fn default_s0() -> f64 {
    100.0
}

impl Default for FundamentalSpec {
    fn default() -> Self {
        Self { s0: default_s0(), drift: Coefficient::default(), vol: Coefficient::default() }
    }
}

impl FundamentalSpec {
    pub fn is_deterministic(&self) -> bool {
        self.vol.is_zero()
    }
}

/// Grid per ladder value: `N(κ)` is the smallest `N₀·2^m` with
/// `N(κ) ≥ max(N₀, ⌈c·κ^{1/2}⌉)`. All grids of a ladder are therefore nested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRule {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_base_steps")]
    pub base_steps: usize,
    #[serde(default)]
    pub kappa_scaling: f64,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_base_steps() -> usize {
    512
}

impl Default for GridRule {
    fn default() -> Self {
        Self { horizon: default_horizon(), base_steps: default_base_steps(), kappa_scaling: 0.0 }
    }
}

impl GridRule {
    pub fn steps_for(&self, kappa: f64) -> usize {
        let need = (self.kappa_scaling * kappa.sqrt()).ceil();
        let mut n = self.base_steps.max(1);
        while (n as f64) < need {
            n *= 2;
        }
        n
    }

    pub fn grid_for(&self, kappa: f64) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps_for(kappa))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return invalid("grid horizon must be > 0");
        }
        if self.base_steps == 0 {
            return invalid("grid base_steps must be >= 1");
        }
        if !(self.kappa_scaling.is_finite() && self.kappa_scaling >= 0.0) {
            return invalid("grid kappa_scaling must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_paths() -> usize {
    1
}

fn default_seed() -> u64 {
    42
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self { paths: default_paths(), seed: default_seed() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeSpec {
    pub time: f64,
    pub size: f64,
}

/// Strategy families that can be instantiated on any grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrategySpec {
    Zero,
    /// Turnover rate `φ̇(t)`, sampled at step midpoints.
    Rate {
        rate: Coefficient,
        #[serde(default)]
        initial_position: f64,
    },
    /// Block trades at times `≤ last_time < T`.
    Blocks { trades: Vec<TradeSpec>, last_time: f64 },
}

impl Default for StrategySpec {
    fn default() -> Self {
        StrategySpec::Zero
    }
}

impl StrategySpec {
    pub fn build(&self, grid: TimeGrid) -> Result<Strategy> {
        match self {
            StrategySpec::Zero => Ok(Strategy::zero(grid)),
            StrategySpec::Rate { rate, initial_position } => {
                Strategy::from_rate_fn(grid, *initial_position, |t| rate.eval(t))
            }
            StrategySpec::Blocks { trades, last_time } => {
                let pairs: Vec<(f64, f64)> = trades.iter().map(|b| (b.time, b.size)).collect();
                block_schedule(grid, &pairs, *last_time)
            }
        }
    }

    pub fn has_blocks(&self) -> bool {
        matches!(self, StrategySpec::Blocks { trades, .. } if !trades.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rule_is_dyadic_and_monotone() {
        let rule = GridRule { horizon: 1.0, base_steps: 512, kappa_scaling: 16.0 };
        assert_eq!(rule.steps_for(16.0), 512);
        assert_eq!(rule.steps_for(1024.0), 512);
        assert_eq!(rule.steps_for(4096.0), 1024);
        assert_eq!(rule.steps_for(4097.0), 2048);
        let flat = GridRule::default();
        assert_eq!(flat.steps_for(1e8), 512);
    }

    #[test]
    fn named_functions() {
        let s = Coefficient::Function(NamedFunction::Sine {
            amplitude: 2.0,
            frequency: 1.0,
            phase: 0.0,
            offset: 1.0,
        });
        assert!((s.eval(0.25) - 3.0).abs() < 1e-15);
        let l = Coefficient::Function(NamedFunction::Linear { intercept: 1.0, slope: -2.0 });
        assert_eq!(l.eval(0.5), 0.0);
        assert!(Coefficient::Constant(0.0).is_zero());
    }
}
