//! High-resilience limit experiments.
//!
//! Every experiment runs a ladder of resilience scales `κ` under common
//! random numbers: path `p` draws its Brownian increments from stream `p` on
//! the finest grid of the ladder, and coarser grids sum them. Paths are
//! evaluated in parallel and reduced in path order, so results do not depend
//! on scheduling.

mod convergence;
mod lemma;
mod report;
mod spec;
mod tracker;
mod utility;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::paths::{
    brownian_increments, coarsen_increments, euler_from_increments, RandomSource, SampledPath,
    TimeGrid,
};

pub use convergence::{
    l2_convergence_experiment, remark1_experiment, theorem1_experiment, UniformBounds,
};
pub use lemma::{lemma_closed_form_limit, lemma_jump_experiment, LemmaReport, LemmaRow};
pub use report::{fit_rate, percentile, ConvergenceReport, ConvergenceRow, ErrorMetric, RateFit};
pub use spec::{
    BookTemplate, Coefficient, FundamentalSpec, GridRule, MonteCarlo, NamedFunction,
    SideTemplate, StrategySpec, TradeSpec,
};
pub use tracker::{tracker_bound_experiment, TrackerBoundReport, TrackerBoundRow, TrackerBoundSpec};
pub use utility::{certainty_equivalent, utility_experiment, UtilityConfig, UtilityReport, UtilityRow};

/// Strictly increasing list of resilience scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaLadder(Vec<f64>);

impl KappaLadder {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("kappa ladder is empty");
        }
        if let Some(k) = values.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return invalid(format!("kappa ladder values must be > 0, got {k}"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("kappa ladder must be strictly increasing");
        }
        Ok(Self(values))
    }

    /// `κ_j = start · ratio^j`, `j = 0..count`.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 1.0) {
            return invalid("geometric kappa ladder needs ratio > 1");
        }
        Self::new((0..count).map(|j| start * ratio.powi(j as i32)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.0.last().expect("ladder is non-empty")
    }
}

/// Grids of a ladder plus the finest one, which carries the random numbers.
pub(crate) struct LadderGrids {
    pub grids: Vec<TimeGrid>,
    pub finest: TimeGrid,
}

impl LadderGrids {
    pub fn new(rule: &GridRule, kappas: &[f64]) -> Result<Self> {
        rule.validate()?;
        let grids = kappas.iter().map(|&k| rule.grid_for(k)).collect::<Result<Vec<_>>>()?;
        let finest = *grids.iter().max_by_key(|g| g.steps()).expect("non-empty ladder");
        Ok(Self { grids, finest })
    }

    /// Increments of path `p` on the finest grid.
    pub fn increments(&self, seed: u64, path: usize) -> Vec<f64> {
        brownian_increments(&self.finest, &RandomSource::new(seed, path as u64))
    }

    pub fn restrict(&self, fine: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
        let factor = grid.nesting_ratio(&self.finest).ok_or_else(|| {
            Error::InvalidArgument("ladder grids are not nested in the finest grid".into())
        })?;
        if factor == 1 {
            Ok(fine.to_vec())
        } else {
            coarsen_increments(fine, factor)
        }
    }
}

/// Itô path `dS = μ(t) dt + σ(t) dW` from given increments.
pub(crate) fn ito_path(
    spec: &FundamentalSpec,
    grid: &TimeGrid,
    increments: &[f64],
) -> Result<SampledPath> {
    euler_from_increments(grid, |t, _| spec.drift.eval(t), |t, _| spec.vol.eval(t), spec.s0, increments)
}

/// Runs `f` on every path in parallel and returns the results in path order.
pub(crate) fn over_paths<T: Send>(
    paths: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if paths == 0 {
        return invalid("Monte-Carlo path count must be >= 1");
    }
    (0..paths).into_par_iter().map(f).collect()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n − 1` denominator); zero for one sample.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_invariants() {
        assert!(KappaLadder::new(vec![16.0, 32.0, 32.0]).is_err());
        assert!(KappaLadder::new(vec![16.0, 8.0]).is_err());
        assert!(KappaLadder::new(vec![0.0, 8.0]).is_err());
        assert!(KappaLadder::new(vec![]).is_err());
        let l = KappaLadder::geometric(16.0, 2.0, 9).unwrap();
        assert_eq!(l.values().first(), Some(&16.0));
        assert_eq!(l.max(), 4096.0);
    }

    #[test]
    fn ladder_grids_share_noise() {
        let rule = GridRule { horizon: 1.0, base_steps: 8, kappa_scaling: 4.0 };
        let lg = LadderGrids::new(&rule, &[1.0, 16.0, 64.0]).unwrap();
        assert_eq!(lg.finest.steps(), 32);
        let fine = lg.increments(7, 3);
        let coarse = lg.restrict(&fine, &lg.grids[0]).unwrap();
        assert_eq!(coarse.len(), 8);
        let total: f64 = fine.iter().sum();
        assert!((coarse.iter().sum::<f64>() - total).abs() < 1e-12);
    }

    #[test]
    fn sample_moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(std_dev(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(std_dev(&[5.0]), 0.0);
    }
}
