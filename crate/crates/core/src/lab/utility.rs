use rand::Rng;
use serde::{Deserialize, Serialize};

use super::report::percentile_sorted;
use super::spec::{BookTemplate, FundamentalSpec, GridRule, MonteCarlo};
use super::{ito_path, mean, over_paths, KappaLadder, LadderGrids};
use crate::error::{invalid, Result};
use crate::paths::{RandomSource, SampledPath};
use crate::strategy::{exponential_tracker, optimal_speed, TrackerSpec};
use crate::wealth::ow_wealth;

/// Stream reserved for bootstrap resampling; path streams count up from 0.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Exponential-utility comparison of tracker speeds `c · κ^{1/2} M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityConfig {
    /// Absolute risk aversion `γ` of `U(x) = −exp(−γ x)`.
    pub gamma: f64,
    #[serde(default = "default_multipliers")]
    pub multipliers: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Position held at `t = 0`; the tracker relaxes from here to the target.
    #[serde(default)]
    pub initial_position: f64,
    #[serde(default)]
    pub initial_wealth: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_multipliers() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_kappa() -> f64 {
    256.0
}

fn default_resamples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityRow {
    pub kappa: f64,
    pub multiplier: f64,
    /// Initial tracking speed `c · κ^{1/2} M_0`.
    pub speed: f64,
    pub mean_wealth: f64,
    pub ce: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    pub gamma: f64,
    pub target_position: f64,
    /// `x₀ + μ² T / (2 γ σ²)`, the certainty equivalent without frictions
    /// when starting at the target.
    pub frictionless_ce: f64,
    pub paths: usize,
    pub resamples: usize,
    pub rows: Vec<UtilityRow>,
}

impl UtilityReport {
    pub fn row(&self, kappa: f64, multiplier: f64) -> Option<&UtilityRow> {
        self.rows.iter().find(|r| r.kappa == kappa && r.multiplier == multiplier)
    }

    /// CSV with columns `kappa,multiplier,speed,mean_wealth,ce,ci_low,ci_high`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kappa,multiplier,speed,mean_wealth,ce,ci_low,ci_high")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.kappa, r.multiplier, r.speed, r.mean_wealth, r.ce, r.ci_low, r.ci_high
            )?;
        }
        Ok(())
    }
}

/// `−(1/γ) log E[exp(−γ X)]`, evaluated with a log-sum-exp shift.
pub fn certainty_equivalent(gamma: f64, wealth: impl Iterator<Item = f64> + Clone) -> f64 {
    let ymax = wealth.clone().map(|x| -gamma * x).fold(f64::NEG_INFINITY, f64::max);
    let (sum, n) = wealth.fold((0.0, 0usize), |(s, n), x| (s + (-gamma * x - ymax).exp(), n + 1));
    -(ymax + (sum / n as f64).ln()) / gamma
}

pub fn utility_experiment(
    config: &UtilityConfig,
    book: &BookTemplate,
    fundamental: &FundamentalSpec,
    rule: &GridRule,
    ladder: &KappaLadder,
    mc: &MonteCarlo,
) -> Result<UtilityReport> {
    let gamma = config.gamma;
    if !(gamma.is_finite() && gamma > 0.0) {
        return invalid("risk aversion gamma must be > 0");
    }
    if config.multipliers.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return invalid("speed multipliers must be > 0");
    }
    if !config.multipliers.contains(&1.0) {
        return invalid("speed multipliers must include 1 (the candidate tracker)");
    }
    let (Some(mu), Some(sigma)) = (fundamental.drift.as_constant(), fundamental.vol.as_constant())
    else {
        return invalid("utility experiment needs constant drift and volatility");
    };
    if !(sigma > 0.0) {
        return invalid("utility experiment needs volatility > 0 (zero volatility gives zero tracking speed)");
    }

    let mut cells: Vec<(f64, f64)> = config.multipliers.iter().map(|&c| (config.kappa, c)).collect();
    cells.extend(ladder.values().iter().map(|&k| (k, 1.0)));
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cells.dedup();
    let kappas: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let grids = LadderGrids::new(rule, &kappas)?;

    let target = mu / (gamma * sigma * sigma);
    let mut prepared = Vec::with_capacity(cells.len());
    for (&(kappa, c), &grid) in cells.iter().zip(&grids.grids) {
        let params = book.build(grid, kappa)?;
        for side in [params.ask(), params.bid()] {
            if side.permanent.max() != 0.0 || side.permanent.min() != 0.0 {
                return invalid("utility experiment assumes no permanent impact (alpha = 0)");
            }
            if side.base_spread.max() != 0.0 {
                return invalid("utility experiment assumes zero base spreads");
            }
        }
        let vol = SampledPath::constant(grid, sigma)?;
        let tolerance = SampledPath::constant(grid, 1.0 / gamma)?;
        let m = optimal_speed(&params, &vol, &tolerance)?;
        let speed = m.map(|v| c * v)?;
        let strategy = exponential_tracker(&TrackerSpec {
            target: SampledPath::constant(grid, target)?,
            speed: speed.clone(),
            kappa,
            initial: Some(config.initial_position),
        })?;
        prepared.push((grid, params, strategy, kappa.sqrt() * speed.first()));
    }

    let wealth = over_paths(mc.paths, |p| {
        let fine = grids.increments(mc.seed, p);
        prepared
            .iter()
            .map(|(grid, params, strategy, _)| {
                let s = ito_path(fundamental, grid, &grids.restrict(&fine, grid)?)?;
                Ok(ow_wealth(params, strategy, &s, config.initial_wealth)?.terminal())
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let n = wealth.len();
    let mut rng = RandomSource::new(mc.seed, BOOTSTRAP_STREAM).rng();
    let resamples: Vec<Vec<usize>> = (0..config.bootstrap_resamples)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect();

    let rows = cells
        .iter()
        .zip(&prepared)
        .enumerate()
        .map(|(k, (&(kappa, multiplier), prep))| {
            let xs: Vec<f64> = wealth.iter().map(|row| row[k]).collect();
            let ce = certainty_equivalent(gamma, xs.iter().copied());
            let mut boot: Vec<f64> = resamples
                .iter()
                .map(|idx| certainty_equivalent(gamma, idx.iter().map(|&i| xs[i])))
                .collect();
            boot.sort_by(f64::total_cmp);
            let (ci_low, ci_high) = if boot.is_empty() {
                (ce, ce)
            } else {
                (percentile_sorted(&boot, 0.025), percentile_sorted(&boot, 0.975))
            };
            UtilityRow {
                kappa,
                multiplier,
                speed: prep.3,
                mean_wealth: mean(&xs),
                ce,
                ci_low,
                ci_high,
                half_width: 0.5 * (ci_high - ci_low),
            }
        })
        .collect();

    Ok(UtilityReport {
        gamma,
        target_position: target,
        frictionless_ce: config.initial_wealth
            + mu * mu * rule.horizon / (2.0 * gamma * sigma * sigma),
        paths: n,
        resamples: config.bootstrap_resamples,
        rows,
    })
}
