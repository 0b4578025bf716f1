use serde::{Deserialize, Serialize};

use super::report::{ConvergenceReport, ErrorMetric};
use super::spec::{BookTemplate, Coefficient, FundamentalSpec, GridRule, MonteCarlo, StrategySpec};
use super::{ito_path, over_paths, KappaLadder, LadderGrids};
use crate::book::BookParams;
use crate::error::{invalid, Result};
use crate::paths::TimeGrid;
use crate::strategy::Strategy;
use crate::wealth::{ac_wealth, ow_wealth};

struct Cell {
    grid: TimeGrid,
    book: BookParams,
    strategy: Strategy,
}

/// Pathwise `sup_t |X^{OW} − X^{AC}|`, indexed `[κ][path]`.
fn sup_differences(
    book: &BookTemplate,
    fundamental: &FundamentalSpec,
    rule: &GridRule,
    ladder: &KappaLadder,
    mc: &MonteCarlo,
    strategy_for: impl Fn(TimeGrid, f64) -> Result<Strategy>,
) -> Result<(Vec<Cell>, Vec<Vec<f64>>)> {
    let grids = LadderGrids::new(rule, ladder.values())?;
    let cells = ladder
        .values()
        .iter()
        .zip(&grids.grids)
        .map(|(&kappa, &grid)| {
            let strategy = strategy_for(grid, kappa)?;
            if strategy.has_blocks() {
                return invalid("convergence experiments need a strategy without blocks");
            }
            Ok(Cell { grid, book: book.build(grid, kappa)?, strategy })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_path = over_paths(mc.paths, |p| {
        let fine = grids.increments(mc.seed, p);
        cells
            .iter()
            .map(|c| {
                let dw = grids.restrict(&fine, &c.grid)?;
                let s = ito_path(fundamental, &c.grid, &dw)?;
                let ow = ow_wealth(&c.book, &c.strategy, &s, 0.0)?;
                let ac = ac_wealth(&c.book, &c.strategy, &s, 0.0)?;
                ow.wealth.sup_abs_diff(&ac.wealth)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let by_kappa =
        (0..cells.len()).map(|k| per_path.iter().map(|row| row[k]).collect()).collect();
    Ok((cells, by_kappa))
}

/// `e(κ)` = mean over paths of `sup_t |X^{OW,κ}_t − X^{AC,κ}_t|` for a fixed
/// absolutely continuous strategy.
pub fn theorem1_experiment(
    book: &BookTemplate,
    strategy: &StrategySpec,
    fundamental: &FundamentalSpec,
    rule: &GridRule,
    ladder: &KappaLadder,
    mc: &MonteCarlo,
) -> Result<ConvergenceReport> {
    if strategy.has_blocks() {
        return invalid("the high-resilience comparison needs a strategy without blocks");
    }
    let (_, errors) =
        sup_differences(book, fundamental, rule, ladder, mc, |grid, _| strategy.build(grid))?;
    ConvergenceReport::from_path_errors(ladder.values(), &errors, ErrorMetric::MeanSup)
}

/// Same comparison with the rate `κ^{1/4} φ̇°(t)`.
pub fn remark1_experiment(
    book: &BookTemplate,
    base_rate: &Coefficient,
    fundamental: &FundamentalSpec,
    rule: &GridRule,
    ladder: &KappaLadder,
    mc: &MonteCarlo,
) -> Result<ConvergenceReport> {
    let (_, errors) = sup_differences(book, fundamental, rule, ladder, mc, |grid, kappa| {
        let scale = kappa.powf(0.25);
        Strategy::from_rate_fn(grid, 0.0, |t| scale * base_rate.eval(t))
    })?;
    ConvergenceReport::from_path_errors(ladder.values(), &errors, ErrorMetric::MeanSup)
}

/// Uniform bounds declared for the `L²` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformBounds {
    pub max_rate: f64,
    pub min_shape: f64,
    pub max_shape: f64,
    pub min_depth: f64,
    pub max_depth: f64,
    pub max_vol: f64,
}

impl UniformBounds {
    fn check(&self, cell: &Cell, fundamental: &FundamentalSpec) -> Result<()> {
        let sup_rate = cell.strategy.rates().iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        if sup_rate > self.max_rate {
            return invalid(format!(
                "strategy rate {sup_rate} exceeds the declared bound {}",
                self.max_rate
            ));
        }
        for side in [cell.book.ask(), cell.book.bid()] {
            if side.shape.min() < self.min_shape || side.shape.max() > self.max_shape {
                return invalid(format!(
                    "resilience shape outside the declared range [{}, {}]",
                    self.min_shape, self.max_shape
                ));
            }
            if side.depth.min() < self.min_depth || side.depth.max() > self.max_depth {
                return invalid(format!(
                    "depth outside the declared range [{}, {}]",
                    self.min_depth, self.max_depth
                ));
            }
        }
        let vol = fundamental.vol.sup_abs(&cell.grid);
        if vol > self.max_vol {
            return invalid(format!("volatility {vol} exceeds the declared bound {}", self.max_vol));
        }
        Ok(())
    }
}

/// `e(κ) = (E[sup_t |X^{OW,κ}_t − X^{AC,κ}_t|²])^{1/2}` under declared uniform bounds.
pub fn l2_convergence_experiment(
    book: &BookTemplate,
    strategy: &StrategySpec,
    fundamental: &FundamentalSpec,
    rule: &GridRule,
    ladder: &KappaLadder,
    mc: &MonteCarlo,
    bounds: &UniformBounds,
) -> Result<ConvergenceReport> {
    if strategy.has_blocks() {
        return invalid("the high-resilience comparison needs a strategy without blocks");
    }
    // bounds are checked before any path is simulated
    let grids = LadderGrids::new(rule, ladder.values())?;
    for (&kappa, &grid) in ladder.values().iter().zip(&grids.grids) {
        let cell = Cell { grid, book: book.build(grid, kappa)?, strategy: strategy.build(grid)? };
        bounds.check(&cell, fundamental)?;
    }
    let (_, errors) =
        sup_differences(book, fundamental, rule, ladder, mc, |grid, _| strategy.build(grid))?;
    ConvergenceReport::from_path_errors(ladder.values(), &errors, ErrorMetric::L2Sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::spec::{NamedFunction, SideTemplate, TradeSpec};

    fn book() -> BookTemplate {
        BookTemplate::symmetric(SideTemplate::constant(1.0, 1.0, 0.25, 0.01))
    }

    fn ladder() -> KappaLadder {
        KappaLadder::geometric(16.0, 2.0, 5).unwrap()
    }

    #[test]
    fn zero_strategy_has_zero_error() {
        let r = theorem1_experiment(
            &book(),
            &StrategySpec::Zero,
            &FundamentalSpec::default(),
            &GridRule::default(),
            &ladder(),
            &MonteCarlo::default(),
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| row.mean_err == 0.0));
        assert!(r.fit.is_none());
        assert_eq!(r.zero_error_kappas.len(), 5);
    }

    #[test]
    fn blocks_are_rejected() {
        let s = StrategySpec::Blocks { trades: vec![TradeSpec { time: 0.1, size: 1.0 }], last_time: 0.5 };
        assert!(theorem1_experiment(
            &book(),
            &s,
            &FundamentalSpec::default(),
            &GridRule::default(),
            &ladder(),
            &MonteCarlo::default()
        )
        .is_err());
    }

    #[test]
    fn l2_bounds_are_enforced() {
        let s = StrategySpec::Rate {
            rate: Coefficient::Function(NamedFunction::Sine {
                amplitude: 2.0,
                frequency: 1.0,
                phase: 0.0,
                offset: 0.0,
            }),
            initial_position: 0.0,
        };
        let bounds = UniformBounds {
            max_rate: 1.0,
            min_shape: 0.5,
            max_shape: 2.0,
            min_depth: 0.5,
            max_depth: 2.0,
            max_vol: 1.0,
        };
        let err = l2_convergence_experiment(
            &book(),
            &s,
            &FundamentalSpec::default(),
            &GridRule::default(),
            &ladder(),
            &MonteCarlo::default(),
            &bounds,
        )
        .unwrap_err();
        assert!(err.to_string().contains("declared bound"));
    }
}
