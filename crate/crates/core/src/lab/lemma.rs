use serde::Serialize;

use super::report::percentile;
use super::spec::{BookTemplate, FundamentalSpec, GridRule, MonteCarlo, StrategySpec};
use super::{ito_path, mean, over_paths, std_dev, KappaLadder, LadderGrids};
use crate::book::BookParams;
use crate::error::{invalid, Result};
use crate::strategy::{smooth_blocks, Strategy};
use crate::wealth::ow_wealth;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRow {
    pub kappa: f64,
    pub mean_diff: f64,
    pub std_diff: f64,
    pub min_diff: f64,
    pub p05_diff: f64,
    pub positive_fraction: f64,
}

/// Terminal payoff differences `D(κ) = X_T(smoothed) − X_T(blocks)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub width: f64,
    pub paths: usize,
    pub rows: Vec<LemmaRow>,
    /// `Σ_n (1 − α_n) θ_n² / (2 h_n)` with coefficients of the traded side
    /// at each block time.
    pub closed_form_limit: f64,
}

impl LemmaReport {
    /// CSV with columns `kappa,mean_diff,std_diff,min_diff,p05_diff,positive_fraction`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kappa,mean_diff,std_diff,min_diff,p05_diff,positive_fraction")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.kappa, r.mean_diff, r.std_diff, r.min_diff, r.p05_diff, r.positive_fraction
            )?;
        }
        Ok(())
    }
}

/// Limit of `D(κ)` for a block strategy when the book does not vary over the
/// smoothing windows: each block saves its block cost and earns half of its
/// own permanent shift when spread over time.
pub fn lemma_closed_form_limit(book: &BookParams, strategy: &Strategy) -> Result<f64> {
    book.require_grid(strategy.grid(), "strategy")?;
    Ok(strategy
        .blocks()
        .iter()
        .map(|b| {
            let side = if b.size > 0.0 { book.ask() } else { book.bid() };
            let alpha = side.permanent.at(b.index);
            let h = side.depth.at(b.index);
            (1.0 - alpha) * b.size * b.size / (2.0 * h)
        })
        .sum())
}

pub fn lemma_jump_experiment(
    blocks: &StrategySpec,
    width: f64,
    book: &BookTemplate,
    fundamental: &FundamentalSpec,
    rule: &GridRule,
    ladder: &KappaLadder,
    mc: &MonteCarlo,
) -> Result<LemmaReport> {
    if !blocks.has_blocks() {
        return invalid("block-dominance experiment needs a nonzero block strategy");
    }
    let grids = LadderGrids::new(rule, ladder.values())?;
    let cells = ladder
        .values()
        .iter()
        .zip(&grids.grids)
        .map(|(&kappa, &grid)| {
            let jump = blocks.build(grid)?;
            let smooth = smooth_blocks(&jump, kappa, width)?;
            Ok((grid, book.build(grid, kappa)?, jump, smooth))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_path = over_paths(mc.paths, |p| {
        let fine = grids.increments(mc.seed, p);
        cells
            .iter()
            .map(|(grid, book, jump, smooth)| {
                let s = ito_path(fundamental, grid, &grids.restrict(&fine, grid)?)?;
                let x_jump = ow_wealth(book, jump, &s, 0.0)?.terminal();
                let x_smooth = ow_wealth(book, smooth, &s, 0.0)?.terminal();
                Ok(x_smooth - x_jump)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let rows = ladder
        .values()
        .iter()
        .enumerate()
        .map(|(k, &kappa)| {
            let d: Vec<f64> = per_path.iter().map(|row| row[k]).collect();
            LemmaRow {
                kappa,
                mean_diff: mean(&d),
                std_diff: std_dev(&d),
                min_diff: d.iter().copied().fold(f64::INFINITY, f64::min),
                p05_diff: percentile(&d, 0.05),
                positive_fraction: d.iter().filter(|&&x| x > 0.0).count() as f64 / d.len() as f64,
            }
        })
        .collect();

    let (_, book_max, jump_max, _) = cells.last().expect("non-empty ladder");
    Ok(LemmaReport {
        width,
        paths: mc.paths,
        rows,
        closed_form_limit: lemma_closed_form_limit(book_max, jump_max)?,
    })
}
