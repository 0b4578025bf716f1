//! Wealth processes: the marked-to-market order-book (Obizhaeva/Wang) wealth, its safe
//! account, and the reduced-form (Almgren/Chriss) wealth.
//!
//! Event order on the grid:
//!
//! 1. At `t_i`, a block trades at the pre-jump reference price and pre-jump
//!    spread; the book and reference price then jump.
//! 2. Over `[t_i, t_{i+1})` the fundamental increment is earned on the
//!    position held at `t_i` (left-point sum). The step's constant-rate flow
//!    then trades. It pays the base spread plus the exact time average of the
//!    evolving excess spread, and moves the reference price linearly by its
//!    permanent impact.
//!
//! Under this order `X = φ⁰ + φ S^φ` holds exactly at every grid point. The
//! permanent-impact part of `∫ φ_{t−} dS^φ` is integrated exactly within each
//! step. It is reported separately as `permanent_shift`.
//!
//! Quadratic variation of the position comes only from blocks, so the block
//! penalty `(1/2 − α)/h · θ²` never applies to rate trading.

use std::io::Write;

use crate::book::{BookParams, ExcessState};
use crate::error::{invalid, Result};
use crate::paths::SampledPath;
use crate::strategy::Strategy;

/// Wealth trajectory with cumulative cost components.
///
/// `wealth = x₀ + gain − spread_cost − impact_cost − block_cost` pointwise.
/// `permanent_shift` is the part of `gain` earned from the trader's own
/// permanent impact.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    pub wealth: SampledPath,
    pub gain: SampledPath,
    pub spread_cost: SampledPath,
    pub impact_cost: SampledPath,
    pub block_cost: SampledPath,
    pub permanent_shift: SampledPath,
}

impl WealthPath {
    pub fn terminal(&self) -> f64 {
        self.wealth.last()
    }

    pub fn total_cost(&self) -> f64 {
        self.spread_cost.last() + self.impact_cost.last() + self.block_cost.last()
    }

    /// CSV with columns `t,X,gain,spread_cost,impact_cost,block_cost,permanent_shift`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,X,gain,spread_cost,impact_cost,block_cost,permanent_shift")?;
        let grid = self.wealth.grid();
        for (i, t) in grid.times().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t,
                self.wealth.at(i),
                self.gain.at(i),
                self.spread_cost.at(i),
                self.impact_cost.at(i),
                self.block_cost.at(i),
                self.permanent_shift.at(i)
            )?;
        }
        Ok(())
    }
}

/// Cash account `φ⁰` of the order-book model.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeAccountPath {
    pub cash: SampledPath,
}

#[derive(Default)]
struct Ledger {
    gain: f64,
    spread: f64,
    impact: f64,
    block: f64,
    permanent: f64,
    rows: [Vec<f64>; 6],
}

impl Ledger {
    fn with_capacity(n: usize) -> Self {
        Self { rows: std::array::from_fn(|_| Vec::with_capacity(n)), ..Default::default() }
    }

    fn record(&mut self, x0: f64) {
        let x = x0 + self.gain - self.spread - self.impact - self.block;
        for (row, v) in self
            .rows
            .iter_mut()
            .zip([x, self.gain, self.spread, self.impact, self.block, self.permanent])
        {
            row.push(v);
        }
    }

    fn finish(self, grid: crate::paths::TimeGrid) -> Result<WealthPath> {
        let [wealth, gain, spread, impact, block, permanent] = self.rows;
        Ok(WealthPath {
            wealth: SampledPath::new(grid, wealth)?,
            gain: SampledPath::new(grid, gain)?,
            spread_cost: SampledPath::new(grid, spread)?,
            impact_cost: SampledPath::new(grid, impact)?,
            block_cost: SampledPath::new(grid, block)?,
            permanent_shift: SampledPath::new(grid, permanent)?,
        })
    }
}

fn check_inputs(book: &BookParams, strategy: &Strategy, fundamental: &SampledPath) -> Result<()> {
    book.require_grid(strategy.grid(), "strategy")?;
    book.require_grid(fundamental.grid(), "fundamental price")
}

/// Marked-to-market order-book wealth `X^{OW}`.
pub fn ow_wealth(
    book: &BookParams,
    strategy: &Strategy,
    fundamental: &SampledPath,
    x0: f64,
) -> Result<WealthPath> {
    check_inputs(book, strategy, fundamental)?;
    let grid = *strategy.grid();
    let dt = grid.dt();
    let mut ledger = Ledger::with_capacity(grid.len());
    let mut excess = ExcessState::default();
    let mut phi = strategy.initial_position();

    for i in 0..grid.len() {
        let c = book.coeffs(i);
        let theta = strategy.block_at(i);
        if theta != 0.0 {
            let q = theta.abs();
            let (base, pre_excess, half_inv_h, alpha_over_h) = if theta > 0.0 {
                (c.base_ask, excess.ask, c.half_inv_depth_ask, c.buy_to_bid)
            } else {
                (c.base_bid, excess.bid, c.half_inv_depth_bid, c.sell_to_ask)
            };
            let shift = c.permanent_shift(theta);
            ledger.spread += base * q;
            ledger.impact += pre_excess * q;
            ledger.block += (half_inv_h - alpha_over_h) * q * q;
            ledger.gain += phi * shift;
            ledger.permanent += phi * shift;
            excess.apply_block(&c, theta);
            phi += theta;
        }
        ledger.record(x0);
        if i == grid.steps() {
            break;
        }

        ledger.gain += phi * (fundamental.at(i + 1) - fundamental.at(i));
        let rate = strategy.rate(i);
        let (int_ask, int_bid) = excess.advance(&c, rate, dt);
        if rate != 0.0 {
            let traded = rate * dt;
            let (base, excess_integral) =
                if rate > 0.0 { (c.base_ask, int_ask) } else { (c.base_bid, int_bid) };
            ledger.spread += base * traded.abs();
            ledger.impact += rate.abs() * excess_integral;
            let shift = c.permanent_shift(traded);
            let own = shift * (phi + 0.5 * traded);
            ledger.gain += own;
            ledger.permanent += own;
            phi += traded;
        }
    }
    ledger.finish(grid)
}

/// Safe account `φ⁰` with `φ⁰_{0−} = x₀ − φ₀ S_0`.
///
/// Purchases pay the pre-trade reference price, the pre-trade affected spread
/// and half of their own total quote move (`θ/(2h)` for a block; the average
/// of the linear permanent move plus the exact average excess spread for a
/// rate step). Sales are symmetric.
pub fn safe_account(
    book: &BookParams,
    strategy: &Strategy,
    fundamental: &SampledPath,
    x0: f64,
) -> Result<SafeAccountPath> {
    check_inputs(book, strategy, fundamental)?;
    let grid = *strategy.grid();
    let dt = grid.dt();
    let mut excess = ExcessState::default();
    let mut shift = 0.0;
    let mut cash = x0 - strategy.initial_position() * fundamental.at(0);
    let mut values = Vec::with_capacity(grid.len());

    for i in 0..grid.len() {
        let c = book.coeffs(i);
        let theta = strategy.block_at(i);
        let reference = fundamental.at(i) + shift;
        if theta > 0.0 {
            cash -= (reference + c.base_ask + excess.ask + c.half_inv_depth_ask * theta) * theta;
        } else if theta < 0.0 {
            let q = -theta;
            cash += (reference - c.base_bid - excess.bid - c.half_inv_depth_bid * q) * q;
        }
        shift += c.permanent_shift(theta);
        excess.apply_block(&c, theta);
        values.push(cash);
        if i == grid.steps() {
            break;
        }

        let rate = strategy.rate(i);
        let (int_ask, int_bid) = excess.advance(&c, rate, dt);
        let traded = rate * dt;
        let step_shift = c.permanent_shift(traded);
        let reference = fundamental.at(i + 1) + shift;
        if rate > 0.0 {
            cash -= (reference + 0.5 * step_shift + c.base_ask) * traded + rate * int_ask;
        } else if rate < 0.0 {
            let q = -traded;
            cash += (reference + 0.5 * step_shift - c.base_bid) * q - (-rate) * int_bid;
        }
        shift += step_shift;
    }
    Ok(SafeAccountPath { cash: SampledPath::new(grid, values)? })
}

/// Reduced-form wealth `X^{AC}` with temporary impact
/// `λ = (1−α)/(κ K h)` per side and permanent impact `γ = α/h`.
pub fn ac_wealth(
    book: &BookParams,
    strategy: &Strategy,
    fundamental: &SampledPath,
    x0: f64,
) -> Result<WealthPath> {
    check_inputs(book, strategy, fundamental)?;
    if strategy.has_blocks() {
        return invalid("reduced-form wealth requires an absolutely continuous strategy (no blocks)");
    }
    let grid = *strategy.grid();
    let dt = grid.dt();
    let mut ledger = Ledger::with_capacity(grid.len());
    let mut phi = strategy.initial_position();

    for i in 0..grid.len() {
        ledger.record(x0);
        if i == grid.steps() {
            break;
        }
        let c = book.coeffs(i);
        ledger.gain += phi * (fundamental.at(i + 1) - fundamental.at(i));
        let rate = strategy.rate(i);
        if rate != 0.0 {
            let traded = rate * dt;
            let (base, lambda) = if rate > 0.0 {
                (c.base_ask, c.buy_to_ask / c.ask_decay)
            } else {
                (c.base_bid, c.sell_to_bid / c.bid_decay)
            };
            ledger.spread += base * traded.abs();
            ledger.impact += lambda * rate * rate * dt;
            let shift = c.permanent_shift(traded);
            let own = shift * (phi + 0.5 * traded);
            ledger.gain += own;
            ledger.permanent += own;
            phi += traded;
        }
    }
    ledger.finish(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::make_grid;
    use crate::strategy::Block;

    #[test]
    fn zero_strategy_keeps_initial_wealth() {
        let g = make_grid(1.0, 32).unwrap();
        let book = BookParams::constant(g, 50.0, 1.0, 1.0, 0.3, 0.01).unwrap();
        let fund = SampledPath::from_fn(g, |t| 100.0 + (5.0 * t).sin()).unwrap();
        let z = Strategy::zero(g);
        for w in [ow_wealth(&book, &z, &fund, 3.0).unwrap(), ac_wealth(&book, &z, &fund, 3.0).unwrap()]
        {
            assert!(w.wealth.values().iter().all(|&x| x == 3.0));
        }
        let cash = safe_account(&book, &z, &fund, 3.0).unwrap();
        assert!(cash.cash.values().iter().all(|&x| x == 3.0));
    }

    #[test]
    fn single_block_cost() {
        let g = make_grid(1.0, 10).unwrap();
        let (h, e, theta) = (2.0, 0.05, 1.5);
        let book = BookParams::constant(g, 50.0, 1.0, h, 0.0, e).unwrap();
        let fund = SampledPath::constant(g, 10.0).unwrap();
        let s = Strategy::new(g, 0.0, vec![0.0; 10], vec![Block { index: 0, size: theta }]).unwrap();
        let w = ow_wealth(&book, &s, &fund, 0.0).unwrap();
        let expected = -e * theta - theta * theta / (2.0 * h);
        assert!((w.terminal() - expected).abs() < 1e-14);
        let cash = safe_account(&book, &s, &fund, 0.0).unwrap();
        assert!((cash.cash.at(0) + (10.0 + e + theta / (2.0 * h)) * theta).abs() < 1e-13);
    }

    #[test]
    fn ac_rejects_blocks() {
        let g = make_grid(1.0, 10).unwrap();
        let book = BookParams::constant(g, 50.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let fund = SampledPath::constant(g, 10.0).unwrap();
        let s = Strategy::new(g, 0.0, vec![0.0; 10], vec![Block { index: 2, size: 1.0 }]).unwrap();
        assert!(ac_wealth(&book, &s, &fund, 0.0).is_err());
    }

    #[test]
    fn csv_header() {
        let g = make_grid(1.0, 2).unwrap();
        let book = BookParams::constant(g, 50.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let fund = SampledPath::constant(g, 10.0).unwrap();
        let w = ow_wealth(&book, &Strategy::zero(g), &fund, 1.0).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,X,gain,spread_cost,impact_cost,block_cost,permanent_shift"));
        assert_eq!(lines.next(), Some("0,1,0,0,0,0,0"));
        assert_eq!(text.lines().count(), 4);
    }
}
