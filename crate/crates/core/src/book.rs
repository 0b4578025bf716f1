//! Block-shaped order book: bid/ask spread dynamics and the reference price.
//!
//! The excess spreads `x↑ = ε^{φ,↑} − ε↑`, `x↓ = ε^{φ,↓} − ε↓` solve the
//! linear equations
//!
//! ```text
//! dx↑ = −κK↑ x↑ dt + (1−α↑)/h↑ dφ↑ + α↓/h↓ dφ↓
//! dx↓ = −κK↓ x↓ dt + (1−α↓)/h↓ dφ↓ + α↑/h↑ dφ↑
//! ```
//!
//! and are stepped with an exponential integrator: coefficients are frozen at
//! the left end of each step, the decay over the step is exact and a constant
//! trading rate contributes its exact convolution increment. A block at `t_i`
//! is applied after the pre-jump value at `t_i` has been recorded. The scheme is
//! stable for any `κΔ`.

use crate::error::{invalid, Result};
use crate::kernel::relax_step;
use crate::paths::{SampledPath, TimeGrid};
use crate::strategy::Strategy;

/// Side of the book: `Ask` absorbs purchases (↑), `Bid` absorbs sales (↓).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Ask,
    Bid,
}

/// Coefficients of one side of the book, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SideParams {
    /// Resilience shape `K`; the resilience rate is `κ K`.
    pub shape: SampledPath,
    /// Book height `h` (shares per unit price).
    pub depth: SampledPath,
    /// Fraction `α ∈ [0, 1/2]` of each quote move that is permanent.
    pub permanent: SampledPath,
    /// Unaffected spread `ε`.
    pub base_spread: SampledPath,
}

impl SideParams {
    pub fn constant(
        grid: TimeGrid,
        shape: f64,
        depth: f64,
        permanent: f64,
        base_spread: f64,
    ) -> Result<Self> {
        let side = Self {
            shape: SampledPath::constant(grid, shape)?,
            depth: SampledPath::constant(grid, depth)?,
            permanent: SampledPath::constant(grid, permanent)?,
            base_spread: SampledPath::constant(grid, base_spread)?,
        };
        side.validate("side")?;
        Ok(side)
    }

    fn grid(&self) -> &TimeGrid {
        self.shape.grid()
    }

    fn validate(&self, name: &str) -> Result<()> {
        let grid = self.grid();
        for (label, path) in [
            ("depth", &self.depth),
            ("permanent", &self.permanent),
            ("base_spread", &self.base_spread),
        ] {
            if path.grid() != grid {
                return invalid(format!("{name} {label} is sampled on a different grid"));
            }
        }
        if self.shape.min() <= 0.0 {
            return invalid(format!("{name} resilience shape K must be > 0"));
        }
        if self.depth.min() <= 0.0 {
            return invalid(format!("{name} depth h must be > 0"));
        }
        if self.permanent.min() < 0.0 || self.permanent.max() > 0.5 {
            return invalid(format!(
                "{name} permanent-impact fraction alpha must lie in [0,1/2], got range [{}, {}]",
                self.permanent.min(),
                self.permanent.max()
            ));
        }
        if self.base_spread.min() < 0.0 {
            return invalid(format!("{name} base spread must be >= 0"));
        }
        Ok(())
    }
}

/// Full book specification at one resilience scale `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BookParams {
    kappa: f64,
    ask: SideParams,
    bid: SideParams,
}

impl BookParams {
    pub fn new(kappa: f64, ask: SideParams, bid: SideParams) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return invalid(format!("resilience scale kappa must be > 0, got {kappa}"));
        }
        ask.validate("ask")?;
        bid.validate("bid")?;
        if ask.grid() != bid.grid() {
            return invalid("ask and bid coefficients are sampled on different grids");
        }
        Ok(Self { kappa, ask, bid })
    }

    /// Constant, symmetric book.
    pub fn constant(
        grid: TimeGrid,
        kappa: f64,
        shape: f64,
        depth: f64,
        permanent: f64,
        base_spread: f64,
    ) -> Result<Self> {
        let side = SideParams::constant(grid, shape, depth, permanent, base_spread)?;
        Self::new(kappa, side.clone(), side)
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(kappa, self.ask.clone(), self.bid.clone())
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn grid(&self) -> &TimeGrid {
        self.ask.grid()
    }

    pub fn side(&self, side: Side) -> &SideParams {
        match side {
            Side::Ask => &self.ask,
            Side::Bid => &self.bid,
        }
    }

    pub fn ask(&self) -> &SideParams {
        &self.ask
    }

    pub fn bid(&self) -> &SideParams {
        &self.bid
    }

    /// `K↑ = K↓` and `h↑ = h↓` pointwise.
    pub fn is_symmetric(&self) -> bool {
        self.ask.shape == self.bid.shape && self.ask.depth == self.bid.depth
    }

    pub(crate) fn require_grid(&self, grid: &TimeGrid, what: &str) -> Result<()> {
        if self.grid() != grid {
            return invalid(format!("{what} and book coefficients are on different grids"));
        }
        Ok(())
    }

    pub(crate) fn coeffs(&self, i: usize) -> StepCoeffs {
        let (a, b) = (&self.ask, &self.bid);
        let (h_up, h_dn) = (a.depth.at(i), b.depth.at(i));
        let (al_up, al_dn) = (a.permanent.at(i), b.permanent.at(i));
        StepCoeffs {
            ask_decay: self.kappa * a.shape.at(i),
            bid_decay: self.kappa * b.shape.at(i),
            buy_to_ask: (1.0 - al_up) / h_up,
            buy_to_bid: al_up / h_up,
            sell_to_bid: (1.0 - al_dn) / h_dn,
            sell_to_ask: al_dn / h_dn,
            half_inv_depth_ask: 0.5 / h_up,
            half_inv_depth_bid: 0.5 / h_dn,
            base_ask: a.base_spread.at(i),
            base_bid: b.base_spread.at(i),
        }
    }
}

/// Book coefficients frozen at one grid point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepCoeffs {
    pub ask_decay: f64,
    pub bid_decay: f64,
    /// `(1−α↑)/h↑`: ask widening per share bought.
    pub buy_to_ask: f64,
    /// `α↑/h↑`: bid widening and reference shift per share bought.
    pub buy_to_bid: f64,
    pub sell_to_bid: f64,
    pub sell_to_ask: f64,
    pub half_inv_depth_ask: f64,
    pub half_inv_depth_bid: f64,
    pub base_ask: f64,
    pub base_bid: f64,
}

impl StepCoeffs {
    /// Reference-price shift for a signed trade of `size` shares.
    #[inline]
    pub fn permanent_shift(&self, size: f64) -> f64 {
        if size >= 0.0 {
            self.buy_to_bid * size
        } else {
            self.sell_to_ask * size
        }
    }
}

/// Excess spreads above the base spreads.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ExcessState {
    pub ask: f64,
    pub bid: f64,
}

impl ExcessState {
    pub fn apply_block(&mut self, c: &StepCoeffs, size: f64) {
        if size > 0.0 {
            self.ask += c.buy_to_ask * size;
            self.bid += c.buy_to_bid * size;
        } else if size < 0.0 {
            self.bid += c.sell_to_bid * -size;
            self.ask += c.sell_to_ask * -size;
        }
    }

    /// Advances one step at constant signed `rate`; returns the time
    /// integrals of the ask and bid excess over the step.
    pub fn advance(&mut self, c: &StepCoeffs, rate: f64, dt: f64) -> (f64, f64) {
        let (buy, sell) = (rate.max(0.0), (-rate).max(0.0));
        let j_ask = c.buy_to_ask * buy + c.sell_to_ask * sell;
        let j_bid = c.sell_to_bid * sell + c.buy_to_bid * buy;
        let (ask, int_ask) = relax_step(self.ask, c.ask_decay, j_ask, dt);
        let (bid, int_bid) = relax_step(self.bid, c.bid_decay, j_bid, dt);
        self.ask = ask;
        self.bid = bid;
        (int_ask, int_bid)
    }
}

/// Affected spreads `ε^{φ,↑}`, `ε^{φ,↓}` at every grid point.
///
/// `ask`/`bid` hold post-jump (right-continuous) values; the `*_pre_jump`
/// paths hold the left limits `ε^{φ}_{t−}`, which differ only at block
/// instants.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadPaths {
    pub ask: SampledPath,
    pub bid: SampledPath,
    pub ask_pre_jump: SampledPath,
    pub bid_pre_jump: SampledPath,
    pub ask_excess: SampledPath,
    pub bid_excess: SampledPath,
}

impl SpreadPaths {
    pub fn spread(&self, side: Side) -> &SampledPath {
        match side {
            Side::Ask => &self.ask,
            Side::Bid => &self.bid,
        }
    }

    pub fn excess(&self, side: Side) -> &SampledPath {
        match side {
            Side::Ask => &self.ask_excess,
            Side::Bid => &self.bid_excess,
        }
    }
}

/// Reference price `S^φ`, with left limits and the cumulative permanent shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePricePath {
    pub values: SampledPath,
    pub pre_jump: SampledPath,
    pub shift: SampledPath,
}

pub fn evolve_spreads(params: &BookParams, strategy: &Strategy) -> Result<SpreadPaths> {
    let grid = *strategy.grid();
    params.require_grid(&grid, "strategy")?;
    let dt = grid.dt();
    let n = grid.len();
    let mut out: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut x = ExcessState::default();
    for i in 0..n {
        let c = params.coeffs(i);
        out[2].push(c.base_ask + x.ask);
        out[3].push(c.base_bid + x.bid);
        x.apply_block(&c, strategy.block_at(i));
        out[0].push(c.base_ask + x.ask);
        out[1].push(c.base_bid + x.bid);
        out[4].push(x.ask);
        out[5].push(x.bid);
        if i < grid.steps() {
            x.advance(&c, strategy.rate(i), dt);
        }
    }
    let [ask, bid, ask_pre, bid_pre, ask_x, bid_x] = out;
    Ok(SpreadPaths {
        ask: SampledPath::new(grid, ask)?,
        bid: SampledPath::new(grid, bid)?,
        ask_pre_jump: SampledPath::new(grid, ask_pre)?,
        bid_pre_jump: SampledPath::new(grid, bid_pre)?,
        ask_excess: SampledPath::new(grid, ask_x)?,
        bid_excess: SampledPath::new(grid, bid_x)?,
    })
}

pub fn reference_price(
    params: &BookParams,
    strategy: &Strategy,
    fundamental: &SampledPath,
) -> Result<ReferencePricePath> {
    let grid = *strategy.grid();
    params.require_grid(&grid, "strategy")?;
    params.require_grid(fundamental.grid(), "fundamental price")?;
    let dt = grid.dt();
    let mut post = Vec::with_capacity(grid.len());
    let mut pre = Vec::with_capacity(grid.len());
    let mut shifts = Vec::with_capacity(grid.len());
    let mut shift = 0.0;
    for i in 0..grid.len() {
        let c = params.coeffs(i);
        pre.push(fundamental.at(i) + shift);
        shift += c.permanent_shift(strategy.block_at(i));
        post.push(fundamental.at(i) + shift);
        shifts.push(shift);
        if i < grid.steps() {
            shift += c.permanent_shift(strategy.rate(i) * dt);
        }
    }
    Ok(ReferencePricePath {
        values: SampledPath::new(grid, post)?,
        pre_jump: SampledPath::new(grid, pre)?,
        shift: SampledPath::new(grid, shifts)?,
    })
}

/// `κ (ε^{φ,side} − ε^{side})` for an absolutely continuous strategy.
pub fn scaled_excess_spread(
    params: &BookParams,
    strategy: &Strategy,
    side: Side,
) -> Result<SampledPath> {
    if strategy.has_blocks() {
        return invalid("scaled excess spread is defined for strategies without blocks");
    }
    let spreads = evolve_spreads(params, strategy)?;
    let kappa = params.kappa();
    spreads.excess(side).map(|x| kappa * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::make_grid;
    use crate::strategy::Block;

    fn book(grid: TimeGrid, kappa: f64, alpha: f64) -> BookParams {
        BookParams::constant(grid, kappa, 1.0, 2.0, alpha, 0.01).unwrap()
    }

    #[test]
    fn zero_strategy_leaves_base_spreads() {
        let g = make_grid(1.0, 50).unwrap();
        let p = book(g, 100.0, 0.3);
        let s = evolve_spreads(&p, &Strategy::zero(g)).unwrap();
        assert_eq!(s.ask, p.ask().base_spread);
        assert_eq!(s.bid, p.bid().base_spread);
    }

    #[test]
    fn rejects_bad_params() {
        let g = make_grid(1.0, 4).unwrap();
        let err = BookParams::constant(g, 10.0, 1.0, 1.0, 0.7, 0.01).unwrap_err();
        assert!(err.to_string().contains("[0,1/2]"));
        assert!(BookParams::constant(g, 0.0, 1.0, 1.0, 0.1, 0.01).is_err());
        assert!(BookParams::constant(g, 1.0, -1.0, 1.0, 0.1, 0.01).is_err());
        assert!(BookParams::constant(g, 1.0, 1.0, 0.0, 0.1, 0.01).is_err());
    }

    #[test]
    fn block_jump_and_pre_jump_values() {
        let g = make_grid(1.0, 10).unwrap();
        let p = book(g, 5.0, 0.25);
        let s = Strategy::new(g, 0.0, vec![0.0; 10], vec![Block { index: 3, size: 1.0 }]).unwrap();
        let sp = evolve_spreads(&p, &s).unwrap();
        assert_eq!(sp.ask_pre_jump.at(3), 0.01);
        assert!((sp.ask.at(3) - (0.01 + 0.75 / 2.0)).abs() < 1e-15);
        assert!((sp.bid.at(3) - (0.01 + 0.25 / 2.0)).abs() < 1e-15);
        // decays afterwards
        let decay = (-5.0 * g.dt()).exp();
        assert!((sp.ask_excess.at(4) - 0.375 * decay).abs() < 1e-15);
    }

    #[test]
    fn sells_widen_bid_and_move_reference_down() {
        let g = make_grid(1.0, 10).unwrap();
        let p = book(g, 5.0, 0.5);
        let s = Strategy::new(g, 0.0, vec![0.0; 10], vec![Block { index: 0, size: -2.0 }]).unwrap();
        let sp = evolve_spreads(&p, &s).unwrap();
        assert!((sp.bid_excess.at(0) - 0.5).abs() < 1e-15);
        assert!((sp.ask_excess.at(0) - 0.5).abs() < 1e-15);
        let fund = SampledPath::constant(g, 10.0).unwrap();
        let r = reference_price(&p, &s, &fund).unwrap();
        assert_eq!(r.pre_jump.at(0), 10.0);
        assert!((r.values.at(0) - 9.5).abs() < 1e-15);
        assert!((r.values.last() - 9.5).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_reference_is_fundamental() {
        let g = make_grid(1.0, 20).unwrap();
        let p = book(g, 5.0, 0.0);
        let rates: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let s = Strategy::new(g, 1.0, rates, vec![Block { index: 7, size: 3.0 }]).unwrap();
        let fund = SampledPath::from_fn(g, |t| 100.0 + t * t).unwrap();
        let r = reference_price(&p, &s, &fund).unwrap();
        assert_eq!(r.values, fund);
    }

    #[test]
    fn round_trip_cancels_permanent_shift() {
        let g = make_grid(1.0, 10).unwrap();
        let p = book(g, 5.0, 0.2);
        let s = Strategy::new(
            g,
            0.0,
            vec![0.0; 10],
            vec![Block { index: 2, size: 1.5 }, Block { index: 6, size: -1.5 }],
        )
        .unwrap();
        let fund = SampledPath::constant(g, 50.0).unwrap();
        let r = reference_price(&p, &s, &fund).unwrap();
        assert!((r.values.at(3) - (50.0 + 0.1 * 1.5)).abs() < 1e-13);
        assert_eq!(r.values.last(), 50.0);
    }

    #[test]
    fn scaled_excess_rejects_blocks() {
        let g = make_grid(1.0, 10).unwrap();
        let p = book(g, 5.0, 0.2);
        let s = Strategy::new(g, 0.0, vec![0.0; 10], vec![Block { index: 2, size: 1.0 }]).unwrap();
        assert!(scaled_excess_spread(&p, &s, Side::Ask).is_err());
        let z = scaled_excess_spread(&p, &Strategy::zero(g), Side::Ask).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = book(make_grid(1.0, 10).unwrap(), 5.0, 0.2);
        let s = Strategy::zero(make_grid(1.0, 20).unwrap());
        assert!(evolve_spreads(&p, &s).is_err());
    }
}
