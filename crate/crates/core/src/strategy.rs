//! Finite-variation trading strategies.
//!
//! A [`Strategy`] is a signed, piecewise-constant turnover rate per grid step
//! plus signed block trades at grid points. Buy and sell parts are derived by
//! sign, which is the minimal decomposition `φ = φ↑ − φ↓` on the grid.
//!
//! Constructors cover the families used by the experiments: block schedules,
//! their linear-interpolation smoothing over windows of width `w κ^{-1/4}`,
//! exponential trackers `dθ = κ^{1/2} M (θ^∞ − θ) dt` and the tracker whose
//! speed is the leading-order optimal one for quadratic costs.

use std::io::{BufRead, Write};

use crate::book::BookParams;
use crate::error::{invalid, Error, Result};
use crate::paths::{SampledPath, TimeGrid};

/// Block trade of signed `size` shares at grid point `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub index: usize,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    grid: TimeGrid,
    initial_position: f64,
    /// Rate on step `i`, i.e. on `[t_i, t_{i+1})`; length `N`.
    rates: Vec<f64>,
    /// Dense block sizes per grid point; length `N + 1`, zero where no block.
    block_sizes: Vec<f64>,
}

impl Strategy {
    pub fn new(
        grid: TimeGrid,
        initial_position: f64,
        rates: Vec<f64>,
        blocks: Vec<Block>,
    ) -> Result<Self> {
        if !initial_position.is_finite() {
            return invalid("initial position must be finite");
        }
        if rates.len() != grid.steps() {
            return invalid(format!(
                "strategy needs one rate per step ({}), got {}",
                grid.steps(),
                rates.len()
            ));
        }
        if let Some(i) = rates.iter().position(|r| !r.is_finite()) {
            return invalid(format!("non-finite rate on step {i}"));
        }
        let mut block_sizes = vec![0.0; grid.len()];
        let mut last: Option<usize> = None;
        for b in &blocks {
            if b.index >= grid.len() {
                return invalid(format!("block index {} outside the grid", b.index));
            }
            if let Some(prev) = last {
                if b.index == prev {
                    return invalid(format!("two blocks at grid point {}", b.index));
                }
                if b.index < prev {
                    return invalid("block indices must be strictly increasing");
                }
            }
            if !b.size.is_finite() {
                return invalid(format!("non-finite block size at grid point {}", b.index));
            }
            block_sizes[b.index] = b.size;
            last = Some(b.index);
        }
        Ok(Self { grid, initial_position, rates, block_sizes })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self {
            grid,
            initial_position: 0.0,
            rates: vec![0.0; grid.steps()],
            block_sizes: vec![0.0; grid.len()],
        }
    }

    pub fn from_rates(grid: TimeGrid, initial_position: f64, rates: Vec<f64>) -> Result<Self> {
        Self::new(grid, initial_position, rates, Vec::new())
    }

    /// Absolutely continuous strategy whose rate on each step is `f` at the
    /// step midpoint.
    pub fn from_rate_fn(
        grid: TimeGrid,
        initial_position: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let dt = grid.dt();
        let rates = (0..grid.steps()).map(|i| f(grid.time(i) + 0.5 * dt)).collect();
        Self::from_rates(grid, initial_position, rates)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn initial_position(&self) -> f64 {
        self.initial_position
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    #[inline]
    pub fn rate(&self, step: usize) -> f64 {
        self.rates[step]
    }

    #[inline]
    pub fn block_at(&self, i: usize) -> f64 {
        self.block_sizes[i]
    }

    pub fn blocks(&self) -> Vec<Block> {
        self.block_sizes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0.0)
            .map(|(index, &size)| Block { index, size })
            .collect()
    }

    pub fn has_blocks(&self) -> bool {
        self.block_sizes.iter().any(|&s| s != 0.0)
    }

    pub fn has_rates(&self) -> bool {
        self.rates.iter().any(|&r| r != 0.0)
    }

    /// Post-jump positions `φ_{t_i}`.
    pub fn positions(&self) -> SampledPath {
        let dt = self.grid.dt();
        let mut values = Vec::with_capacity(self.grid.len());
        let mut phi = self.initial_position;
        for i in 0..self.grid.len() {
            phi += self.block_sizes[i];
            values.push(phi);
            if i < self.grid.steps() {
                phi += self.rates[i] * dt;
            }
        }
        SampledPath::new(self.grid, values).expect("finite positions")
    }

    /// Net shares traded: `Σ rate·Δ + Σ blocks`.
    pub fn net_volume(&self) -> f64 {
        let dt = self.grid.dt();
        self.rates.iter().map(|r| r * dt).sum::<f64>() + self.block_sizes.iter().sum::<f64>()
    }

    /// Same blocks and initial position, rates multiplied by `factor`.
    pub fn scale_rates(&self, factor: f64) -> Result<Self> {
        let rates = self.rates.iter().map(|r| r * factor).collect();
        Self::new(self.grid, self.initial_position, rates, self.blocks())
    }

    /// CSV with header `index,rate,block,position`; one row per grid point.
    /// The rate column of the final row is 0 (no step follows `T`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,rate,block,position")?;
        let positions = self.positions();
        for i in 0..self.grid.len() {
            let rate = if i < self.grid.steps() { self.rates[i] } else { 0.0 };
            writeln!(w, "{},{},{},{}", i, rate, self.block_sizes[i], positions.at(i))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(grid: TimeGrid, r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "index,rate,block,position" {
            return Err(Error::Parse(format!("unexpected strategy header '{header}'")));
        }
        let mut rates = Vec::with_capacity(grid.steps());
        let mut blocks = Vec::new();
        let mut initial = None;
        for (row, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", row + 2)));
            }
            let num = |k: usize| -> Result<f64> {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", row + 2)))
            };
            let index: usize = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", row + 2)))?;
            if index != row {
                return Err(Error::Parse(format!("line {}: index out of order", row + 2)));
            }
            let (rate, block, position) = (num(1)?, num(2)?, num(3)?);
            if index < grid.steps() {
                rates.push(rate);
            }
            if block != 0.0 {
                blocks.push(Block { index, size: block });
            }
            if index == 0 {
                initial = Some(position - block);
            }
        }
        if rates.len() != grid.steps() {
            return Err(Error::Parse("row count does not match the grid".into()));
        }
        Self::new(grid, initial.unwrap_or(0.0), rates, blocks)
    }
}

/// Blocks `θ_n` at times `τ_n ≤ last_time < T`, snapped to the nearest grid
/// point.
pub fn block_schedule(grid: TimeGrid, trades: &[(f64, f64)], last_time: f64) -> Result<Strategy> {
    if !(last_time >= 0.0 && last_time < grid.horizon()) {
        return invalid(format!(
            "last block time must lie in [0, T) with T = {}, got {last_time}",
            grid.horizon()
        ));
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(trades.len());
    let mut prev_time = f64::NEG_INFINITY;
    for &(t, size) in trades {
        if !(t >= 0.0 && t <= last_time) {
            return invalid(format!("block time {t} outside [0, {last_time}]"));
        }
        if t <= prev_time {
            return invalid("block times must be strictly increasing");
        }
        if size == 0.0 || !size.is_finite() {
            return invalid(format!("block size at t = {t} must be nonzero and finite"));
        }
        let index = grid.nearest_index(t);
        if blocks.last().is_some_and(|b| b.index == index) {
            return invalid(format!("blocks at t = {prev_time} and t = {t} collide at grid point {index}"));
        }
        blocks.push(Block { index, size });
        prev_time = t;
    }
    Strategy::new(grid, 0.0, vec![0.0; grid.steps()], blocks)
}

/// Replaces each block `θ_n` at `τ_n` by the constant rate `θ_n / L` on
/// `[τ_n, τ_n + L]`, `L = width · κ^{-1/4}`.
///
/// The window is rounded up to whole steps; the final partial step trades
/// the remainder, so each block's volume is reproduced.
pub fn smooth_blocks(strategy: &Strategy, kappa: f64, width: f64) -> Result<Strategy> {
    if !(kappa > 0.0 && kappa.is_finite()) || !(width > 0.0 && width.is_finite()) {
        return invalid("smoothing needs kappa > 0 and width > 0");
    }
    if strategy.has_rates() {
        return invalid("smoothing applies to pure block strategies");
    }
    let grid = *strategy.grid();
    let dt = grid.dt();
    let window = width * kappa.powf(-0.25);
    let ratio = window / dt;
    let full_steps = (ratio + 1e-9).floor() as usize;
    let partial = ratio - full_steps as f64 > 1e-9;
    let window_steps = full_steps + usize::from(partial);

    let blocks = strategy.blocks();
    let mut rates = vec![0.0; grid.steps()];
    for (n, b) in blocks.iter().enumerate() {
        let end = b.index + window_steps;
        if end > grid.steps() {
            return invalid(format!(
                "smoothing window of block at grid point {} runs past T",
                b.index
            ));
        }
        if let Some(next) = blocks.get(n + 1) {
            if end > next.index {
                return invalid(format!(
                    "smoothing windows of blocks at grid points {} and {} overlap",
                    b.index, next.index
                ));
            }
        }
        let rate = b.size / window;
        let mut traded = 0.0;
        for r in rates.iter_mut().skip(b.index).take(full_steps) {
            *r = rate;
            traded += rate * dt;
        }
        if partial {
            rates[b.index + full_steps] = (b.size - traded) / dt;
        }
    }
    Strategy::from_rates(grid, strategy.initial_position(), rates)
}

/// Target, relaxation speed `M` and resilience scale of an exponential tracker.
#[derive(Debug, Clone)]
pub struct TrackerSpec {
    pub target: SampledPath,
    pub speed: SampledPath,
    pub kappa: f64,
    /// Starting position; defaults to the target's initial value.
    pub initial: Option<f64>,
}

/// Tracker positions `θ^κ` from the exact relaxation toward the left-endpoint
/// target: `θ_{i+1} = θ^∞_i + e^{−κ^{1/2} M_i Δ} (θ_i − θ^∞_i)`.
pub fn tracker_positions(spec: &TrackerSpec) -> Result<SampledPath> {
    let grid = *spec.target.grid();
    spec.target.require_same_grid(&spec.speed)?;
    if !(spec.kappa > 0.0 && spec.kappa.is_finite()) {
        return invalid("tracker needs kappa > 0");
    }
    if spec.speed.min() < 0.0 {
        return invalid("tracker speed must be nonnegative");
    }
    let root = spec.kappa.sqrt();
    let dt = grid.dt();
    let mut theta = spec.initial.unwrap_or(spec.target.first());
    let mut values = Vec::with_capacity(grid.len());
    values.push(theta);
    for i in 0..grid.steps() {
        let target = spec.target.at(i);
        theta = target + (-root * spec.speed.at(i) * dt).exp() * (theta - target);
        values.push(theta);
    }
    SampledPath::new(grid, values)
}

fn strategy_from_positions(positions: &SampledPath) -> Result<Strategy> {
    let grid = *positions.grid();
    let dt = grid.dt();
    let v = positions.values();
    let rates = v.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    Strategy::from_rates(grid, v[0], rates)
}

/// Exponential tracker strategy; the emitted rate on each step is the
/// average `(θ_{i+1} − θ_i) / Δ`.
pub fn exponential_tracker(spec: &TrackerSpec) -> Result<Strategy> {
    if spec.speed.min() <= 0.0 {
        return invalid("tracker rate process M must be > 0");
    }
    strategy_from_positions(&tracker_positions(spec)?)
}

/// `M_t = sqrt(K_t h_t σ_t² / (2 R_t))` for a symmetric book.
pub fn optimal_speed(
    book: &BookParams,
    volatility: &SampledPath,
    risk_tolerance: &SampledPath,
) -> Result<SampledPath> {
    if !book.is_symmetric() {
        return invalid("optimal tracker needs a symmetric book (K and h equal on both sides)");
    }
    book.require_grid(volatility.grid(), "volatility")?;
    book.require_grid(risk_tolerance.grid(), "risk tolerance")?;
    if risk_tolerance.min() <= 0.0 {
        return invalid("risk tolerance R must be > 0");
    }
    if volatility.min() < 0.0 {
        return invalid("volatility must be >= 0");
    }
    let side = book.ask();
    let values = (0..book.grid().len())
        .map(|i| {
            let s = volatility.at(i);
            (side.shape.at(i) * side.depth.at(i) * s * s / (2.0 * risk_tolerance.at(i))).sqrt()
        })
        .collect();
    SampledPath::new(*book.grid(), values)
}

/// Tracker toward `target` at the leading-order optimal speed
/// `κ^{1/2} M_t`, started at the target's initial value.
pub fn optimal_tracker(
    book: &BookParams,
    volatility: &SampledPath,
    risk_tolerance: &SampledPath,
    target: &SampledPath,
) -> Result<Strategy> {
    let speed = optimal_speed(book, volatility, risk_tolerance)?;
    let spec = TrackerSpec { target: target.clone(), speed, kappa: book.kappa(), initial: None };
    strategy_from_positions(&tracker_positions(&spec)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyDiagnostics {
    pub total_variation: f64,
    pub sup_rate: f64,
    pub block_count: usize,
}

pub fn diagnostics(strategy: &Strategy) -> StrategyDiagnostics {
    let dt = strategy.grid().dt();
    let rate_tv: f64 = strategy.rates().iter().map(|r| r.abs() * dt).sum();
    let blocks = strategy.blocks();
    StrategyDiagnostics {
        total_variation: rate_tv + blocks.iter().map(|b| b.size.abs()).sum::<f64>(),
        sup_rate: strategy.rates().iter().fold(0.0, |m, r| m.max(r.abs())),
        block_count: blocks.len(),
    }
}
