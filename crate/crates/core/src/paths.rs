//! Uniform time grids, sampled paths and deterministic-seeded noise.
//!
//! Every Monte-Carlo path owns one [`RandomSource`] (a seed plus a stream
//! id). The same source always reproduces the same Gaussian increments, so a
//! fundamental price path can be regenerated identically for every resilience
//! value in a ladder.
//!
//! Gaussian draws use the Marsaglia polar method on top of ChaCha8 uniforms.
//! The method is part of the output contract: changing it changes every golden
//! file, so it is versioned in [`GAUSSIAN_METHOD`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Identifier of the Gaussian sampler, recorded in run summaries.
pub const GAUSSIAN_METHOD: &str = "marsaglia-polar/chacha8/v1";

/// Uniform discretization `t_i = i * T / N`, `i = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return invalid(format!("grid horizon must be positive and finite, got {horizon}"));
        }
        if steps == 0 {
            return invalid("grid needs at least one step");
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    /// Index of the grid point nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let raw = (t / self.dt()).round();
        raw.clamp(0.0, self.steps as f64) as usize
    }

    /// Grid with `factor` times as many steps over the same horizon.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return invalid("refinement factor must be at least 1");
        }
        Self::new(self.horizon, self.steps * factor)
    }

    /// Ratio `fine.steps / self.steps` when `self` is nested in `fine`.
    pub fn nesting_ratio(&self, fine: &TimeGrid) -> Option<usize> {
        if self.horizon != fine.horizon || fine.steps % self.steps != 0 {
            return None;
        }
        Some(fine.steps / self.steps)
    }
}

/// Convenience constructor mirroring [`TimeGrid::new`].
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}

/// Values of a process at every point of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "path has {} values but grid has {} points",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite path value at index {i}"));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return invalid(format!("constant path value must be finite, got {c}"));
        }
        Ok(Self { grid, values: vec![c; grid.len()] })
    }

    /// Pointwise evaluation of `f` on the grid.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (i, t) in grid.times().enumerate() {
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::NumericFailure {
                    step: i,
                    detail: format!("function value {v} at t = {t}"),
                });
            }
            values.push(v);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.grid.steps]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two paths on the same grid.
    pub fn zip_with(&self, other: &SampledPath, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.require_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.grid, values)
    }

    pub fn sup_abs_diff(&self, other: &SampledPath) -> Result<f64> {
        self.require_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Values at the points of a coarser grid nested in this one.
    pub fn restrict(&self, coarse: &TimeGrid) -> Result<Self> {
        let ratio = coarse.nesting_ratio(&self.grid).ok_or_else(|| {
            Error::InvalidArgument("target grid is not nested in the path's grid".into())
        })?;
        let values = (0..coarse.len()).map(|i| self.values[i * ratio]).collect();
        Ok(Self { grid: *coarse, values })
    }

    pub(crate) fn require_same_grid(&self, other: &SampledPath) -> Result<()> {
        if self.grid != other.grid {
            return invalid(format!(
                "grid mismatch: {} vs {} steps over [0, {}] / [0, {}]",
                self.grid.steps, other.grid.steps, self.grid.horizon, other.grid.horizon
            ));
        }
        Ok(())
    }
}

/// `constant_path(grid, c)`: every entry equals `c`.
pub fn constant_path(grid: TimeGrid, c: f64) -> Result<SampledPath> {
    SampledPath::constant(grid, c)
}

/// `function_path(grid, f)`: `f` evaluated at every grid point.
pub fn function_path(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<SampledPath> {
    SampledPath::from_fn(grid, f)
}

/// Seed and stream id of one Monte-Carlo path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    pub fn normals(&self) -> PolarNormals<ChaCha8Rng> {
        PolarNormals::new(self.rng())
    }
}

/// Standard normal draws by the Marsaglia polar method.
pub struct PolarNormals<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> PolarNormals<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.random::<f64>() - 1.0;
            let v = 2.0 * self.rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn into_inner(self) -> R {
        self.rng
    }
}

/// The `N` Brownian increments `ΔW_i ~ N(0, Δ)` of one stream.
pub fn brownian_increments(grid: &TimeGrid, source: &RandomSource) -> Vec<f64> {
    let sd = grid.dt().sqrt();
    let mut normals = source.normals();
    (0..grid.steps()).map(|_| sd * normals.next_normal()).collect()
}

/// Sums consecutive groups of `factor` increments (fine grid to nested coarse grid).
pub fn coarsen_increments(fine: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || fine.len() % factor != 0 {
        return invalid(format!(
            "cannot coarsen {} increments by a factor of {factor}",
            fine.len()
        ));
    }
    Ok(fine.chunks(factor).map(|c| c.iter().sum()).collect())
}

/// Path with `W_0 = 0` built from explicit increments.
pub fn brownian_from_increments(grid: &TimeGrid, increments: &[f64]) -> Result<SampledPath> {
    if increments.len() != grid.steps() {
        return invalid("increment count does not match grid steps");
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut w = 0.0;
    values.push(w);
    for dw in increments {
        w += dw;
        values.push(w);
    }
    SampledPath::new(*grid, values)
}

pub fn sample_brownian(grid: &TimeGrid, source: &RandomSource) -> SampledPath {
    let increments = brownian_increments(grid, source);
    brownian_from_increments(grid, &increments).expect("gaussian increments are finite")
}

/// Euler–Maruyama path `s_{i+1} = s_i + drift(t_i, s_i) Δ + vol(t_i, s_i) ΔW_i`.
pub fn sample_ito(
    grid: &TimeGrid,
    drift: impl Fn(f64, f64) -> f64,
    vol: impl Fn(f64, f64) -> f64,
    s0: f64,
    source: &RandomSource,
) -> Result<SampledPath> {
    let increments = brownian_increments(grid, source);
    euler_from_increments(grid, drift, vol, s0, &increments)
}

/// Euler–Maruyama driven by given Brownian increments.
pub fn euler_from_increments(
    grid: &TimeGrid,
    drift: impl Fn(f64, f64) -> f64,
    vol: impl Fn(f64, f64) -> f64,
    s0: f64,
    increments: &[f64],
) -> Result<SampledPath> {
    if increments.len() != grid.steps() {
        return invalid("increment count does not match grid steps");
    }
    if !s0.is_finite() {
        return Err(Error::NumericFailure { step: 0, detail: format!("initial value {s0}") });
    }
    let dt = grid.dt();
    let mut values = Vec::with_capacity(grid.len());
    let mut s = s0;
    values.push(s);
    for (i, dw) in increments.iter().enumerate() {
        let t = grid.time(i);
        let mu = drift(t, s);
        let sigma = vol(t, s);
        if !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::NumericFailure {
                step: i,
                detail: format!("coefficients drift = {mu}, vol = {sigma} at t = {t}, s = {s}"),
            });
        }
        s += mu * dt + sigma * dw;
        if !s.is_finite() {
            return Err(Error::NumericFailure { step: i, detail: "state overflowed".into() });
        }
        values.push(s);
    }
    SampledPath::new(*grid, values)
}
