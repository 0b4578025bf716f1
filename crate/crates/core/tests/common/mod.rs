#![allow(dead_code)]

use std::path::PathBuf;

use lobres::{make_grid, BookParams, Block, SideParams, Strategy, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn config_path(name: &str) -> PathBuf {
    configs_dir().join(format!("{name}.toml"))
}

/// Constant coefficients of one side.
#[derive(Debug, Clone, Copy)]
pub struct Side {
    pub shape: f64,
    pub depth: f64,
    pub alpha: f64,
    pub eps: f64,
}

pub fn book(grid: TimeGrid, kappa: f64, ask: Side, bid: Side) -> BookParams {
    let side = |s: Side| SideParams::constant(grid, s.shape, s.depth, s.alpha, s.eps).unwrap();
    BookParams::new(kappa, side(ask), side(bid)).unwrap()
}

/// Ask and bid spreads (post-jump) of a strategy in a constant book, summed
/// term by term from each trade's exponentially decaying footprint.
pub fn direct_spreads(kappa: f64, ask: Side, bid: Side, s: &Strategy) -> (Vec<f64>, Vec<f64>) {
    let grid = s.grid();
    let dt = grid.dt();
    let (a_up, a_dn) = (kappa * ask.shape, kappa * bid.shape);
    let footprint = |size: f64| -> (f64, f64) {
        let (buy, sell) = (size.max(0.0), (-size).max(0.0));
        (
            (1.0 - ask.alpha) / ask.depth * buy + bid.alpha / bid.depth * sell,
            (1.0 - bid.alpha) / bid.depth * sell + ask.alpha / ask.depth * buy,
        )
    };
    let mut up = Vec::with_capacity(grid.len());
    let mut dn = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let (mut xu, mut xd) = (0.0, 0.0);
        for k in 0..=n {
            let (ju, jd) = footprint(s.block_at(k));
            let lag = (n - k) as f64 * dt;
            xu += ju * (-a_up * lag).exp();
            xd += jd * (-a_dn * lag).exp();
            if k < n {
                let (ru, rd) = footprint(s.rate(k));
                let lag = (n - k - 1) as f64 * dt;
                xu += ru * (-a_up * lag).exp() * -(-a_up * dt).exp_m1() / a_up;
                xd += rd * (-a_dn * lag).exp() * -(-a_dn * dt).exp_m1() / a_dn;
            }
        }
        up.push(ask.eps + xu);
        dn.push(bid.eps + xd);
    }
    (up, dn)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Random coefficients with `α ∈ [0, 1/2]`.
pub fn random_side(rng: &mut ChaCha8Rng) -> Side {
    Side {
        shape: rng.random_range(0.2..3.0),
        depth: rng.random_range(0.2..3.0),
        alpha: rng.random_range(0.0..=0.5),
        eps: rng.random_range(0.0..0.1),
    }
}

/// Random mixed strategy: piecewise-constant rates plus a few blocks.
pub fn random_strategy(rng: &mut ChaCha8Rng, grid: TimeGrid) -> Strategy {
    let mut rates = Vec::with_capacity(grid.steps());
    let mut r = 0.0;
    for i in 0..grid.steps() {
        if i % 8 == 0 {
            r = rng.random_range(-3.0..3.0);
        }
        rates.push(r);
    }
    let mut blocks = Vec::new();
    let mut index = 0;
    while blocks.len() < 6 {
        index += rng.random_range(1..grid.len() / 6);
        if index >= grid.len() {
            break;
        }
        blocks.push(Block { index, size: rng.random_range(-2.0..2.0) });
    }
    Strategy::new(grid, rng.random_range(-1.0..1.0), rates, blocks).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_grid(steps: usize) -> TimeGrid {
    make_grid(1.0, steps).unwrap()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    lobres::lab::fit_rate(points).unwrap().slope
}
