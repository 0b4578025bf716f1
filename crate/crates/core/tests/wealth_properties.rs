mod common;

use common::{book, log_slope, unit_grid, Side};
use lobres::paths::sample_brownian;
use lobres::{
    ac_wealth, make_grid, ow_wealth, reference_price, safe_account, BookParams, Block,
    RandomSource, SampledPath, SideParams, Strategy,
};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

fn side() -> impl proptest::strategy::Strategy<Value = Side> {
    (0.2..3.0f64, 0.2..3.0f64, 0.0..=0.5f64, 0.0..0.1f64)
        .prop_map(|(shape, depth, alpha, eps)| Side { shape, depth, alpha, eps })
}

fn trading(steps: usize) -> impl proptest::strategy::Strategy<Value = (f64, Vec<f64>, Vec<(usize, f64)>)> {
    (
        -2.0..2.0f64,
        prop::collection::vec(-4.0..4.0f64, steps),
        prop::collection::btree_map(0..steps, -3.0..3.0f64, 0..5)
            .prop_map(|m| m.into_iter().collect::<Vec<_>>()),
    )
}

fn build(steps: usize, initial: f64, rates: Vec<f64>, blocks: &[(usize, f64)]) -> Strategy {
    let blocks = blocks.iter().map(|&(index, size)| Block { index, size }).collect();
    Strategy::new(unit_grid(steps), initial, rates, blocks).unwrap()
}

fn brownian_price(steps: usize, seed: u64, s0: f64, vol: f64) -> SampledPath {
    let g = unit_grid(steps);
    sample_brownian(&g, &RandomSource::new(seed, 0)).map(|w| s0 + vol * w).unwrap()
}

/// Book whose coefficients wiggle in time around the given constants.
fn varying_book(steps: usize, kappa: f64, ask: Side, bid: Side, wobble: f64) -> BookParams {
    let g = unit_grid(steps);
    let vary = |base: f64, f: f64| SampledPath::from_fn(g, |t| base * (1.0 + wobble * (f * t).sin())).unwrap();
    let side = |c: Side, f: f64| SideParams {
        shape: vary(c.shape, f),
        depth: vary(c.depth, f + 1.0),
        permanent: SampledPath::from_fn(g, |t| c.alpha * (0.5 + 0.5 * (f * t).cos())).unwrap(),
        base_spread: vary(c.eps, f + 2.0),
    };
    BookParams::new(kappa, side(ask, 5.0), side(bid, 3.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wealth_equals_cash_plus_marked_position(
        ask in side(),
        bid in side(),
        kappa in 0.5..2000.0f64,
        wobble in 0.0..0.9f64,
        (initial, rates, blocks) in trading(96),
        seed in any::<u64>(),
        x0 in -10.0..10.0f64,
    ) {
        let p = varying_book(96, kappa, ask, bid, wobble);
        let s = build(96, initial, rates, &blocks);
        let fund = brownian_price(96, seed, 50.0, 3.0);
        let x = ow_wealth(&p, &s, &fund, x0).unwrap();
        let cash = safe_account(&p, &s, &fund, x0).unwrap().cash;
        let reference = reference_price(&p, &s, &fund).unwrap().values;
        let phi = s.positions();
        for i in 0..phi.grid().len() {
            let marked = cash.at(i) + phi.at(i) * reference.at(i);
            let scale = 1.0 + cash.at(i).abs() + (phi.at(i) * reference.at(i)).abs();
            prop_assert!((x.wealth.at(i) - marked).abs() <= 1e-10 * scale,
                "i={} X={} marked={}", i, x.wealth.at(i), marked);
        }
    }

    #[test]
    fn cost_components_are_nonnegative_and_accumulate(
        ask in side(),
        bid in side(),
        kappa in 0.5..2000.0f64,
        wobble in 0.0..0.9f64,
        (initial, rates, blocks) in trading(64),
    ) {
        let p = varying_book(64, kappa, ask, bid, wobble);
        let s = build(64, initial, rates, &blocks);
        let fund = SampledPath::constant(*s.grid(), 10.0).unwrap();
        let x = ow_wealth(&p, &s, &fund, 0.0).unwrap();
        for cost in [&x.spread_cost, &x.impact_cost, &x.block_cost] {
            prop_assert!(cost.first() >= 0.0);
            for w in cost.values().windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn without_permanent_impact_trading_cannot_profit(
        ask in side(),
        bid in side(),
        kappa in 0.5..2000.0f64,
        (initial, rates, blocks) in trading(64),
        x0 in -10.0..10.0f64,
    ) {
        let ask = Side { alpha: 0.0, ..ask };
        let bid = Side { alpha: 0.0, ..bid };
        let s = build(64, initial, rates, &blocks);
        let fund = SampledPath::constant(*s.grid(), 10.0).unwrap();
        let x = ow_wealth(&book(*s.grid(), kappa, ask, bid), &s, &fund, x0).unwrap();
        prop_assert!(x.terminal() <= x0 + 1e-12);
    }

    #[test]
    fn flat_round_trips_lose_money_in_symmetric_books(
        side in side(),
        ask_shape in 0.2..3.0f64,
        kappa in 0.5..2000.0f64,
        (_, rates, blocks) in trading(64),
    ) {
        let s = build(64, 0.0, rates, &blocks);
        let mut closing = s.blocks();
        closing.push(Block { index: 64, size: -s.positions().at(63) - s.rate(63) * s.grid().dt() });
        let s = Strategy::new(*s.grid(), 0.0, s.rates().to_vec(), closing).unwrap();
        prop_assert!(s.positions().last().abs() < 1e-12);
        let p = book(*s.grid(), kappa, Side { shape: ask_shape, ..side }, side);
        let fund = SampledPath::constant(*s.grid(), 10.0).unwrap();
        let x = ow_wealth(&p, &s, &fund, 0.0).unwrap();
        prop_assert!(x.terminal() <= 1e-10, "terminal wealth {}", x.terminal());
    }
}

#[test]
fn permanent_impact_only_shifts_wealth_after_a_block() {
    let steps = 200;
    let g = unit_grid(steps);
    let theta = 1.3;
    let at = 40;
    let s = Strategy::new(g, 0.0, vec![0.0; steps], vec![Block { index: at, size: theta }]).unwrap();
    let fund = brownian_price(steps, 3, 20.0, 1.0);
    let x = |alpha: f64| {
        let side = Side { shape: 1.0, depth: 2.0, alpha, eps: 0.02 };
        ow_wealth(&book(g, 30.0, side, side), &s, &fund, 1.0).unwrap().wealth
    };
    let (without, with) = (x(0.0), x(0.4));
    for i in 0..g.len() {
        let expected = if i < at { 0.0 } else { 0.4 * theta * theta / 2.0 };
        assert!((with.at(i) - without.at(i) - expected).abs() < 1e-12, "i={i}");
    }
}

#[test]
fn block_round_trip_after_full_recovery() {
    let g = unit_grid(100);
    let (theta, eps, depth) = (2.0, 0.03, 1.5);
    let s = Strategy::new(
        g,
        0.0,
        vec![0.0; 100],
        vec![Block { index: 10, size: theta }, Block { index: 60, size: -theta }],
    )
    .unwrap();
    let fund = SampledPath::constant(g, 7.0).unwrap();
    for alpha in [0.0, 0.25, 0.5] {
        let side = Side { shape: 1.0, depth, alpha, eps };
        let x = ow_wealth(&book(g, 1e4, side, side), &s, &fund, 0.0).unwrap();
        let expected = -2.0 * eps * theta - (1.0 - alpha) * theta * theta / depth;
        assert!((x.terminal() - expected).abs() < 1e-12, "alpha={alpha}: {}", x.terminal());
    }
}

#[test]
fn reduced_form_constant_rate() {
    let g = unit_grid(1000);
    let (c, eps, shape, depth, kappa) = (1.5, 0.02, 2.0, 0.5, 40.0);
    let s = Strategy::from_rates(g, 0.0, vec![c; 1000]).unwrap();
    let fund = SampledPath::constant(g, 3.0).unwrap();
    for alpha in [0.0, 0.25] {
        let side = Side { shape, depth, alpha, eps };
        let x = ac_wealth(&book(g, kappa, side, side), &s, &fund, 0.0).unwrap();
        let lambda = (1.0 - alpha) / (kappa * shape * depth);
        let expected = -eps * c - lambda * c * c + alpha / depth * c * c / 2.0;
        assert!((x.terminal() - expected).abs() < 1e-12, "alpha={alpha}: {}", x.terminal());
        assert!((x.impact_cost.last() - lambda * c * c).abs() < 1e-12);
    }
}

#[test]
fn doubling_resilience_halves_reduced_form_impact() {
    let g = unit_grid(500);
    let s = Strategy::from_rate_fn(g, 0.5, |t| (6.0 * t).sin() + 0.3).unwrap();
    let fund = brownian_price(500, 11, 10.0, 0.5);
    let side = Side { shape: 1.2, depth: 0.7, alpha: 0.1, eps: 0.01 };
    let impact = |kappa: f64| ac_wealth(&book(g, kappa, side, side), &s, &fund, 0.0).unwrap().impact_cost.last();
    for kappa in [1.0, 16.0, 256.0] {
        let ratio = impact(kappa) / impact(2.0 * kappa);
        assert!((ratio - 2.0).abs() < 1e-12, "kappa={kappa}: {ratio}");
    }
}

#[test]
fn order_book_wealth_converges_under_refinement() {
    let terminal = |steps: usize| {
        let g = make_grid(1.0, steps).unwrap();
        let side = SideParams {
            shape: SampledPath::from_fn(g, |t| 1.0 + 0.5 * (3.0 * t).sin()).unwrap(),
            depth: SampledPath::from_fn(g, |t| 1.0 + 0.2 * t).unwrap(),
            permanent: SampledPath::constant(g, 0.2).unwrap(),
            base_spread: SampledPath::constant(g, 0.01).unwrap(),
        };
        let p = BookParams::new(8.0, side.clone(), side).unwrap();
        let s = Strategy::from_rate_fn(g, 0.0, |t| (4.0 * t).cos()).unwrap();
        let fund = SampledPath::from_fn(g, |t| 10.0 + (2.0 * t).sin()).unwrap();
        ow_wealth(&p, &s, &fund, 0.0).unwrap().terminal()
    };
    let reference = terminal(1 << 16);
    let points: Vec<(f64, f64)> = (6..12)
        .map(|m| {
            let n = 1usize << m;
            (n as f64, (terminal(n) - reference).abs())
        })
        .collect();
    let slope = log_slope(&points);
    assert!(slope <= -0.9, "refinement order {} below 0.9: {points:?}", -slope);
}

#[test]
fn wealth_inputs_must_share_a_grid() {
    let g = unit_grid(10);
    let side = Side { shape: 1.0, depth: 1.0, alpha: 0.0, eps: 0.0 };
    let p = book(g, 1.0, side, side);
    let s = Strategy::zero(unit_grid(20));
    let fund = SampledPath::constant(unit_grid(20), 1.0).unwrap();
    assert!(ow_wealth(&p, &s, &fund, 0.0).is_err());
    assert!(safe_account(&p, &s, &fund, 0.0).is_err());
    assert!(ac_wealth(&p, &s, &fund, 0.0).is_err());
}
