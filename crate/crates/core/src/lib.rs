//! Block-shaped limit order book (Obizhaeva/Wang type) with transient price
//! impact, its reduced-form Almgren/Chriss limit, and Monte-Carlo experiments
//! that measure how fast the two wealth processes approach each other as the
//! book's resilience grows.
//!
//! Module map:
//! - [`paths`]: time grids, sampled paths, seeded Brownian and Itô paths.
//! - [`book`]: bid/ask spread and reference-price dynamics.
//! - [`strategy`]: finite-variation strategies and the tracker families.
//! - [`wealth`]: order-book wealth, safe account, reduced-form wealth.
//! - [`lab`]: high-resilience limit experiments and rate fitting.
//! - [`config`] / [`runner`]: file-driven experiment orchestration.

pub mod book;
pub mod config;
pub mod error;
pub(crate) mod kernel;
pub mod lab;
pub mod paths;
pub mod runner;
pub mod strategy;
pub mod wealth;

pub use book::{evolve_spreads, reference_price, scaled_excess_spread, BookParams, Side, SideParams};
pub use error::{Error, Result};
pub use paths::{make_grid, RandomSource, SampledPath, TimeGrid};
pub use strategy::{Block, Strategy};
pub use wealth::{ac_wealth, ow_wealth, safe_account, SafeAccountPath, WealthPath};
