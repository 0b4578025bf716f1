//! Executes a [`RunConfig`], evaluates its gates and writes the artifacts.
//!
//! Every run writes CSV files with header rows and `summary.json`. The
//! summary carries the schema version, the configuration hash, the seed,
//! the Gaussian sampler version and one entry per gate. Nothing
//! time-dependent is written, so reruns are byte-identical.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::book::{evolve_spreads, reference_price};
use crate::config::{ExperimentKind, RunConfig};
use crate::error::{Error, Result};
use crate::lab::{
    ito_path, l2_convergence_experiment, lemma_closed_form_limit, lemma_jump_experiment,
    remark1_experiment, theorem1_experiment, tracker_bound_experiment, utility_experiment,
    ConvergenceReport, LadderGrids, LemmaReport, StrategySpec, TrackerBoundReport, UtilityReport,
};
use crate::paths::GAUSSIAN_METHOD;
use crate::strategy::{diagnostics, Strategy, StrategyDiagnostics};
use crate::wealth::{ac_wealth, ow_wealth, safe_account, WealthPath};

pub const SCHEMA_VERSION: u32 = 1;

/// Relative tolerance of the `X = φ⁰ + φ S^φ` check in simulations.
const IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Gate {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub gaussian_method: String,
    pub gates: Vec<Gate>,
    pub all_passed: bool,
    pub results: serde_json::Value,
}

/// Single-path simulation at one `κ`.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub kappa: f64,
    pub strategy: Strategy,
    pub fundamental: crate::paths::SampledPath,
    pub ow: WealthPath,
    pub ac: Option<WealthPath>,
    pub cash: crate::paths::SampledPath,
    pub spreads: crate::book::SpreadPaths,
    pub reference: crate::book::ReferencePricePath,
    pub identity_error: f64,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Simulation(Box<Simulation>),
    Convergence(ConvergenceReport),
    Lemma(LemmaReport),
    TrackerBound(TrackerBoundReport),
    Utility(UtilityReport),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Summary,
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SimulationResults {
    kappa: f64,
    terminal_wealth_ow: f64,
    terminal_wealth_ac: Option<f64>,
    spread_cost: f64,
    impact_cost: f64,
    block_cost: f64,
    identity_error: f64,
    total_variation: f64,
    sup_rate: f64,
    block_count: usize,
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn slope_gate(report: &ConvergenceReport, max_slope: f64) -> Gate {
    match (&report.fit, report.zero_error_kappas.len() == report.rows.len()) {
        (_, true) => Gate::new("slope", true, "all errors are zero".into()),
        (Some(fit), _) => Gate::new(
            "slope",
            fit.slope <= max_slope,
            format!("fitted slope {:.4} (required <= {max_slope})", fit.slope),
        ),
        (None, _) => Gate::new("slope", false, "fewer than 3 positive errors".into()),
    }
}

fn convergence_gates(kind: ExperimentKind, config: &RunConfig, r: &ConvergenceReport) -> Vec<Gate> {
    let all_zero = r.zero_error_kappas.len() == r.rows.len();
    let upper = &r.rows[r.rows.len() / 2..];
    let mut gates = Vec::new();
    match kind {
        ExperimentKind::Remark1 => {
            let scaled: Vec<f64> = r.rows.iter().map(|x| x.sqrt_kappa_x_err).collect();
            gates.push(Gate::new(
                "sqrt_kappa_x_err_decreasing",
                all_zero || strictly_decreasing(&scaled),
                format!("kappa^(1/2) e(kappa) = {}", fmt_list(&scaled)),
            ));
            gates.push(slope_gate(r, config.gates.max_slope.unwrap_or(-0.9)));
        }
        _ => {
            let scaled: Vec<f64> = upper.iter().map(|x| x.kappa_x_err).collect();
            gates.push(Gate::new(
                "kappa_x_err_decreasing_upper_half",
                all_zero || strictly_decreasing(&scaled),
                format!("kappa e(kappa) on the upper half = {}", fmt_list(&scaled)),
            ));
            let default_slope = if kind == ExperimentKind::Theorem1 { Some(-1.5) } else { None };
            if let Some(max_slope) = config.gates.max_slope.or(default_slope) {
                gates.push(slope_gate(r, max_slope));
            }
            if kind == ExperimentKind::L2 {
                // equal path errors make the two norms agree up to rounding
                let ok = r.rows.iter().all(|x| x.rms_err >= x.mean_err * (1.0 - 1e-12));
                gates.push(Gate::new("l2_dominates_l1", ok, "rms_err >= mean_err per kappa".into()));
            }
        }
    }
    gates
}

fn lemma_gates(config: &RunConfig, r: &LemmaReport) -> Vec<Gate> {
    let last = r.rows.last().expect("non-empty ladder");
    let deterministic = config.fundamental.is_deterministic();
    let mut gates = Vec::new();
    let expected = config.lemma.as_ref().and_then(|l| l.expected_limit);
    if deterministic || expected.is_some() {
        let target = expected.unwrap_or(r.closed_form_limit);
        let tol = config.gates.limit_tolerance.unwrap_or(0.02);
        let gap = (last.mean_diff - target).abs();
        gates.push(Gate::new(
            "limit",
            gap <= tol,
            format!(
                "D({}) = {:.6}, limit {target:.6}, |gap| = {gap:.3e} (tolerance {tol})",
                last.kappa, last.mean_diff
            ),
        ));
    }
    let min_fraction =
        config.gates.min_positive_fraction.unwrap_or(if deterministic { 1.0 } else { 0.95 });
    gates.push(Gate::new(
        "positive_fraction",
        last.positive_fraction >= min_fraction,
        format!(
            "D({}) > 0 on {:.4} of paths (required >= {min_fraction})",
            last.kappa, last.positive_fraction
        ),
    ));
    gates
}

fn tracker_gates(config: &RunConfig, r: &TrackerBoundReport) -> Vec<Gate> {
    let k = config.gates.standard_errors.unwrap_or(3.0);
    let worst = r
        .rows
        .iter()
        .map(|x| x.estimate - x.bound - k * x.std_error)
        .fold(f64::NEG_INFINITY, f64::max);
    let detail: Vec<String> = r
        .rows
        .iter()
        .map(|x| format!("{}: {:.4} +- {:.4}", x.kappa, x.estimate, x.std_error))
        .collect();
    vec![Gate::new(
        "bound",
        worst <= 0.0,
        format!("bound {} (+{k} SE); estimates {}", r.rows[0].bound, detail.join(", ")),
    )]
}

fn utility_gates(config: &RunConfig, r: &UtilityReport) -> Result<Vec<Gate>> {
    let u = config.utility.as_ref().expect("validated");
    let candidate = r
        .row(u.kappa, 1.0)
        .ok_or_else(|| Error::InvalidArgument("candidate tracker missing from the table".into()))?;
    let mut gates = Vec::new();
    for &c in u.multipliers.iter().filter(|&&c| c != 1.0) {
        let other = r.row(u.kappa, c).expect("every multiplier is simulated");
        gates.push(Gate::new(
            &format!("non_inferior_to_{c}"),
            candidate.ce >= other.ce - other.half_width,
            format!(
                "CE_1 = {:.6}, CE_{c} = {:.6}, half-width {:.6}",
                candidate.ce, other.ce, other.half_width
            ),
        ));
    }
    let ladder = config.ladder()?;
    let ladder_rows: Vec<_> =
        ladder.values().iter().filter_map(|&k| r.row(k, 1.0)).collect();
    let ces: Vec<f64> = ladder_rows.iter().map(|x| x.ce).collect();
    let increasing = ces.windows(2).all(|w| w[1] > w[0]);
    let last = ladder_rows.last().expect("non-empty ladder");
    let below = last.ce <= r.frictionless_ce + last.half_width;
    gates.push(Gate::new(
        "ce_increases_toward_frictionless",
        increasing && below,
        format!("CE over kappa = {}, frictionless {:.6}", fmt_list(&ces), r.frictionless_ce),
    ));
    Ok(gates)
}

fn simulate(config: &RunConfig) -> Result<Simulation> {
    let sim = config.simulate.clone().unwrap_or_default();
    let grids = LadderGrids::new(&config.grid, &[sim.kappa])?;
    let grid = grids.grids[0];
    let book = config.book.build(grid, sim.kappa)?;
    let strategy = config.strategy.build(grid)?;
    let dw = grids.increments(config.monte_carlo.seed, 0);
    let fundamental = ito_path(&config.fundamental, &grid, &dw)?;
    let ow = ow_wealth(&book, &strategy, &fundamental, sim.initial_wealth)?;
    let ac = if strategy.has_blocks() {
        None
    } else {
        Some(ac_wealth(&book, &strategy, &fundamental, sim.initial_wealth)?)
    };
    let cash = safe_account(&book, &strategy, &fundamental, sim.initial_wealth)?.cash;
    let spreads = evolve_spreads(&book, &strategy)?;
    let reference = reference_price(&book, &strategy, &fundamental)?;
    let positions = strategy.positions();
    let identity_error = (0..grid.len())
        .map(|i| {
            let held = positions.at(i) * reference.values.at(i);
            let scale = 1.0_f64.max(cash.at(i).abs() + held.abs());
            (ow.wealth.at(i) - cash.at(i) - held).abs() / scale
        })
        .fold(0.0, f64::max);
    Ok(Simulation {
        kappa: sim.kappa,
        strategy,
        fundamental,
        ow,
        ac,
        cash,
        spreads,
        reference,
        identity_error,
    })
}

/// Runs the experiment without touching the file system.
pub fn execute(config: &RunConfig) -> Result<(Outcome, Vec<Gate>)> {
    config.validate()?;
    let ladder = config.ladder()?;
    let (book, fund, rule, mc) = (&config.book, &config.fundamental, &config.grid, &config.monte_carlo);
    Ok(match config.experiment {
        ExperimentKind::Simulate => {
            let s = simulate(config)?;
            let gate = Gate::new(
                "bookkeeping_identity",
                s.identity_error <= IDENTITY_TOLERANCE,
                format!("max relative |X - cash - position * reference| = {:.3e}", s.identity_error),
            );
            (Outcome::Simulation(Box::new(s)), vec![gate])
        }
        kind @ (ExperimentKind::Theorem1 | ExperimentKind::Remark1 | ExperimentKind::L2) => {
            let report = match kind {
                ExperimentKind::Theorem1 => {
                    theorem1_experiment(book, &config.strategy, fund, rule, &ladder, mc)?
                }
                ExperimentKind::Remark1 => {
                    let StrategySpec::Rate { rate, .. } = &config.strategy else {
                        unreachable!("validated")
                    };
                    remark1_experiment(book, rate, fund, rule, &ladder, mc)?
                }
                _ => {
                    let bounds = config.bounds.as_ref().expect("validated");
                    l2_convergence_experiment(book, &config.strategy, fund, rule, &ladder, mc, bounds)?
                }
            };
            let gates = convergence_gates(kind, config, &report);
            (Outcome::Convergence(report), gates)
        }
        ExperimentKind::LemmaJump => {
            let width = config.lemma.clone().unwrap_or_default().width;
            let report =
                lemma_jump_experiment(&config.strategy, width, book, fund, rule, &ladder, mc)?;
            let gates = lemma_gates(config, &report);
            (Outcome::Lemma(report), gates)
        }
        ExperimentKind::TrackerBound => {
            let spec = config.tracker.as_ref().expect("validated");
            let report = tracker_bound_experiment(spec, rule, &ladder, mc)?;
            let gates = tracker_gates(config, &report);
            (Outcome::TrackerBound(report), gates)
        }
        ExperimentKind::Utility => {
            let u = config.utility.as_ref().expect("validated");
            let report = utility_experiment(u, book, fund, rule, &ladder, mc)?;
            let gates = utility_gates(config, &report)?;
            (Outcome::Utility(report), gates)
        }
    })
}

fn write_file(
    dir: &Path,
    name: &str,
    files: &mut Vec<PathBuf>,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    let mut w = BufWriter::new(fs::File::create(&path)?);
    f(&mut w)?;
    w.flush()?;
    files.push(path);
    Ok(())
}

fn write_simulation(dir: &Path, s: &Simulation, files: &mut Vec<PathBuf>) -> Result<()> {
    write_file(dir, "strategy.csv", files, |w| s.strategy.write_csv(w))?;
    write_file(dir, "wealth_ow.csv", files, |w| s.ow.write_csv(w))?;
    if let Some(ac) = &s.ac {
        write_file(dir, "wealth_ac.csv", files, |w| ac.write_csv(w))?;
    }
    let positions = s.strategy.positions();
    write_file(dir, "book.csv", files, |w| {
        writeln!(
            w,
            "t,ask,bid,ask_pre_jump,bid_pre_jump,fundamental,reference,reference_pre_jump,position,cash"
        )?;
        for (i, t) in s.strategy.grid().times().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                t,
                s.spreads.ask.at(i),
                s.spreads.bid.at(i),
                s.spreads.ask_pre_jump.at(i),
                s.spreads.bid_pre_jump.at(i),
                s.fundamental.at(i),
                s.reference.values.at(i),
                s.reference.pre_jump.at(i),
                positions.at(i),
                s.cash.at(i)
            )?;
        }
        Ok(())
    })
}

fn results_json(outcome: &Outcome) -> Result<serde_json::Value> {
    let value = match outcome {
        Outcome::Simulation(s) => {
            let StrategyDiagnostics { total_variation, sup_rate, block_count } =
                diagnostics(&s.strategy);
            serde_json::to_value(SimulationResults {
                kappa: s.kappa,
                terminal_wealth_ow: s.ow.terminal(),
                terminal_wealth_ac: s.ac.as_ref().map(WealthPath::terminal),
                spread_cost: s.ow.spread_cost.last(),
                impact_cost: s.ow.impact_cost.last(),
                block_cost: s.ow.block_cost.last(),
                identity_error: s.identity_error,
                total_variation,
                sup_rate,
                block_count,
            })
        }
        Outcome::Convergence(r) => serde_json::to_value(r),
        Outcome::Lemma(r) => serde_json::to_value(r),
        Outcome::TrackerBound(r) => serde_json::to_value(r),
        Outcome::Utility(r) => serde_json::to_value(r),
    };
    value.map_err(|e| Error::InvalidArgument(format!("cannot serialize results: {e}")))
}

/// Runs the experiment and writes its CSV files and `summary.json` to `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutput> {
    let (outcome, gates) = execute(config)?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    match &outcome {
        Outcome::Simulation(s) => write_simulation(out_dir, s, &mut files)?,
        Outcome::Convergence(r) => write_file(out_dir, "convergence.csv", &mut files, |w| r.write_csv(w))?,
        Outcome::Lemma(r) => write_file(out_dir, "lemma.csv", &mut files, |w| r.write_csv(w))?,
        Outcome::TrackerBound(r) => write_file(out_dir, "tracker_bound.csv", &mut files, |w| r.write_csv(w))?,
        Outcome::Utility(r) => write_file(out_dir, "utility.csv", &mut files, |w| r.write_csv(w))?,
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        experiment: config.experiment.name().to_string(),
        config_hash: config.hash()?,
        seed: config.monte_carlo.seed,
        gaussian_method: GAUSSIAN_METHOD.to_string(),
        all_passed: gates.iter().all(|g| g.passed),
        gates,
        results: results_json(&outcome)?,
    };
    write_file(out_dir, "summary.json", &mut files, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    Ok(RunOutput { summary, outcome, files })
}

/// Dry-run report: configuration checks and cost estimates, no simulation.
#[derive(Debug, Clone, Serialize)]
pub struct DryRun {
    pub experiment: String,
    pub kappas: Vec<f64>,
    pub paths: usize,
    /// Grid steps simulated in total, over all paths, ladder values and strategies.
    pub total_steps: f64,
    pub estimated_seconds: f64,
    pub estimated_memory_bytes: f64,
    pub closed_form_limit: Option<f64>,
    pub warnings: Vec<String>,
}

impl std::fmt::Display for DryRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ok: {} config is valid", self.experiment)?;
        writeln!(f, "  kappa values: {}", self.kappas.len())?;
        writeln!(f, "  paths: {}", self.paths)?;
        writeln!(f, "  grid steps: {:.3e}", self.total_steps)?;
        writeln!(f, "  estimated time: {:.1} s (single thread)", self.estimated_seconds)?;
        writeln!(f, "  estimated memory: {:.1} MB", self.estimated_memory_bytes / 1e6)?;
        if let Some(l) = self.closed_form_limit {
            writeln!(f, "  closed-form limit: {l}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Rough single-thread cost of one grid step of one wealth evaluation.
const SECONDS_PER_STEP: f64 = 4e-8;

pub fn validate(config: &RunConfig) -> Result<DryRun> {
    config.validate()?;
    let kappas = config.kappas()?;
    let paths = if config.experiment == ExperimentKind::Simulate { 1 } else { config.monte_carlo.paths };
    let evaluations = match config.experiment {
        ExperimentKind::Theorem1
        | ExperimentKind::Remark1
        | ExperimentKind::L2
        | ExperimentKind::LemmaJump => 2.0,
        ExperimentKind::Simulate => 3.0,
        ExperimentKind::Utility => {
            let u = config.utility.as_ref().expect("validated");
            (u.multipliers.len() + kappas.len()) as f64 / kappas.len() as f64
        }
        ExperimentKind::TrackerBound => 1.0,
    };
    let steps: Vec<f64> = kappas
        .iter()
        .map(|&k| config.grid.steps_for(k) as f64)
        .collect();
    let finest = steps.iter().copied().fold(0.0, f64::max);
    let total_steps = steps.iter().sum::<f64>() * evaluations * paths as f64;
    let estimated_memory_bytes = 8.0 * (paths as f64 * kappas.len() as f64 * 4.0 + 16.0 * finest);
    let closed_form_limit = if config.experiment == ExperimentKind::LemmaJump {
        let kappa = *kappas.last().expect("non-empty ladder");
        let grid = config.grid.grid_for(kappa)?;
        let book = config.book.build(grid, kappa)?;
        Some(lemma_closed_form_limit(&book, &config.strategy.build(grid)?)?)
    } else {
        None
    };
    let mut warnings = Vec::new();
    if total_steps > config.budget.max_steps {
        warnings.push(format!(
            "{total_steps:.3e} grid steps exceed the budget of {:.3e} (budget.max_steps)",
            config.budget.max_steps
        ));
    }
    Ok(DryRun {
        experiment: config.experiment.name().to_string(),
        kappas,
        paths,
        total_steps,
        estimated_seconds: total_steps * SECONDS_PER_STEP,
        estimated_memory_bytes,
        closed_form_limit,
        warnings,
    })
}
