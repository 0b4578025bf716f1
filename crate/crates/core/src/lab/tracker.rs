use serde::{Deserialize, Serialize};

use super::spec::{Coefficient, FundamentalSpec, GridRule, MonteCarlo};
use super::{ito_path, mean, over_paths, std_dev, KappaLadder, LadderGrids};
use crate::error::{invalid, Result};
use crate::strategy::{tracker_positions, TrackerSpec};

/// Itô target `dθ^∞ = μ(t) dt + σ(t) dW` tracked at speed `κ^{1/2} M(t)`,
/// with declared bounds `|μ|, |σ| ≤ C` and `M ≥ M̲`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerBoundSpec {
    #[serde(default)]
    pub target_start: f64,
    #[serde(default)]
    pub target_drift: Coefficient,
    pub target_vol: Coefficient,
    pub speed: Coefficient,
    pub bound_c: f64,
    pub speed_floor: f64,
}

impl TrackerBoundSpec {
    /// `5 C² T / M̲`
    pub fn bound(&self, horizon: f64) -> f64 {
        5.0 * self.bound_c * self.bound_c * horizon / self.speed_floor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackerBoundRow {
    pub kappa: f64,
    /// Monte-Carlo mean of `sup_t κ^{1/2} |θ^∞_t − θ^κ_t|²`.
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub exceeds_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackerBoundReport {
    pub paths: usize,
    pub rows: Vec<TrackerBoundRow>,
}

impl TrackerBoundReport {
    /// CSV with columns `kappa,estimate,std_error,bound,exceeds_bound`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kappa,estimate,std_error,bound,exceeds_bound")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.kappa, r.estimate, r.std_error, r.bound, r.exceeds_bound)?;
        }
        Ok(())
    }
}

pub fn tracker_bound_experiment(
    spec: &TrackerBoundSpec,
    rule: &GridRule,
    ladder: &KappaLadder,
    mc: &MonteCarlo,
) -> Result<TrackerBoundReport> {
    if !(spec.bound_c >= 0.0 && spec.speed_floor > 0.0) {
        return invalid("tracker bounds need C >= 0 and a speed floor > 0");
    }
    let grids = LadderGrids::new(rule, ladder.values())?;
    let mut speeds = Vec::with_capacity(grids.grids.len());
    for grid in &grids.grids {
        for (name, c) in [("drift", &spec.target_drift), ("volatility", &spec.target_vol)] {
            let sup = c.sup_abs(grid);
            if sup > spec.bound_c {
                return invalid(format!(
                    "target {name} reaches {sup}, above the declared bound C = {}",
                    spec.bound_c
                ));
            }
        }
        let speed = spec.speed.sample(*grid)?;
        if speed.min() < spec.speed_floor {
            return invalid(format!(
                "tracker speed M reaches {}, below the declared floor {}",
                speed.min(),
                spec.speed_floor
            ));
        }
        speeds.push(speed);
    }
    let target_spec = FundamentalSpec {
        s0: spec.target_start,
        drift: spec.target_drift.clone(),
        vol: spec.target_vol.clone(),
    };

    let per_path = over_paths(mc.paths, |p| {
        let fine = grids.increments(mc.seed, p);
        ladder
            .values()
            .iter()
            .zip(&grids.grids)
            .zip(&speeds)
            .map(|((&kappa, grid), speed)| {
                let target = ito_path(&target_spec, grid, &grids.restrict(&fine, grid)?)?;
                let tracker = TrackerSpec { target, speed: speed.clone(), kappa, initial: None };
                let theta = tracker_positions(&tracker)?;
                let sup = tracker
                    .target
                    .values()
                    .iter()
                    .zip(theta.values())
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b) * (a - b)));
                Ok(kappa.sqrt() * sup)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let bound = spec.bound(rule.horizon);
    let rows = ladder
        .values()
        .iter()
        .enumerate()
        .map(|(k, &kappa)| {
            let v: Vec<f64> = per_path.iter().map(|row| row[k]).collect();
            let estimate = mean(&v);
            TrackerBoundRow {
                kappa,
                estimate,
                std_error: std_dev(&v) / (v.len() as f64).sqrt(),
                bound,
                exceeds_bound: estimate > bound,
            }
        })
        .collect();
    Ok(TrackerBoundReport { paths: mc.paths, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(vol: f64) -> TrackerBoundSpec {
        TrackerBoundSpec {
            target_start: 1.0,
            target_drift: Coefficient::Constant(0.0),
            target_vol: Coefficient::Constant(vol),
            speed: Coefficient::Constant(1.0),
            bound_c: 1.0,
            speed_floor: 1.0,
        }
    }

    #[test]
    fn constant_target_gives_zero() {
        let ladder = KappaLadder::geometric(16.0, 4.0, 3).unwrap();
        let r = tracker_bound_experiment(
            &spec(0.0),
            &GridRule::default(),
            &ladder,
            &MonteCarlo { paths: 4, seed: 1 },
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| row.estimate == 0.0 && !row.exceeds_bound));
        assert_eq!(r.rows[0].bound, 5.0);
    }

    #[test]
    fn declared_bounds_are_checked() {
        let ladder = KappaLadder::geometric(16.0, 4.0, 2).unwrap();
        let mc = MonteCarlo { paths: 2, seed: 1 };
        assert!(tracker_bound_experiment(&spec(1.5), &GridRule::default(), &ladder, &mc).is_err());
        let mut slow = spec(1.0);
        slow.speed = Coefficient::Constant(0.5);
        assert!(tracker_bound_experiment(&slow, &GridRule::default(), &ladder, &mc).is_err());
    }
}
