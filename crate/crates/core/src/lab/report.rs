use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares fit of `log e = intercept + slope · log κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: usize,
    pub excluded_zeros: usize,
}

/// Fits a power law to `(κ, e)` pairs; pairs with `e = 0` are skipped.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|&(k, e)| (k.ln(), e.ln()))
        .collect();
    let excluded_zeros = points.iter().filter(|(_, e)| *e == 0.0).count();
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 3 positive errors, got {}",
            used.len()
        )));
    }
    if used.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidArgument("rate fit needs finite positive kappa and errors".into()));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("rate fit needs distinct kappa values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateFit { slope, intercept, residual: (ss / n).sqrt(), points: used.len(), excluded_zeros })
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, p)
}

pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Which path statistic is the headline error `e(κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMetric {
    /// Mean over paths of the pathwise sup-difference.
    MeanSup,
    /// `(E[sup |difference|²])^{1/2}`.
    L2Sup,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub kappa: f64,
    pub mean_err: f64,
    pub rms_err: f64,
    pub p95_err: f64,
    /// `κ · e(κ)`
    pub kappa_x_err: f64,
    /// `κ^{1/2} · e(κ)`
    pub sqrt_kappa_x_err: f64,
    /// Fitted slope over the ladder up to this row; `None` below 3 positive points.
    pub slope_so_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub metric: ErrorMetric,
    pub paths: usize,
    pub rows: Vec<ConvergenceRow>,
    pub fit: Option<RateFit>,
    /// Ladder values whose headline error is exactly zero.
    pub zero_error_kappas: Vec<f64>,
}

impl ConvergenceReport {
    /// Builds the report from per-κ pathwise sup-differences.
    pub fn from_path_errors(
        kappas: &[f64],
        errors: &[Vec<f64>],
        metric: ErrorMetric,
    ) -> Result<Self> {
        if kappas.len() != errors.len() {
            return Err(Error::InvalidArgument("one error sample per ladder value expected".into()));
        }
        let mut rows = Vec::with_capacity(kappas.len());
        let mut headline = Vec::with_capacity(kappas.len());
        for (&kappa, errs) in kappas.iter().zip(errors) {
            if errs.is_empty() {
                return Err(Error::InsufficientData(format!("no paths at kappa = {kappa}")));
            }
            let n = errs.len() as f64;
            let mean_err = errs.iter().sum::<f64>() / n;
            let rms_err = (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
            let e = match metric {
                ErrorMetric::MeanSup => mean_err,
                ErrorMetric::L2Sup => rms_err,
            };
            headline.push((kappa, e));
            let slope_so_far = fit_rate(&headline).ok().map(|f| f.slope);
            rows.push(ConvergenceRow {
                kappa,
                mean_err,
                rms_err,
                p95_err: percentile(errs, 0.95),
                kappa_x_err: kappa * e,
                sqrt_kappa_x_err: kappa.sqrt() * e,
                slope_so_far,
            });
        }
        let zero_error_kappas = headline.iter().filter(|p| p.1 == 0.0).map(|p| p.0).collect();
        Ok(Self {
            metric,
            paths: errors.first().map_or(0, Vec::len),
            fit: fit_rate(&headline).ok(),
            rows,
            zero_error_kappas,
        })
    }

    /// Headline errors `e(κ)` in ladder order.
    pub fn errors(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match self.metric {
                ErrorMetric::MeanSup => r.mean_err,
                ErrorMetric::L2Sup => r.rms_err,
            })
            .collect()
    }

    /// CSV with columns `kappa,mean_err,p95_err,kappa_x_err,slope_so_far`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kappa,mean_err,p95_err,kappa_x_err,slope_so_far")?;
        for r in &self.rows {
            let slope = r.slope_so_far.map(|s| s.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", r.kappa, r.mean_err, r.p95_err, r.kappa_x_err, slope)?;
        }
        Ok(())
    }
}
