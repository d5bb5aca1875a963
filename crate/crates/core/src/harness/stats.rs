use std::path::Path;

use super::runner::Row;
use crate::error::{Error, Result};
use crate::estimators::Method;

/// Aggregate of one (estimator, objective, T, λ, σ, ν) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub estimator: String,
    pub objective: String,
    pub d: usize,
    pub budget: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub nu: f64,
    /// Successful rows aggregated.
    pub n: usize,
    /// Failure-flagged rows excluded from the statistics.
    pub failures: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single row).
    pub std: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    /// Cells left out because every row failed.
    pub omitted: Vec<String>,
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n − 1) standard deviation; 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

type CellKey = (String, String, usize, u64, u64, u64);

/// Mean, standard deviation and median of rel_error per cell, in order of
/// first appearance.
pub fn summarize(rows: &[Row]) -> Summary {
    let mut keys: Vec<CellKey> = Vec::new();
    let mut groups: Vec<(Vec<f64>, usize, &Row)> = Vec::new();
    for row in rows {
        let key = (
            row.estimator.clone(),
            row.objective.clone(),
            row.budget,
            row.lambda.to_bits(),
            row.sigma.to_bits(),
            row.nu.to_bits(),
        );
        let idx = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                groups.push((Vec::new(), 0, row));
                keys.len() - 1
            }
        };
        match (row.failed, row.rel_error) {
            (false, Some(e)) => groups[idx].0.push(e),
            _ => groups[idx].1 += 1,
        }
    }
    let mut summary = Summary::default();
    for (errors, failures, first) in groups {
        if errors.is_empty() {
            summary.omitted.push(format!(
                "{} on {} T={} lambda={} sigma={} nu={}: all {failures} rows failed",
                first.estimator, first.objective, first.budget, first.lambda, first.sigma, first.nu
            ));
            continue;
        }
        summary.cells.push(CellSummary {
            estimator: first.estimator.clone(),
            objective: first.objective.clone(),
            d: first.d,
            budget: first.budget,
            lambda: first.lambda,
            sigma: first.sigma,
            nu: first.nu,
            n: errors.len(),
            failures,
            mean: mean(&errors),
            std: sample_std(&errors),
            median: median(&errors),
        });
    }
    summary
}

/// Least-squares fit of log mean-rel-error against log T.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub estimator: Method,
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 when the fit is exact or has 2 points).
    pub stderr: f64,
    pub theory_exponent: Option<f64>,
    pub t_range: (usize, usize),
    pub points: usize,
}

/// Predicted exponent of T for a fixed λ, when one is known:
/// MC −1/2; two-batch GP estimator −ν/d − 1/2 noiseless and −1/2 with
/// constant noise; surrogate-only GP estimator −ν/(2ν + d) with noise.
pub fn theory_exponent(method: Method, nu: f64, d: usize, sigma: f64) -> Option<f64> {
    let d = d as f64;
    match method {
        Method::Mc => Some(-0.5),
        Method::MvsLmc if sigma == 0.0 => Some(-nu / d - 0.5),
        Method::MvsLmc => Some(-0.5),
        Method::Mvs if sigma > 0.0 => Some(-nu / (2.0 * nu + d)),
        _ => None,
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, stderr(b))`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// Fits the rate of `estimator` over the summarized cells, optionally
/// restricted to the budgets in `t_sweep`. The cells must describe a single
/// (objective, λ, σ, ν) regime.
pub fn fit_rate(cells: &[CellSummary], estimator: Method, t_sweep: Option<&[usize]>) -> Result<RateFit> {
    let mut chosen: Vec<&CellSummary> = cells
        .iter()
        .filter(|c| c.estimator == estimator.id())
        .filter(|c| t_sweep.is_none_or(|ts| ts.contains(&c.budget)))
        .collect();
    chosen.sort_by_key(|c| c.budget);
    let Some(first) = chosen.first() else {
        return Err(Error::DegenerateFit(format!("no cells for estimator {estimator}")));
    };
    if chosen.iter().any(|c| {
        c.objective != first.objective
            || c.lambda != first.lambda
            || c.sigma != first.sigma
            || c.nu != first.nu
            || c.d != first.d
    }) {
        return Err(Error::DegenerateFit(
            "cells span several (objective, lambda, sigma, nu) regimes; filter first".into(),
        ));
    }
    if chosen.windows(2).any(|w| w[0].budget == w[1].budget) {
        return Err(Error::DegenerateFit("duplicate T values".into()));
    }
    if chosen.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 T values, got {}", chosen.len())));
    }
    if let Some(c) = chosen.iter().find(|c| c.mean.is_nan() || c.mean <= 0.0) {
        return Err(Error::DegenerateFit(format!("mean error {} at T={} is not positive", c.mean, c.budget)));
    }
    let xs: Vec<f64> = chosen.iter().map(|c| (c.budget as f64).ln()).collect();
    let ys: Vec<f64> = chosen.iter().map(|c| c.mean.ln()).collect();
    let (slope, intercept, stderr) = ols(&xs, &ys);
    Ok(RateFit {
        estimator,
        slope,
        intercept,
        stderr,
        theory_exponent: theory_exponent(estimator, first.nu, first.d, first.sigma),
        t_range: (chosen[0].budget, chosen[chosen.len() - 1].budget),
        points: chosen.len(),
    })
}
