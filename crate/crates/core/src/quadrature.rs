//! Deterministic integration of `exp(-λ h)` over the unit cube.
//!
//! Up to four dimensions the closed tensor-product trapezoid rule is used with
//! `max(2, ⌊budget^{1/d}⌋)` nodes per axis. From five dimensions on a full grid
//! is out of reach, so a Kronecker low-discrepancy sequence with plain
//! averaging stands in; results on such grids are flagged approximate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::GpState;

/// Default node budget for surrogate integrals and ground truth.
pub const DEFAULT_BUDGET: usize = 100_000;

/// Node count for low-discrepancy ground truth in high dimension.
pub const HIGH_DIM_GROUND_TRUTH_NODES: usize = 1_000_000;

/// First dimension that switches from the trapezoid grid to quasi-random nodes.
pub const QMC_DIMENSION: usize = 5;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Trapezoid { points_per_dim: usize },
    QuasiMonteCarlo { nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub dim: usize,
    pub rule: Rule,
}

impl GridSpec {
    /// Grid whose node count tracks `budget`.
    pub fn auto(dim: usize, budget: usize) -> Self {
        if dim >= QMC_DIMENSION {
            return GridSpec { dim, rule: Rule::QuasiMonteCarlo { nodes: budget.max(1) } };
        }
        GridSpec::trapezoid(dim, integer_root(budget, dim).max(2))
    }

    pub fn trapezoid(dim: usize, points_per_dim: usize) -> Self {
        GridSpec { dim, rule: Rule::Trapezoid { points_per_dim: points_per_dim.max(2) } }
    }

    /// Grid used for reference values: the default budget below five
    /// dimensions, a million quasi-random nodes above.
    pub fn ground_truth(dim: usize) -> Self {
        if dim >= QMC_DIMENSION {
            GridSpec::auto(dim, HIGH_DIM_GROUND_TRUTH_NODES)
        } else {
            GridSpec::auto(dim, DEFAULT_BUDGET)
        }
    }

    pub fn nodes(&self) -> usize {
        match self.rule {
            Rule::Trapezoid { points_per_dim } => points_per_dim.saturating_pow(self.dim as u32),
            Rule::QuasiMonteCarlo { nodes } => nodes,
        }
    }

    pub fn is_approximate(&self) -> bool {
        matches!(self.rule, Rule::QuasiMonteCarlo { .. })
    }

    pub fn describe(&self) -> String {
        match self.rule {
            Rule::Trapezoid { points_per_dim } => {
                format!("trapezoid d={} points_per_dim={} nodes={}", self.dim, points_per_dim, self.nodes())
            }
            Rule::QuasiMonteCarlo { nodes } => format!("kronecker-qmc d={} nodes={} (approximate)", self.dim, nodes),
        }
    }

    /// Node coordinates and integer-scaled weight for node `idx`.
    fn node(&self, idx: usize, point: &mut [f64], alphas: &[f64]) -> f64 {
        match self.rule {
            Rule::Trapezoid { points_per_dim: p } => {
                let mut rem = idx;
                let mut w = 1.0;
                for c in point.iter_mut() {
                    let i = rem % p;
                    rem /= p;
                    *c = i as f64 / (p - 1) as f64;
                    if i == 0 || i == p - 1 {
                        w *= 0.5;
                    }
                }
                w
            }
            Rule::QuasiMonteCarlo { .. } => {
                let n = (idx + 1) as f64;
                for (c, a) in point.iter_mut().zip(alphas) {
                    *c = (0.5 + n * a).fract();
                }
                1.0
            }
        }
    }

    /// Divisor turning the integer-scaled weights into quadrature weights.
    fn normaliser(&self) -> f64 {
        match self.rule {
            Rule::Trapezoid { points_per_dim } => ((points_per_dim - 1) as f64).powi(self.dim as i32),
            Rule::QuasiMonteCarlo { nodes } => nodes as f64,
        }
    }
}

/// `⌊n^{1/d}⌋` without floating-point drift.
pub(crate) fn integer_root(n: usize, d: usize) -> usize {
    if d == 1 {
        return n;
    }
    let mut q = (n as f64).powf(1.0 / d as f64).floor() as usize;
    while q > 0 && q.checked_pow(d as u32).is_none_or(|p| p > n) {
        q -= 1;
    }
    while (q + 1).checked_pow(d as u32).is_some_and(|p| p <= n) {
        q += 1;
    }
    q
}

/// Generalised golden-ratio increments for the Kronecker sequence.
fn kronecker_alphas(d: usize) -> Vec<f64> {
    // root of x^{d+1} = x + 1
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d).map(|j| phi.powi(-(j as i32)).fract()).collect()
}

/// Order-fixed pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 64 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Values of `h` tabulated on a grid, ready to integrate `exp(-λh)` for any λ.
#[derive(Debug, Clone)]
pub struct Tabulation {
    grid: GridSpec,
    values: Vec<f64>,
    weights: Vec<f64>,
    min: f64,
}

impl Tabulation {
    pub fn new<H>(h: H, grid: GridSpec) -> Result<Self>
    where
        H: Fn(&[f64]) -> f64 + Sync,
    {
        if grid.dim == 0 {
            return Err(Error::InvalidParameter("grid dimension must be positive".into()));
        }
        let n = grid.nodes();
        let alphas = kronecker_alphas(grid.dim);
        let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut point = vec![0.0; grid.dim];
                let range = c * CHUNK..((c + 1) * CHUNK).min(n);
                let mut vals = Vec::with_capacity(range.len());
                let mut ws = Vec::with_capacity(range.len());
                for idx in range {
                    ws.push(grid.node(idx, &mut point, &alphas));
                    vals.push(h(&point));
                }
                (vals, ws)
            })
            .collect();
        let mut values = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (v, w) in chunks {
            values.extend(v);
            weights.extend(w);
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("integrand is {} at grid node {bad}", values[bad])));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Tabulation { grid, values, weights, min })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// ln ∫ exp(-λh), shifted by the minimum so large λ does not underflow.
    pub fn log_exp_integral(&self, lambda: f64) -> f64 {
        let shift = if lambda == 0.0 { 0.0 } else { self.min };
        let terms: Vec<f64> = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * (-lambda * (v - shift)).exp())
            .collect();
        pairwise_sum(&terms).ln() - self.grid.normaliser().ln() - lambda * shift
    }

    /// ∫ exp(-λh).
    pub fn exp_integral(&self, lambda: f64) -> f64 {
        let shift = if lambda == 0.0 { 0.0 } else { self.min };
        let terms: Vec<f64> = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * (-lambda * (v - shift)).exp())
            .collect();
        pairwise_sum(&terms) / self.grid.normaliser() * (-lambda * shift).exp()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be finite and non-negative (got {lambda})")));
    }
    Ok(())
}

/// Trapezoid (or quasi-random, d ≥ 5) approximation of ∫ exp(-λh) over `[0,1]^d`.
pub fn trapezoid_exp_integral<H>(h: H, lambda: f64, grid: GridSpec) -> Result<f64>
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    check_lambda(lambda)?;
    Ok(Tabulation::new(h, grid)?.exp_integral(lambda))
}

/// Surrogate integral Ẑ₁ together with the tabulated posterior mean.
#[derive(Debug, Clone)]
pub struct SurrogateIntegral {
    pub z1: f64,
    pub log_z1: f64,
    pub table: Tabulation,
}

/// Ẑ₁ = ∫ exp(-λ μ(x)) dx for the posterior mean of `state`.
pub fn surrogate_partition(state: &GpState, lambda: f64, grid: GridSpec) -> Result<SurrogateIntegral> {
    check_lambda(lambda)?;
    crate::error::check_dim(state.dim(), grid.dim)?;
    let table = Tabulation::new(|x| state.mean_unchecked(x), grid)?;
    let log_z1 = table.log_exp_integral(lambda);
    let z1 = table.exp_integral(lambda);
    Ok(SurrogateIntegral { z1, log_z1, table })
}
