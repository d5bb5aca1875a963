//! Normalizing-constant estimators: plain Monte Carlo, piecewise-constant grid
//! (with and without a Monte Carlo residual), maximum-variance GP surrogate,
//! and the two-batch surrogate-plus-Langevin-residual estimator.
//!
//! All estimators work in log space internally so large λ·f does not
//! overflow; [`Estimate`] exposes both forms.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::{fit_hyperparams, max_variance_point, GpState, HyperGrid, SearchBudget};
use crate::kernel::{KernelSpec, Smoothness};
use crate::objectives::{Objective, Oracle};
use crate::quadrature::{integer_root, surrogate_partition, GridSpec, DEFAULT_BUDGET};
use crate::samplers::{lmc_sample, InverseCdf, LmcConfig, RngStream};

/// Jitter used in place of ξ = 0 for noiseless runs.
pub const NOISELESS_JITTER: f64 = 1e-8;

/// Kernel hyperparameters for maximum-variance selection when none are pinned.
pub const DEFAULT_SELECTION_HYPERPARAMS: (f64, f64) = (0.2, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mc,
    Pc,
    PcMc,
    Mvs,
    MvsLmc,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Mc, Method::Pc, Method::PcMc, Method::Mvs, Method::MvsLmc];

    pub fn id(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Pc => "pc",
            Method::PcMc => "pc-mc",
            Method::Mvs => "mvs",
            Method::MvsLmc => "mvs-lmc",
        }
    }

    /// Methods that split the budget into two halves.
    pub fn is_two_batch(self) -> bool {
        matches!(self, Method::PcMc | Method::MvsLmc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.id() == norm)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}` (expected mc, pc, pc-mc, mvs, mvs-lmc)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperMode {
    /// Use these `(lengthscale, scale)`.
    Fixed(f64, f64),
    /// Maximise the marginal likelihood on the first-batch data.
    Learned,
}

/// Where piecewise-constant estimators query each grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellPlacement {
    #[default]
    Centre,
    /// Lower-left corner of each cell.
    Corner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Total query budget T.
    pub budget: usize,
    pub lambda: f64,
    /// Known noise standard deviation; drives ξ and the bias correction.
    pub sigma: f64,
    pub nu: Smoothness,
    pub hyper_mode: HyperMode,
    pub lmc: LmcConfig,
    pub grid: GridSpec,
    /// Divide by e^{λ²σ²/2} to undo the log-normal noise bias.
    pub noise_correction: bool,
    pub placement: CellPlacement,
    pub search: Option<SearchBudget>,
    pub hyper_grid: HyperGrid,
}

impl EstimatorConfig {
    /// Defaults for `objective`: its ν, pinned hyperparameters when it has
    /// them (learned otherwise), 20-step LMC and a 10⁵-node grid.
    pub fn for_objective(method: Method, budget: usize, lambda: f64, sigma: f64, objective: &Objective) -> Self {
        let hyper_mode = match objective.fixed_hyperparams() {
            Some((l, s)) => HyperMode::Fixed(l, s),
            None => HyperMode::Learned,
        };
        EstimatorConfig {
            method,
            budget,
            lambda,
            sigma,
            nu: objective.nu_default(),
            hyper_mode,
            lmc: LmcConfig::new(lambda),
            grid: GridSpec::auto(objective.dim(), DEFAULT_BUDGET),
            noise_correction: true,
            placement: CellPlacement::Centre,
            search: None,
            hyper_grid: HyperGrid::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive (got {})", self.lambda)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be non-negative (got {})", self.sigma)));
        }
        if self.budget == 0 {
            return Err(Error::Budget("query budget must be at least 1".into()));
        }
        if self.method.is_two_batch() && !self.budget.is_multiple_of(2) {
            return Err(Error::Config(format!("{} needs an even budget (got {})", self.method, self.budget)));
        }
        Ok(())
    }

    /// ξ = σ² with noise, a small jitter without.
    pub fn xi(&self) -> f64 {
        if self.sigma > 0.0 {
            self.sigma * self.sigma
        } else {
            NOISELESS_JITTER
        }
    }

    /// ln e^{λ²σ²/2}, or 0 with the correction off.
    fn log_noise_correction(&self) -> f64 {
        if self.noise_correction {
            0.5 * (self.lambda * self.sigma).powi(2)
        } else {
            0.0
        }
    }

    fn selection_kernel(&self) -> Result<KernelSpec> {
        let (l, s) = match self.hyper_mode {
            HyperMode::Fixed(l, s) => (l, s),
            HyperMode::Learned => DEFAULT_SELECTION_HYPERPARAMS,
        };
        KernelSpec::new(self.nu, l, s)
    }
}

/// Output of one estimator run, all in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub method: Method,
    pub log_z1: Option<f64>,
    pub log_r: Option<f64>,
    pub log_z: f64,
    pub queries_used: usize,
    pub wall_time: Duration,
    /// Fitted `(lengthscale, scale)` for GP methods.
    pub hyperparams: Option<(f64, f64)>,
}

impl Estimate {
    pub fn z_hat(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn z1_hat(&self) -> Option<f64> {
        self.log_z1.map(f64::exp)
    }

    pub fn r_hat(&self) -> Option<f64> {
        self.log_r.map(f64::exp)
    }

    /// |Ẑ/Z − 1| from log values.
    pub fn relative_error(&self, log_z_true: f64) -> f64 {
        (self.log_z - log_z_true).exp_m1().abs()
    }
}

/// An estimate paired with its reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub z1_hat: Option<f64>,
    pub r_hat: Option<f64>,
    pub z_hat: f64,
    pub z_true: f64,
    pub rel_error: f64,
    pub queries_used: usize,
    pub wall_time: Duration,
}

impl EstimateRecord {
    pub fn new(estimate: &Estimate, log_z_true: f64) -> Self {
        EstimateRecord {
            z1_hat: estimate.z1_hat(),
            r_hat: estimate.r_hat(),
            z_hat: estimate.z_hat(),
            z_true: log_z_true.exp(),
            rel_error: estimate.relative_error(log_z_true),
            queries_used: estimate.queries_used,
            wall_time: estimate.wall_time,
        }
    }
}

/// ln Σ exp(vᵢ).
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// ln( (1/n) Σ exp(vᵢ) ).
fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - (values.len() as f64).ln()
}

struct Counted<'a, O: ?Sized> {
    inner: &'a mut O,
    count: usize,
}

impl<'a, O: Oracle + ?Sized> Counted<'a, O> {
    fn new(inner: &'a mut O) -> Self {
        Counted { inner, count: 0 }
    }
}

impl<O: Oracle + ?Sized> Oracle for Counted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }

    fn query(&mut self, x: &[f64]) -> Result<f64> {
        self.count += 1;
        self.inner.query(x)
    }
}

/// Runs the estimator selected by `cfg.method`.
pub fn estimate<O: Oracle + ?Sized>(oracle: &mut O, cfg: &EstimatorConfig, rng: &mut RngStream) -> Result<Estimate> {
    match cfg.method {
        Method::Mc => estimate_mc(oracle, cfg, rng),
        Method::Pc => estimate_pc(oracle, cfg),
        Method::PcMc => estimate_pc_mc(oracle, cfg, rng),
        Method::Mvs => estimate_mvs(oracle, cfg, rng),
        Method::MvsLmc => estimate_mvs_lmc(oracle, cfg, rng),
    }
}

/// Ẑ = (1/T) Σ e^{−λyₜ} / e^{λ²σ²/2} over uniform points.
pub fn estimate_mc<O: Oracle + ?Sized>(oracle: &mut O, cfg: &EstimatorConfig, rng: &mut RngStream) -> Result<Estimate> {
    cfg.validate()?;
    let start = Instant::now();
    let d = oracle.dim();
    let mut oracle = Counted::new(oracle);
    let mut exponents = Vec::with_capacity(cfg.budget);
    let mut x = vec![0.0; d];
    for _ in 0..cfg.budget {
        x.iter_mut().for_each(|c| *c = rng.random::<f64>());
        exponents.push(-cfg.lambda * oracle.query(&x)?);
    }
    let log_z = log_mean_exp(&exponents) - cfg.log_noise_correction();
    Ok(Estimate {
        method: Method::Mc,
        log_z1: None,
        log_r: None,
        log_z,
        queries_used: oracle.count,
        wall_time: start.elapsed(),
        hyperparams: None,
    })
}

/// Uniform cell grid with `side` cells per axis.
struct CellGrid {
    d: usize,
    side: usize,
}

impl CellGrid {
    fn cells(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    fn lower_corner(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        (0..self.d)
            .map(|_| {
                let i = rem % self.side;
                rem /= self.side;
                i as f64 / self.side as f64
            })
            .collect()
    }

    fn anchor(&self, index: usize, placement: CellPlacement) -> Vec<f64> {
        let mut p = self.lower_corner(index);
        if placement == CellPlacement::Centre {
            let h = 0.5 / self.side as f64;
            p.iter_mut().for_each(|c| *c += h);
        }
        p
    }
}

fn cell_grid(d: usize, budget: usize) -> Result<CellGrid> {
    let side = integer_root(budget, d);
    if side == 0 {
        return Err(Error::Budget(format!("budget {budget} is too small for a {d}-dimensional cell grid")));
    }
    Ok(CellGrid { d, side })
}

/// Piecewise-constant estimate from `⌊T^{1/d}⌋^d` cell queries.
pub fn estimate_pc<O: Oracle + ?Sized>(oracle: &mut O, cfg: &EstimatorConfig) -> Result<Estimate> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cell_grid(oracle.dim(), cfg.budget)?;
    let mut oracle = Counted::new(oracle);
    let exponents = (0..grid.cells())
        .map(|i| oracle.query(&grid.anchor(i, cfg.placement)).map(|y| -cfg.lambda * y))
        .collect::<Result<Vec<f64>>>()?;
    let log_z = log_mean_exp(&exponents) - cfg.log_noise_correction();
    Ok(Estimate {
        method: Method::Pc,
        log_z1: None,
        log_r: None,
        log_z,
        queries_used: oracle.count,
        wall_time: start.elapsed(),
        hyperparams: None,
    })
}

/// Piecewise-constant surrogate from the first half of the budget, residual
/// from the second half sampled cell-wise from ∝ e^{−λf̂}.
pub fn estimate_pc_mc<O: Oracle + ?Sized>(
    oracle: &mut O,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<Estimate> {
    cfg.validate()?;
    let start = Instant::now();
    let half = cfg.budget / 2;
    let d = oracle.dim();
    let grid = cell_grid(d, half)?;
    let mut oracle = Counted::new(oracle);
    let surrogate = (0..grid.cells())
        .map(|i| oracle.query(&grid.anchor(i, cfg.placement)))
        .collect::<Result<Vec<f64>>>()?;
    let exponents: Vec<f64> = surrogate.iter().map(|v| -cfg.lambda * v).collect();
    let log_z1 = log_mean_exp(&exponents);

    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - top).exp()).collect();
    let table = InverseCdf::new(&weights)?;
    let width = 1.0 / grid.side as f64;
    let mut residuals = Vec::with_capacity(half);
    for _ in 0..half {
        let cell = table.cell(rng.random::<f64>());
        let mut x = grid.lower_corner(cell);
        for c in x.iter_mut() {
            *c = (*c + width * rng.random::<f64>()).min(1.0);
        }
        let y = oracle.query(&x)?;
        residuals.push(cfg.lambda * (surrogate[cell] - y));
    }
    let log_r = log_mean_exp(&residuals) - cfg.log_noise_correction();
    Ok(Estimate {
        method: Method::PcMc,
        log_z1: Some(log_z1),
        log_r: Some(log_r),
        log_z: log_z1 + log_r,
        queries_used: oracle.count,
        wall_time: start.elapsed(),
        hyperparams: None,
    })
}

/// Maximum-variance design of `n` points; returns the posterior state built
/// with the selection kernel.
fn max_variance_design<O: Oracle + ?Sized>(
    oracle: &mut O,
    cfg: &EstimatorConfig,
    n: usize,
    rng: &mut RngStream,
) -> Result<GpState> {
    let d = oracle.dim();
    let search = cfg.search.clone().unwrap_or_else(|| SearchBudget::for_dim(d));
    let mut state = GpState::new(cfg.selection_kernel()?, d, cfg.xi())?;
    for t in 0..n {
        let x = max_variance_point(&state, &search, &mut rng.child(t as u64))?;
        let y = oracle.query(&x)?;
        state = state.extend(&x, y)?;
    }
    Ok(state)
}

/// Refits hyperparameters when learning is enabled.
fn posterior_for(state: GpState, cfg: &EstimatorConfig) -> Result<(GpState, (f64, f64))> {
    match cfg.hyper_mode {
        HyperMode::Fixed(l, s) => Ok((state, (l, s))),
        HyperMode::Learned if state.len() < 2 => {
            let k = state.kernel();
            let hp = (k.lengthscale(), k.scale());
            Ok((state, hp))
        }
        HyperMode::Learned => {
            let fit = fit_hyperparams(state.inputs(), state.observations(), cfg.nu, cfg.xi(), &cfg.hyper_grid)?;
            let kernel = KernelSpec::new(cfg.nu, fit.lengthscale, fit.scale)?;
            let rebuilt = GpState::from_data(
                kernel,
                state.dim(),
                cfg.xi(),
                state.inputs().to_vec(),
                state.observations().to_vec(),
            )?;
            Ok((rebuilt, (fit.lengthscale, fit.scale)))
        }
    }
}

/// First batch of the GP estimators: `n` maximum-variance queries, then the
/// posterior under `cfg.hyper_mode`. Returns the posterior and its
/// `(lengthscale, scale)`.
pub fn max_variance_surrogate<O: Oracle + ?Sized>(
    oracle: &mut O,
    cfg: &EstimatorConfig,
    n: usize,
    rng: &mut RngStream,
) -> Result<(GpState, (f64, f64))> {
    let mut oracle = Counted::new(oracle);
    let design = max_variance_design(&mut oracle, cfg, n, rng)?;
    posterior_for(design, cfg)
}

/// ln R̂ with R̂ = mean over `points` of e^{λ(μ(x) − y)}, divided by
/// e^{λ²σ²/2} when `cfg.noise_correction` is set. Queries each point once.
pub fn log_residual_estimate<O: Oracle + ?Sized>(
    oracle: &mut O,
    surrogate: impl Fn(&[f64]) -> f64,
    points: &[Vec<f64>],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Budget("residual needs at least one sample".into()));
    }
    let residuals = points
        .iter()
        .map(|x| oracle.query(x).map(|y| cfg.lambda * (surrogate(x) - y)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_mean_exp(&residuals) - cfg.log_noise_correction())
}

/// Surrogate integral after `T` maximum-variance queries.
pub fn estimate_mvs<O: Oracle + ?Sized>(oracle: &mut O, cfg: &EstimatorConfig, rng: &mut RngStream) -> Result<Estimate> {
    cfg.validate()?;
    let start = Instant::now();
    let mut oracle = Counted::new(oracle);
    let (posterior, hp) = max_variance_surrogate(&mut oracle, cfg, cfg.budget, &mut rng.child(0))?;
    let log_z1 = surrogate_partition(&posterior, cfg.lambda, cfg.grid)?.log_z1;
    Ok(Estimate {
        method: Method::Mvs,
        log_z1: Some(log_z1),
        log_r: None,
        log_z: log_z1,
        queries_used: oracle.count,
        wall_time: start.elapsed(),
        hyperparams: Some(hp),
    })
}

/// Two-batch estimator: maximum-variance surrogate from `T/2` queries, then a
/// multiplicative residual from `T/2` Langevin samples targeting ∝ e^{−λμ}.
pub fn estimate_mvs_lmc<O: Oracle + ?Sized>(
    oracle: &mut O,
    cfg: &EstimatorConfig,
    rng: &mut RngStream,
) -> Result<Estimate> {
    cfg.validate()?;
    let start = Instant::now();
    let half = cfg.budget / 2;
    let mut oracle = Counted::new(oracle);
    let (posterior, hp) = max_variance_surrogate(&mut oracle, cfg, half, &mut rng.child(0))?;
    let log_z1 = surrogate_partition(&posterior, cfg.lambda, cfg.grid)?.log_z1;

    let mut lmc = cfg.lmc;
    lmc.lambda = cfg.lambda;
    let sampler = rng.child(1);
    let points = (0..half)
        .map(|t| lmc_sample(&posterior, &lmc, &mut sampler.child(t as u64)))
        .collect::<Result<Vec<_>>>()?;
    let log_r = log_residual_estimate(&mut oracle, |x| posterior.mean_unchecked(x), &points, cfg)?;
    assert!(log_r.is_finite(), "residual estimate must be a positive finite number");
    Ok(Estimate {
        method: Method::MvsLmc,
        log_z1: Some(log_z1),
        log_r: Some(log_r),
        log_z: log_z1 + log_r,
        queries_used: oracle.count,
        wall_time: start.elapsed(),
        hyperparams: Some(hp),
    })
}
