//! Black-box targets on `[0,1]^d`, noisy query oracles and the string
//! registry used by the command line.

mod benchmarks;
mod mlp;
mod psf;

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::kernel::Smoothness;
use crate::samplers::RngStream;

pub use benchmarks::{make_named, make_synthetic, SyntheticFunction, NAMED_BENCHMARKS};
pub use mlp::{make_mlp, Mlp};
pub use psf::{airy_log_intensity, bessel_j1, make_psf, make_psf_shifted};

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type LogPartition = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A deterministic target function on the unit cube.
#[derive(Clone)]
pub struct Objective {
    name: String,
    dim: usize,
    nu_default: Smoothness,
    fixed_hyperparams: Option<(f64, f64)>,
    eval: Evaluator,
    log_partition: Option<LogPartition>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("nu_default", &self.nu_default)
            .field("fixed_hyperparams", &self.fixed_hyperparams)
            .field("analytic", &self.log_partition.is_some())
            .finish()
    }
}

impl Objective {
    pub fn new<F>(name: impl Into<String>, dim: usize, nu_default: Smoothness, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Objective {
            name: name.into(),
            dim,
            nu_default,
            fixed_hyperparams: None,
            eval: Arc::new(f),
            log_partition: None,
        }
    }

    /// Pins `(lengthscale, scale)` instead of learning them.
    pub fn with_fixed_hyperparams(mut self, lengthscale: f64, scale: f64) -> Self {
        self.fixed_hyperparams = Some((lengthscale, scale));
        self
    }

    /// Attaches the exact `λ ↦ ln Z(λ)`.
    pub fn with_log_partition<F>(mut self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.log_partition = Some(Arc::new(f));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu_default(&self) -> Smoothness {
        self.nu_default
    }

    pub fn fixed_hyperparams(&self) -> Option<(f64, f64)> {
        self.fixed_hyperparams
    }

    /// Exact ln Z(λ) when known in closed form.
    pub fn analytic_log_partition(&self, lambda: f64) -> Option<f64> {
        self.log_partition.as_ref().map(|f| f(lambda))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok((self.eval)(x))
    }

    #[inline]
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// f ≡ 0.
    pub fn zero(dim: usize) -> Self {
        Objective::constant(dim, 0.0).with_name(format!("zero-{dim}d"))
    }

    /// f ≡ c, Z = e^{-λc}.
    pub fn constant(dim: usize, c: f64) -> Self {
        Objective::new(format!("constant-{dim}d"), dim, Smoothness::ThreeHalves, move |_| c)
            .with_log_partition(move |lambda| -lambda * c)
    }

    /// f(x) = Σ xᵢ, Z = ((1 - e^{-λ})/λ)^d.
    pub fn linear(dim: usize) -> Self {
        Objective::new(format!("linear-{dim}d"), dim, Smoothness::ThreeHalves, |x| x.iter().sum())
            .with_log_partition(move |lambda| {
                if lambda == 0.0 {
                    0.0
                } else {
                    dim as f64 * (-(-lambda).exp_m1() / lambda).ln()
                }
            })
    }
}

/// Anything that answers point queries with (possibly noisy) function values.
pub trait Oracle {
    fn dim(&self) -> usize;
    /// Noise standard deviation of each answer.
    fn sigma(&self) -> f64;
    fn query(&mut self, x: &[f64]) -> Result<f64>;
}

fn check_domain(dim: usize, x: &[f64]) -> Result<()> {
    check_dim(dim, x.len())?;
    if x.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::OutOfDomain(x.to_vec()));
    }
    Ok(())
}

/// y = f(x) + σz with z drawn from the oracle's own stream.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    objective: Objective,
    sigma: f64,
    rng: RngStream,
}

impl NoisyOracle {
    pub fn new(objective: Objective, sigma: f64, rng: RngStream) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level must be non-negative (got {sigma})")));
        }
        Ok(NoisyOracle { objective, sigma, rng })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }
}

impl Oracle for NoisyOracle {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn query(&mut self, x: &[f64]) -> Result<f64> {
        check_domain(self.objective.dim(), x)?;
        let z = self.rng.standard_normal();
        let f = self.objective.eval_unchecked(x);
        if self.sigma == 0.0 {
            return Ok(f);
        }
        Ok(f + self.sigma * z)
    }
}

/// Wraps an oracle and counts queries.
#[derive(Debug, Clone)]
pub struct CountingOracle<O> {
    inner: O,
    count: usize,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle { inner, count: 0 }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
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

/// Parsed registry identifier: base name plus an optional pinned seed
/// (`synthetic-2d@7`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectiveId {
    pub base: String,
    pub seed: Option<u64>,
}

impl ObjectiveId {
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        match id.rsplit_once('@') {
            Some((base, seed)) => {
                let seed = seed.parse().map_err(|_| Error::UnknownObjective(id.to_string()))?;
                Ok(ObjectiveId { base: base.to_string(), seed: Some(seed) })
            }
            None => Ok(ObjectiveId { base: id.to_string(), seed: None }),
        }
    }

    /// Whether construction consumes a seed (so unpinned ids vary per trial).
    pub fn is_seeded(&self) -> bool {
        self.base.starts_with("synthetic") || self.base == "mlp" || self.base.starts_with("hardclass")
    }

    /// Builds the objective; `fallback_seed` applies when no seed is pinned.
    pub fn build(&self, fallback_seed: u64) -> Result<Objective> {
        resolve(&self.base, self.seed.unwrap_or(fallback_seed))
    }
}

impl fmt::Display for ObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.seed {
            Some(s) => write!(f, "{}@{s}", self.base),
            None => f.write_str(&self.base),
        }
    }
}

/// Splits `name-3d` into `("name", 3)`.
fn split_dim(id: &str) -> Option<(&str, usize)> {
    let (name, tail) = id.rsplit_once('-')?;
    let d = tail.strip_suffix('d')?.parse().ok()?;
    Some((name, d))
}

/// Registry lookup by string id (without the `@seed` suffix).
pub fn resolve(id: &str, seed: u64) -> Result<Objective> {
    match id {
        "mlp" => return Ok(make_mlp(seed)),
        "psf" => return Ok(make_psf()),
        "psf-shift" => return Ok(make_psf_shifted()),
        "hennig" => return make_named("hennig", 2),
        _ => {}
    }
    if let Some(params) = id.strip_prefix("hardclass") {
        return crate::hardclass::from_registry_params(params.trim_start_matches(':'), seed);
    }
    let (name, d) = split_dim(id).ok_or_else(|| Error::UnknownObjective(id.to_string()))?;
    if d == 0 {
        return Err(Error::UnsupportedDimension { name: name.to_string(), dim: d });
    }
    match name {
        "synthetic" => Ok(make_synthetic(d, seed)),
        "zero" => Ok(Objective::zero(d)),
        "linear" => Ok(Objective::linear(d)),
        other => make_named(other, d).map(|o| o.with_name(id)),
    }
}

/// Registry ids and one-line descriptions.
pub fn list_functions() -> Vec<(&'static str, &'static str)> {
    vec![
        ("synthetic-<d>d[@seed]", "random Matérn-5/2 kernel expansion with 30d centres, l = 0.2"),
        ("ackley-<d>d", "Ackley on [-32.768, 32.768]^d mapped to the unit cube"),
        ("alpine1-<d>d", "Alpine N.1 on [-10, 10]^d mapped to the unit cube"),
        ("product_peak-<d>d", "Genz product peak, c = 5, u = 0.5"),
        ("zhou-<d>d", "Zhou (1998) two-Gaussian bump function"),
        ("hennig", "-sin(3|x|)^2 - x'Sx on [-1,1]^2, S = [[1, .5], [.5, 1]]"),
        ("mlp[@seed]", "8-16-32-16-1 tanh network with Xavier-uniform weights"),
        ("psf", "log Airy intensity on the [0, 0.5]^2 quadrant"),
        ("psf-shift", "log Airy intensity on [0.05, 0.55]^2"),
        ("hardclass:d=..,w=..,signs-seed=..,sign-density=..", "packed bump functions with exact Z"),
        ("zero-<d>d", "f = 0"),
        ("linear-<d>d", "f(x) = sum of coordinates"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_oracle_returns_exact_values() {
        let obj = make_synthetic(2, 4);
        let mut oracle = NoisyOracle::new(obj.clone(), 0.0, RngStream::new(1)).unwrap();
        for p in [[0.0, 0.0], [0.3, 0.9], [1.0, 0.5]] {
            assert_eq!(oracle.query(&p).unwrap(), obj.eval(&p).unwrap());
        }
    }

    #[test]
    fn oracle_rejects_points_outside_domain() {
        let mut oracle = NoisyOracle::new(Objective::zero(2), 0.1, RngStream::new(1)).unwrap();
        assert!(matches!(oracle.query(&[0.5, 1.2]), Err(Error::OutOfDomain(_))));
        assert!(matches!(oracle.query(&[0.5]), Err(Error::DimensionMismatch { .. })));
        assert!(NoisyOracle::new(Objective::zero(1), -1.0, RngStream::new(0)).is_err());
    }

    #[test]
    fn noise_moments() {
        let obj = Objective::linear(1);
        let mut oracle = NoisyOracle::new(obj, 0.1, RngStream::new(77)).unwrap();
        let n = 100_000;
        let ys: Vec<f64> = (0..n).map(|_| oracle.query(&[0.25]).unwrap()).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * 0.1 / (n as f64).sqrt());
        assert!((sd - 0.1).abs() < 0.005);
    }

    #[test]
    fn counting_oracle_counts() {
        let mut c = CountingOracle::new(NoisyOracle::new(Objective::zero(1), 0.0, RngStream::new(0)).unwrap());
        for _ in 0..5 {
            c.query(&[0.1]).unwrap();
        }
        assert_eq!(c.count(), 5);
    }

    #[test]
    fn registry_ids() {
        assert_eq!(resolve("synthetic-2d", 1).unwrap().dim(), 2);
        assert_eq!(resolve("ackley-1d", 0).unwrap().name(), "ackley-1d");
        assert_eq!(resolve("mlp", 0).unwrap().dim(), 8);
        assert_eq!(resolve("psf-shift", 0).unwrap().dim(), 2);
        assert_eq!(resolve("hennig", 0).unwrap().dim(), 2);
        assert!(matches!(resolve("rosenbrock-2d", 0), Err(Error::UnknownObjective(_))));
        assert!(matches!(resolve("nonsense", 0), Err(Error::UnknownObjective(_))));

        let id = ObjectiveId::parse("synthetic-1d@9").unwrap();
        assert_eq!(id.seed, Some(9));
        assert!(id.is_seeded());
        let a = id.build(1).unwrap();
        let b = ObjectiveId::parse("synthetic-1d").unwrap().build(9).unwrap();
        assert_eq!(a.eval(&[0.4]).unwrap(), b.eval(&[0.4]).unwrap());
        assert_eq!(id.to_string(), "synthetic-1d@9");
    }

    #[test]
    fn analytic_partitions() {
        let lin = Objective::linear(1);
        assert!((lin.analytic_log_partition(1.0).unwrap().exp() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(Objective::zero(3).analytic_log_partition(5.0).unwrap(), 0.0);
        assert!((Objective::constant(1, 2.0).analytic_log_partition(0.5).unwrap() + 1.0).abs() < 1e-15);
    }
}
