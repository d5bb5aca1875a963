//! Seeded random streams, uniform and inverse-CDF sampling, and the Langevin
//! sampler used for the residual batch.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::GpState;

/// Deterministic random stream addressed by `(master_seed, path)`.
///
/// Streams with different paths are seeded independently, so a trial run on
/// any worker draws exactly what the serial run draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self::at(master_seed, Vec::new())
    }

    pub fn at(master_seed: u64, path: Vec<u64>) -> Self {
        let rng = ChaCha8Rng::from_seed(derive_key(master_seed, &path));
        RngStream { master_seed, path, rng }
    }

    /// Independent sub-stream; does not advance `self`.
    pub fn child(&self, id: u64) -> Self {
        let mut path = self.path.clone();
        path.push(id);
        Self::at(self.master_seed, path)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// 64-bit fingerprint of `(master_seed, path)`.
    pub fn fingerprint(&self) -> u64 {
        let key = derive_key(self.master_seed, &self.path);
        u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, path: &[u64]) -> [u8; 32] {
    let mut state = splitmix(seed ^ 0x6a09_e667_f3bc_c908);
    state = splitmix(state ^ path.len() as u64);
    for &p in path {
        state = splitmix(state ^ splitmix(p.wrapping_add(0x3c6e_f372_fe94_f82b)));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state = splitmix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Uniform point on `[0,1]^d`.
pub fn uniform_sample(d: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

/// Energy landscape the Langevin sampler descends.
pub trait Potential {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

impl Potential for GpState {
    fn dim(&self) -> usize {
        GpState::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.mean_unchecked(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.mean_grad_into(x, out)
    }
}

/// How inverse temperature enters the Langevin step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LmcForm {
    /// x ← x − β∇μ(x) + √(2β/λ) ε
    #[default]
    Displayed,
    /// x ← x − βλ∇μ(x) + √(2β) ε (same target, time rescaled by λ)
    UnitTemperature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmcConfig {
    pub steps: usize,
    pub beta: f64,
    pub lambda: f64,
    pub form: LmcForm,
}

impl LmcConfig {
    /// 20 steps with β = 1e-3.
    pub fn new(lambda: f64) -> Self {
        LmcConfig { steps: 20, beta: 1e-3, lambda, form: LmcForm::Displayed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("LMC needs at least one step".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("LMC step size must be positive (got {})", self.beta)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive (got {})", self.lambda)));
        }
        Ok(())
    }
}

/// Folds a coordinate back into `[0,1]` by mirror reflection.
pub fn reflect_unit(v: f64) -> f64 {
    if (0.0..=1.0).contains(&v) {
        return v;
    }
    if !v.is_finite() {
        return 0.5;
    }
    let m = v.rem_euclid(2.0);
    if m <= 1.0 {
        m
    } else {
        2.0 - m
    }
}

/// Unadjusted Langevin chain from a fresh uniform start; returns the last
/// iterate, reflected into the unit cube after every step.
pub fn lmc_sample<P: Potential + ?Sized>(potential: &P, cfg: &LmcConfig, rng: &mut RngStream) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = potential.dim();
    let mut x = uniform_sample(d, rng);
    let mut grad = vec![0.0; d];
    let (drift, noise) = match cfg.form {
        LmcForm::Displayed => (cfg.beta, (2.0 * cfg.beta / cfg.lambda).sqrt()),
        LmcForm::UnitTemperature => (cfg.beta * cfg.lambda, (2.0 * cfg.beta).sqrt()),
    };
    for _ in 0..cfg.steps {
        potential.gradient(&x, &mut grad);
        for (xi, gi) in x.iter_mut().zip(&grad) {
            let eps = rng.standard_normal();
            *xi = reflect_unit(*xi - drift * gi + noise * eps);
        }
    }
    Ok(x)
}

/// Cumulative table for sampling a piecewise-constant density on `[0,1]`
/// whose `m` cells have equal width and relative mass `density_values[i]`.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cumulative: Vec<f64>,
}

impl InverseCdf {
    pub fn new(density_values: &[f64]) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(density_values.len());
        let mut acc = 0.0;
        for &v in density_values {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("density values must be finite and non-negative (got {v})")));
            }
            acc += v;
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::DegenerateDensity);
        }
        Ok(InverseCdf { cumulative })
    }

    pub fn cells(&self) -> usize {
        self.cumulative.len()
    }

    /// Index of the cell holding probability mass level `u ∈ [0,1)`.
    pub fn cell(&self, u: f64) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let target = u * total;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        idx.min(self.cumulative.len() - 1)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let cell = self.cell(rng.random::<f64>());
        let m = self.cumulative.len() as f64;
        ((cell as f64 + rng.random::<f64>()) / m).min(1.0)
    }
}

/// One draw from the piecewise-constant density given by `density_values`.
pub fn grid_inverse_cdf_sample_1d(density_values: &[f64], rng: &mut RngStream) -> Result<f64> {
    Ok(InverseCdf::new(density_values)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        centre: f64,
    }

    impl Potential for Quadratic {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            (x[0] - self.centre).powi(2)
        }
        fn gradient(&self, x: &[f64], out: &mut [f64]) {
            out[0] = 2.0 * (x[0] - self.centre);
        }
    }

    struct Flat;

    impl Potential for Flat {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn gradient(&self, _: &[f64], out: &mut [f64]) {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn ks_uniform(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut s = RngStream::at(7, vec![1, 2]);
            (0..4).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = RngStream::new(7).child(1).child(2);
            (0..4).map(|_| s.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut s = RngStream::at(7, vec![2, 1]);
            (0..4).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngStream::at(7, vec![]).fingerprint(), RngStream::at(8, vec![]).fingerprint());
    }

    #[test]
    fn uniform_sample_moments() {
        let mut rng = RngStream::new(1);
        let n = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let p = uniform_sample(3, &mut rng);
            assert!(p.iter().all(|c| (0.0..=1.0).contains(c)));
            for (s, c) in sums.iter_mut().zip(&p) {
                *s += c;
            }
        }
        let tol = 3.0 / (12.0 * n as f64).sqrt() * 3.0;
        for s in sums {
            assert!((s / n as f64 - 0.5).abs() < tol);
        }
        let p1 = uniform_sample(4, &mut RngStream::at(9, vec![3]));
        let p2 = uniform_sample(4, &mut RngStream::at(9, vec![3]));
        assert_eq!(p1, p2);
    }

    #[test]
    fn reflection_folds_into_unit_interval() {
        assert_eq!(reflect_unit(0.3), 0.3);
        assert!((reflect_unit(-0.2) - 0.2).abs() < 1e-15);
        assert!((reflect_unit(1.25) - 0.75).abs() < 1e-15);
        assert!((reflect_unit(2.25) - 0.25).abs() < 1e-15);
        assert!((reflect_unit(-1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_drift_step_is_pure_diffusion() {
        let cfg = LmcConfig { steps: 1, beta: 1e-3, lambda: 2.0, form: LmcForm::Displayed };
        let x = lmc_sample(&Flat, &cfg, &mut RngStream::new(4)).unwrap();
        let mut replay = RngStream::new(4);
        let x0 = uniform_sample(2, &mut replay);
        let noise = (2.0 * 1e-3 / 2.0f64).sqrt();
        for (xi, x0i) in x.iter().zip(&x0) {
            let expect = reflect_unit(x0i + noise * replay.standard_normal());
            assert_eq!(*xi, expect);
        }
    }

    #[test]
    fn vanishing_step_returns_the_initial_point() {
        let cfg = LmcConfig { steps: 20, beta: 1e-300, lambda: 1.0, form: LmcForm::Displayed };
        let x = lmc_sample(&Quadratic { centre: 0.2 }, &cfg, &mut RngStream::new(6)).unwrap();
        let x0 = uniform_sample(1, &mut RngStream::new(6));
        assert!((x[0] - x0[0]).abs() < 1e-140);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = LmcConfig::new(1.0);
        cfg.steps = 0;
        assert!(lmc_sample(&Flat, &cfg, &mut RngStream::new(0)).is_err());
        let mut cfg = LmcConfig::new(1.0);
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn quadratic_well_centres_samples() {
        let cfg = LmcConfig { steps: 500, beta: 1e-3, lambda: 10.0, form: LmcForm::Displayed };
        let root = RngStream::new(12);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|i| lmc_sample(&Quadratic { centre: 0.5 }, &cfg, &mut root.child(i)).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn long_chains_match_the_gibbs_cdf() {
        // target ∝ exp(-λ (x - 0.3)^2) on [0,1], λ = 5
        let lambda = 5.0;
        let pot = Quadratic { centre: 0.3 };
        let cfg = LmcConfig { steps: 4000, beta: 1e-3, lambda, form: LmcForm::Displayed };
        let root = RngStream::new(21);
        let n = 3000;
        let mut xs: Vec<f64> = (0..n).map(|i| lmc_sample(&pot, &cfg, &mut root.child(i)).unwrap()[0]).collect();
        xs.sort_by(f64::total_cmp);

        // oracle CDF from a fine grid
        let m = 10_000;
        let dens: Vec<f64> = (0..m).map(|i| (-lambda * pot.value(&[(i as f64 + 0.5) / m as f64])).exp()).collect();
        let total: f64 = dens.iter().sum();
        let mut cdf = Vec::with_capacity(m);
        let mut acc = 0.0;
        for v in &dens {
            acc += v / total;
            cdf.push(acc);
        }
        let oracle = |x: f64| cdf[((x * m as f64) as usize).min(m - 1)];
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (oracle(x) - i as f64 / n as f64).abs().max((oracle(x) - (i + 1) as f64 / n as f64).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "KS = {ks}");
    }

    #[test]
    fn constant_density_is_uniform() {
        let mut rng = RngStream::new(8);
        let dens = vec![1.0; 1000];
        let xs: Vec<f64> = (0..10_000).map(|_| grid_inverse_cdf_sample_1d(&dens, &mut rng).unwrap()).collect();
        assert!(ks_uniform(xs) < 0.02);
    }

    #[test]
    fn single_cell_density_stays_in_that_cell() {
        let mut dens = vec![0.0; 50];
        dens[17] = 3.0;
        let table = InverseCdf::new(&dens).unwrap();
        let mut rng = RngStream::new(2);
        for _ in 0..5000 {
            let x = table.sample(&mut rng);
            assert!((0.34..=0.36).contains(&x), "{x}");
        }
    }

    #[test]
    fn symmetric_density_is_centred() {
        let m = 1000;
        let dens: Vec<f64> = (0..m)
            .map(|i| {
                let x = (i as f64 + 0.5) / m as f64;
                (-10.0 * (x - 0.5) * (x - 0.5)).exp()
            })
            .collect();
        let table = InverseCdf::new(&dens).unwrap();
        let mut rng = RngStream::new(3);
        let mean = (0..10_000).map(|_| table.sample(&mut rng)).sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn zero_density_is_degenerate() {
        let err = grid_inverse_cdf_sample_1d(&[0.0; 10], &mut RngStream::new(0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateDensity));
        assert!(InverseCdf::new(&[1.0, -1.0]).is_err());
    }
}
