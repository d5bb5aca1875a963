//! Synthetic kernel expansions and classic analytic test functions.
//!
//! Named benchmarks are evaluated in their usual domain after the affine map
//! `u = lo + (hi - lo) x` from the unit cube:
//!
//! | name          | native domain          |
//! |---------------|------------------------|
//! | ackley        | [-32.768, 32.768]^d    |
//! | alpine1       | [-10, 10]^d            |
//! | product_peak  | [0, 1]^d               |
//! | zhou          | [0, 1]^d               |
//! | hennig        | [-1, 1]^2              |
//!
//! Outputs are neither shifted nor rescaled.

use std::f64::consts::{E, PI};

use rand::Rng;

use super::Objective;
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Smoothness};
use crate::samplers::RngStream;

pub const NAMED_BENCHMARKS: [&str; 5] = ["ackley", "alpine1", "product_peak", "zhou", "hennig"];

const SYNTHETIC_LENGTHSCALE: f64 = 0.2;
const SYNTHETIC_CENTRES_PER_DIM: usize = 30;

/// f(x) = Σᵢ aᵢ k(cᵢ, x) with Matérn-5/2 kernel, l = 0.2, s = 1.
#[derive(Debug, Clone)]
pub struct SyntheticFunction {
    pub kernel: KernelSpec,
    pub centres: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
}

impl SyntheticFunction {
    pub fn draw(d: usize, seed: u64) -> Self {
        let mut rng = RngStream::at(seed, vec![0x5157]);
        let m = SYNTHETIC_CENTRES_PER_DIM * d;
        let centres: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let coefficients: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let kernel = KernelSpec::new(Smoothness::FiveHalves, SYNTHETIC_LENGTHSCALE, 1.0).expect("valid kernel");
        SyntheticFunction { kernel, centres, coefficients }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centres.iter().zip(&self.coefficients).map(|(c, a)| a * self.kernel.eval_unchecked(c, x)).sum()
    }

    /// √(aᵀ K a) with K the Gram matrix of the centres.
    pub fn rkhs_norm(&self) -> f64 {
        let k = self.kernel.gram(&self.centres).expect("non-empty centres");
        let quad: f64 = k
            .iter()
            .zip(&self.coefficients)
            .map(|(row, ai)| ai * row.iter().zip(&self.coefficients).map(|(kij, aj)| kij * aj).sum::<f64>())
            .sum();
        quad.max(0.0).sqrt()
    }

    pub fn into_objective(self, name: String) -> Objective {
        let d = self.centres[0].len();
        Objective::new(name, d, Smoothness::FiveHalves, move |x| self.eval(x))
            .with_fixed_hyperparams(SYNTHETIC_LENGTHSCALE, 1.0)
    }
}

pub fn make_synthetic(d: usize, seed: u64) -> Objective {
    SyntheticFunction::draw(d.max(1), seed).into_objective(format!("synthetic-{}d", d.max(1)))
}

fn affine(x: &[f64], lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
    x.iter().map(move |v| lo + (hi - lo) * v)
}

fn ackley(x: &[f64]) -> f64 {
    let (a, b, c) = (20.0, 0.2, 2.0 * PI);
    let d = x.len() as f64;
    let (mut sq, mut cs) = (0.0, 0.0);
    for u in affine(x, -32.768, 32.768) {
        sq += u * u;
        cs += (c * u).cos();
    }
    -a * (-b * (sq / d).sqrt()).exp() - (cs / d).exp() + a + E
}

fn alpine1(x: &[f64]) -> f64 {
    affine(x, -10.0, 10.0).map(|u| (u * u.sin() + 0.1 * u).abs()).sum()
}

fn product_peak(x: &[f64]) -> f64 {
    let (c, w) = (5.0f64, 0.5);
    x.iter().map(|u| 1.0 / (c.powi(-2) + (u - w) * (u - w))).product()
}

fn zhou(x: &[f64]) -> f64 {
    let d = x.len() as i32;
    let phi = |shift: f64| {
        let sq: f64 = x.iter().map(|u| (10.0 * (u - shift)).powi(2)).sum();
        (2.0 * PI).powf(-(d as f64) / 2.0) * (-0.5 * sq).exp()
    };
    10f64.powi(d) / 2.0 * (phi(1.0 / 3.0) + phi(2.0 / 3.0))
}

fn hennig(x: &[f64]) -> f64 {
    let u: Vec<f64> = affine(x, -1.0, 1.0).collect();
    let norm = (u[0] * u[0] + u[1] * u[1]).sqrt();
    let quad = u[0] * u[0] + u[0] * u[1] + u[1] * u[1];
    -(3.0 * norm).sin().powi(2) - quad
}

/// Named benchmark rescaled to `[0,1]^d`; ν defaults to 3/2.
pub fn make_named(name: &str, d: usize) -> Result<Objective> {
    let f: fn(&[f64]) -> f64 = match name {
        "ackley" => ackley,
        "alpine1" => alpine1,
        "product_peak" => product_peak,
        "zhou" => zhou,
        "hennig" => {
            if d != 2 {
                return Err(Error::UnsupportedDimension { name: name.into(), dim: d });
            }
            hennig
        }
        other => return Err(Error::UnknownObjective(other.to_string())),
    };
    if d == 0 {
        return Err(Error::UnsupportedDimension { name: name.into(), dim: d });
    }
    let label = if name == "hennig" { name.to_string() } else { format!("{name}-{d}d") };
    Ok(Objective::new(label, d, Smoothness::ThreeHalves, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{trapezoid_exp_integral, GridSpec};

    #[test]
    fn synthetic_is_bounded_and_deterministic() {
        let f = make_synthetic(1, 3);
        let g = make_synthetic(1, 3);
        for i in 0..100 {
            let x = [i as f64 / 99.0];
            let v = f.eval(&x).unwrap();
            assert!(v.abs() <= 30.0);
            assert_eq!(v, g.eval(&x).unwrap());
        }
        assert_eq!(f.fixed_hyperparams(), Some((0.2, 1.0)));
        assert_eq!(f.nu_default(), Smoothness::FiveHalves);
    }

    #[test]
    fn synthetic_centre_count_and_norm() {
        let s = SyntheticFunction::draw(2, 5);
        assert_eq!(s.centres.len(), 60);
        assert!(s.coefficients.iter().all(|a| (-1.0..=1.0).contains(a)));
        let norm = s.rkhs_norm();
        assert!(norm.is_finite() && norm > 0.0);
    }

    #[test]
    fn hennig_vanishes_at_origin() {
        let f = make_named("hennig", 2).unwrap();
        assert_eq!(f.eval(&[0.5, 0.5]).unwrap(), 0.0);
        assert!(make_named("hennig", 3).is_err());
    }

    #[test]
    fn ackley_minimum_is_zero() {
        for d in 1..=4 {
            let f = make_named("ackley", d).unwrap();
            let v = f.eval(&vec![0.5; d]).unwrap();
            assert!(v.abs() < 1e-12, "{v}");
            assert!(f.eval(&vec![0.3; d]).unwrap() > 1.0);
        }
    }

    #[test]
    fn zhou_has_finite_positive_partition() {
        let f = make_named("zhou", 1).unwrap();
        let z = trapezoid_exp_integral(|x| f.eval_unchecked(x), 1.0, GridSpec::auto(1, 100_000)).unwrap();
        assert!(z.is_finite() && z > 0.0 && z < 1.0);
        // 10/2 · (φ(0) + φ(10/3))
        let peak = f.eval(&[1.0 / 3.0]).unwrap();
        let want = 5.0 * (1.0 + (-50.0f64 / 9.0).exp()) / (2.0 * PI).sqrt();
        assert!((peak - want).abs() < 1e-12);
    }

    #[test]
    fn product_peak_and_alpine_values() {
        let f = make_named("product_peak", 2).unwrap();
        assert!((f.eval(&[0.5, 0.5]).unwrap() - 625.0).abs() < 1e-9);
        let a = make_named("alpine1", 1).unwrap();
        assert_eq!(a.eval(&[0.5]).unwrap(), 0.0);
        assert!(matches!(make_named("ackley", 0), Err(Error::UnsupportedDimension { .. })));
        assert!(matches!(make_named("branin", 2), Err(Error::UnknownObjective(_))));
    }
}
