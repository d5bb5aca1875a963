//! Matérn kernels with half-integer smoothness.
//!
//! Only ν ∈ {1/2, 3/2, 5/2} are supported; for these the Bessel-function form
//! collapses to an exponential times a polynomial in `r / l`:
//!
//! | ν   | profile m(r)                                   |
//! |-----|------------------------------------------------|
//! | 1/2 | exp(-r/l)                                      |
//! | 3/2 | (1 + √3 r/l) exp(-√3 r/l)                      |
//! | 5/2 | (1 + √5 r/l + 5 r²/(3 l²)) exp(-√5 r/l)        |
//!
//! The kernel is `s · m(‖x - x'‖)` with output scale `s`.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};

/// Half-integer Matérn smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Smoothness {
    pub const ALL: [Smoothness; 3] = [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves];

    pub fn value(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        Smoothness::ALL
            .into_iter()
            .find(|s| (s.value() - nu).abs() < 1e-12)
            .ok_or_else(|| Error::InvalidParameter(format!("nu must be one of 0.5, 1.5, 2.5 (got {nu})")))
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Smoothness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/2" => Ok(Smoothness::Half),
            "3/2" => Ok(Smoothness::ThreeHalves),
            "5/2" => Ok(Smoothness::FiveHalves),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("cannot parse smoothness `{other}`")))?;
                Smoothness::from_value(v)
            }
        }
    }
}

/// Isotropic Matérn kernel: smoothness, lengthscale and output scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    nu: Smoothness,
    lengthscale: f64,
    scale: f64,
}

impl KernelSpec {
    pub fn new(nu: Smoothness, lengthscale: f64, scale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidParameter(format!("lengthscale must be positive (got {lengthscale})")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive (got {scale})")));
        }
        Ok(KernelSpec { nu, lengthscale, scale })
    }

    pub fn nu(&self) -> Smoothness {
        self.nu
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// k(x, x').
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Gradient of k(x, x') with respect to `x`. Zero at `x == x'`.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_dim(x.len(), y.len())?;
        let mut out = vec![0.0; x.len()];
        self.accumulate_grad(x, y, 1.0, &mut out);
        Ok(out)
    }

    /// Kernel matrix over `points`, row-major `n × n`.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("gram needs at least one point".into()));
        }
        let d = points[0].len();
        for p in points {
            check_dim(d, p.len())?;
        }
        let n = points.len();
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            k[i][i] = self.scale;
            for j in 0..i {
                let v = self.eval_unchecked(&points[i], &points[j]);
                k[i][j] = v;
                k[j][i] = v;
            }
        }
        Ok(k)
    }

    /// Profile value at distance `r` (including the scale).
    #[inline]
    pub fn at_distance(&self, r: f64) -> f64 {
        let z = r / self.lengthscale;
        let m = match self.nu {
            Smoothness::Half => (-z).exp(),
            Smoothness::ThreeHalves => {
                let a = 3f64.sqrt() * z;
                (1.0 + a) * (-a).exp()
            }
            Smoothness::FiveHalves => {
                let a = 5f64.sqrt() * z;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        };
        self.scale * m
    }

    /// `(dk/dr) / r`, so that ∇ₓk = radial_factor · (x - x'). Returns 0 at r = 0
    /// for ν = 1/2 where the kernel has a cusp.
    #[inline]
    fn radial_factor(&self, r: f64) -> f64 {
        let l = self.lengthscale;
        match self.nu {
            Smoothness::Half => {
                if r == 0.0 {
                    0.0
                } else {
                    -self.scale / (l * r) * (-r / l).exp()
                }
            }
            Smoothness::ThreeHalves => {
                let a = 3f64.sqrt() / l;
                -self.scale * a * a * (-a * r).exp()
            }
            Smoothness::FiveHalves => {
                let a = 5f64.sqrt() / l;
                -self.scale * a * a * (1.0 + a * r) / 3.0 * (-a * r).exp()
            }
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.at_distance(distance(x, y))
    }

    /// out += weight · ∇ₓk(x, y)
    #[inline]
    pub(crate) fn accumulate_grad(&self, x: &[f64], y: &[f64], weight: f64, out: &mut [f64]) {
        let r = distance(x, y);
        let c = weight * self.radial_factor(r);
        if c == 0.0 {
            return;
        }
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o += c * (a - b);
        }
    }
}

#[inline]
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(nu: Smoothness, l: f64, s: f64) -> KernelSpec {
        KernelSpec::new(nu, l, s).unwrap()
    }

    fn fd_grad(k: &KernelSpec, x: &[f64], y: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (k.eval(&xp, y).unwrap() - k.eval(&xm, y).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn closed_form_values() {
        let k = spec(Smoothness::Half, 1.0, 1.0);
        assert_eq!(k.eval(&[0.3], &[0.3]).unwrap(), 1.0);
        assert!((k.eval(&[0.0], &[1.0]).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-12);

        // (1 + √3) e^{-√3}
        let k = spec(Smoothness::ThreeHalves, 0.2, 1.0);
        let v = k.eval(&[0.1, 0.0], &[0.1, 0.2]).unwrap();
        assert!((v - 0.483_357_724_596_507_7).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KernelSpec::new(Smoothness::Half, 0.0, 1.0).is_err());
        assert!(KernelSpec::new(Smoothness::Half, 1.0, -1.0).is_err());
        let k = spec(Smoothness::Half, 1.0, 1.0);
        assert!(matches!(k.eval(&[0.0], &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(Smoothness::from_value(1.0).is_err());
        assert_eq!("3/2".parse::<Smoothness>().unwrap(), Smoothness::ThreeHalves);
        assert_eq!("2.5".parse::<Smoothness>().unwrap(), Smoothness::FiveHalves);
    }

    #[test]
    fn gradient_is_zero_at_coincident_points() {
        for nu in Smoothness::ALL {
            let k = spec(nu, 0.3, 2.0);
            assert_eq!(k.grad_x(&[0.4, 0.6], &[0.4, 0.6]).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = spec(Smoothness::ThreeHalves, 1.0, 1.0);
        let (x, y) = ([0.5], [0.0]);
        let g = k.grad_x(&x, &y).unwrap();
        let fd = fd_grad(&k, &x, &y);
        assert!((g[0] - fd[0]).abs() <= 1e-6 * g[0].abs().max(1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for nu in Smoothness::ALL {
            let k = spec(nu, 0.3, 2.0);
            for _ in 0..50 {
                let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random()).collect();
                if distance(&x, &y) < 1e-3 {
                    continue;
                }
                let g = k.grad_x(&x, &y).unwrap();
                let fd = fd_grad(&k, &x, &y);
                let norm = g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-6 * norm.max(1.0), "{nu:?}: {a} vs {b}");
                }
                // anti-symmetry
                let gy = k.grad_x(&y, &x).unwrap();
                for (a, b) in g.iter().zip(&gy) {
                    assert!((a + b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn gram_small_cases() {
        let k = spec(Smoothness::FiveHalves, 0.2, 3.0);
        assert_eq!(k.gram(&[vec![0.1]]).unwrap(), vec![vec![3.0]]);
        assert_eq!(k.gram(&[vec![0.1], vec![0.1]]).unwrap(), vec![vec![3.0, 3.0], vec![3.0, 3.0]]);
        assert!(k.gram(&[]).is_err());
    }

    #[test]
    fn monotone_decay_in_distance() {
        for nu in Smoothness::ALL {
            let k = spec(nu, 0.25, 1.5);
            let mut prev = k.at_distance(0.0);
            assert_eq!(prev, 1.5);
            for i in 1..2000 {
                let v = k.at_distance(i as f64 * 1e-3);
                assert!(v <= prev && v > 0.0);
                prev = v;
            }
        }
    }
}
