//! Log-intensity of the Airy diffraction pattern of a circular pupil.
//!
//! I(r) = I₀ (2 J₁(v) / v)² with v = (2π a / λ_w) r, wavelength
//! λ_w = 2e-6 and aperture constant a = 5e-6, so v = 5π r. The chart
//! `[0,1]^2 → [0, 0.5]^2` puts three dark rings (v ≈ 3.83, 7.02, 10.17) inside
//! the quadrant. Intensity is floored at 1e-12 I₀ before the logarithm.

use std::f64::consts::PI;

use super::Objective;
use crate::kernel::Smoothness;

pub const WAVELENGTH: f64 = 2e-6;
pub const APERTURE: f64 = 5e-6;
pub const INTENSITY_FLOOR: f64 = 1e-12;
const PEAK_INTENSITY: f64 = 1.0;

/// Bessel function of the first kind, order one.
///
/// Power series below |x| = 8, rational Hankel-type approximation above
/// (absolute error ≈ 1e-8).
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let half = 0.5 * x;
        let q = -half * half;
        let mut term = half;
        let mut sum = term;
        for k in 1..60 {
            term *= q / (k as f64 * (k + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    let z = 8.0 / ax;
    let y = z * z;
    let xx = ax - 2.356_194_491;
    let p = 1.0 + y * (0.183_105e-2 + y * (-0.351_639_649_6e-4 + y * (0.245_752_017_4e-5 + y * (-0.240_337_019e-6))));
    let q = 0.046_874_999_95
        + y * (-0.200_269_087_3e-3 + y * (0.844_919_909_6e-5 + y * (-0.882_289_87e-6 + y * 0.105_787_412e-6)));
    let ans = (std::f64::consts::FRAC_2_PI / ax).sqrt() * (xx.cos() * p - z * xx.sin() * q);
    if x < 0.0 {
        -ans
    } else {
        ans
    }
}

/// 2 J₁(v) / v with the removable singularity at zero filled in.
fn airy_amplitude(v: f64) -> f64 {
    if v.abs() < 1e-8 {
        1.0 - v * v / 8.0
    } else {
        2.0 * bessel_j1(v) / v
    }
}

/// ln I at physical radius `r`.
pub fn airy_log_intensity(r: f64) -> f64 {
    let v = 2.0 * PI * APERTURE / WAVELENGTH * r;
    let i = PEAK_INTENSITY * airy_amplitude(v).powi(2);
    i.max(INTENSITY_FLOOR * PEAK_INTENSITY).ln()
}

fn psf_objective(name: &str, offset: f64) -> Objective {
    Objective::new(name, 2, Smoothness::Half, move |x| {
        let (px, py) = (0.5 * x[0] + offset, 0.5 * x[1] + offset);
        airy_log_intensity((px * px + py * py).sqrt())
    })
}

/// Quadrant `[0, 0.5]^2` of the pattern.
pub fn make_psf() -> Objective {
    psf_objective("psf", 0.0)
}

/// Quadrant shifted by (+0.05, +0.05).
pub fn make_psf_shifted() -> Objective {
    psf_objective("psf-shift", 0.05)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j1_reference_values() {
        // series branch
        for (x, want) in [
            (0.5, 0.242_268_457_674_873_87),
            (1.0, 0.440_050_585_744_933_55),
            (3.0, 0.339_058_958_525_936_54),
            (5.0, -0.327_579_137_591_465_3),
            (7.99, 0.233_200_714_253_501_86),
        ] {
            assert!((bessel_j1(x) - want).abs() < 1e-13, "{x}");
            assert!((bessel_j1(-x) + want).abs() < 1e-13);
        }
        // asymptotic branch
        for (x, want) in [
            (8.0, 0.234_636_346_853_914_6),
            (8.01, 0.236_047_103_630_834_06),
            (10.0, 0.043_472_746_168_861_41),
            (20.0, 0.066_833_124_175_850_2),
            (100.0, -0.077_145_352_014_112_3),
        ] {
            assert!((bessel_j1(x) - want).abs() < 1e-8, "{x}: {}", bessel_j1(x));
        }
        assert!(bessel_j1(3.831_705_970_207_510_7).abs() < 1e-12);
    }

    #[test]
    fn peak_and_floor() {
        assert_eq!(airy_log_intensity(0.0), 0.0);
        let f = make_psf();
        assert_eq!(f.eval(&[0.0, 0.0]).unwrap(), 0.0);
        // first dark ring: v = 3.8317 at r = 3.8317 / (5π)
        let r0 = 3.831_705_970_207_510_7 / (5.0 * PI);
        assert!(r0 < 0.5);
        assert_eq!(airy_log_intensity(r0), INTENSITY_FLOOR.ln());
        for i in 0..200 {
            let x = [i as f64 / 199.0, 1.0 - i as f64 / 199.0];
            let v = f.eval(&x).unwrap();
            assert!(v.is_finite() && v <= 0.0 && v >= INTENSITY_FLOOR.ln());
        }
    }

    #[test]
    fn radially_symmetric() {
        let f = make_psf();
        for i in 0..50 {
            let (a, b) = (i as f64 / 49.0, (i as f64 * 0.37).fract());
            assert!((f.eval(&[a, b]).unwrap() - f.eval(&[b, a]).unwrap()).abs() < 1e-10);
        }
        let g = make_psf_shifted();
        assert_eq!(g.eval(&[0.0, 0.0]).unwrap(), airy_log_intensity(0.05 * 2f64.sqrt()));
    }
}
