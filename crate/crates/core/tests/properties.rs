use proptest::prelude::*;

use kernel_nc::gp::GpState;
use kernel_nc::hardclass::{analytic_nc, delta_z, delta_z_bounds, make_instance, BumpClassSpec};
use kernel_nc::kernel::{KernelSpec, Smoothness};
use kernel_nc::objectives::resolve;
use kernel_nc::quadrature::{trapezoid_exp_integral, GridSpec, Tabulation};
use kernel_nc::samplers::{lmc_sample, uniform_sample, LmcConfig, LmcForm, RngStream};

fn surrogate(d: usize, seed: u64) -> GpState {
    let mut rng = RngStream::at(seed, vec![]);
    let xs: Vec<Vec<f64>> = (0..6).map(|_| uniform_sample(d, &mut rng)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.iter().map(|v| (6.0 * v).sin()).sum::<f64>()).collect();
    let k = KernelSpec::new(Smoothness::FiveHalves, 0.2, 1.0).unwrap();
    GpState::from_data(k, d, 1e-6, xs, ys).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lmc_stays_in_the_cube(d in 1usize..4, seed in any::<u64>(), lambda in 0.1..50.0f64,
                             beta in 1e-4..0.5f64, steps in 1usize..40, unit in any::<bool>()) {
        let gp = surrogate(d, seed);
        let form = if unit { LmcForm::UnitTemperature } else { LmcForm::Displayed };
        let cfg = LmcConfig { steps, beta, lambda, form };
        let x = lmc_sample(&gp, &cfg, &mut RngStream::new(seed)).unwrap();
        prop_assert_eq!(x.len(), d);
        prop_assert!(x.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn samplers_are_pure_functions_of_the_stream(seed in any::<u64>(), path in prop::collection::vec(any::<u64>(), 0..4)) {
        let gp = surrogate(2, 1);
        let cfg = LmcConfig::new(2.0);
        let a = lmc_sample(&gp, &cfg, &mut RngStream::at(seed, path.clone())).unwrap();
        let b = lmc_sample(&gp, &cfg, &mut RngStream::at(seed, path)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn quadrature_is_positive_and_normalised(d in 1usize..4, seed in any::<u64>(), lambda in 0.0..20.0f64) {
        let gp = surrogate(d, seed);
        let table = Tabulation::new(|x| gp.posterior_mean(x).unwrap(), GridSpec::auto(d, 4000)).unwrap();
        prop_assert!(table.exp_integral(lambda) > 0.0);
        prop_assert!((table.exp_integral(0.0) - 1.0).abs() <= 1e-12);
        prop_assert!(table.log_exp_integral(lambda).is_finite());
    }

    #[test]
    fn hardclass_sandwich(d in 1usize..=3, w in 0.15..0.6f64, eta in 1e-3..2.0f64, lambda in 0.01..5.0f64) {
        let spec = BumpClassSpec::new(d, w, Smoothness::FiveHalves, 1.0, 1.0).unwrap().with_eta(eta);
        let (lo, hi) = delta_z_bounds(&spec, lambda).unwrap();
        let dz = delta_z(&spec, lambda);
        prop_assert!(lo <= dz && dz <= hi, "{} <= {} <= {}", lo, dz, hi);
    }

    #[test]
    fn hardclass_is_additive_in_sign_count(d in 1usize..=2, w in 0.1..0.5f64, lambda in 0.1..5.0f64) {
        let spec = BumpClassSpec::new(d, w, Smoothness::ThreeHalves, 3.0, 1.0).unwrap();
        let count = |k: usize| (0..spec.m).map(|i| i < k).collect::<Vec<bool>>();
        let ks = [0, spec.m / 2, spec.m];
        let z: Vec<f64> = ks.iter().map(|&k| analytic_nc(&spec, &count(k), lambda).unwrap() - 1.0).collect();
        let slope = z[2] / spec.m as f64;
        for (k, v) in ks.iter().zip(&z) {
            prop_assert!((v - slope * *k as f64).abs() <= 1e-10 * (1.0 + z[2].abs()));
        }
    }

    #[test]
    fn halving_width_lowers_the_bump(d in 1usize..=3, w in 0.05..0.5f64, nu in prop::sample::select(Smoothness::ALL.to_vec())) {
        let coarse = BumpClassSpec::new(d, w, nu, 1.0, 1.0).unwrap();
        let fine = BumpClassSpec::new(d, w / 2.0, nu, 1.0, 1.0).unwrap();
        prop_assert!(fine.eta < coarse.eta);
    }

    #[test]
    fn registry_objectives_are_total_and_deterministic(seed in any::<u64>(), u in prop::collection::vec(0.0..=1.0f64, 8)) {
        for id in ["synthetic-3d", "ackley-2d", "alpine1-3d", "product_peak-2d", "zhou-2d", "hennig", "mlp", "psf", "psf-shift",
                   "hardclass:d=2,w=0.25,sign-density=0.5"] {
            let a = resolve(id, seed).unwrap();
            let b = resolve(id, seed).unwrap();
            let x = &u[..a.dim()];
            let (va, vb) = (a.eval(x).unwrap(), b.eval(x).unwrap());
            prop_assert!(va.is_finite(), "{} at {:?}", id, x);
            prop_assert_eq!(va.to_bits(), vb.to_bits());
        }
    }
}

#[test]
fn hardclass_matches_grid_quadrature_in_three_dimensions() {
    let spec = BumpClassSpec::new(3, 0.5, Smoothness::FiveHalves, 5.0, 1.0).unwrap();
    let signs = vec![true, false, true, true, false, false, true, false];
    let f = make_instance(&spec, &signs).unwrap();
    let grid = trapezoid_exp_integral(|x| f.eval_unchecked(x), 2.0, GridSpec::auto(3, 1_000_000)).unwrap();
    let exact = analytic_nc(&spec, &signs, 2.0).unwrap();
    assert!((grid / exact - 1.0).abs() < 1e-4, "{grid} vs {exact}");
}

#[test]
fn trapezoid_refinement_behaves_second_order() {
    let h = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[1];
    let z: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&p| trapezoid_exp_integral(h, 2.0, GridSpec::trapezoid(2, p)).unwrap())
        .collect();
    for w in z.windows(3) {
        assert!((w[2] - w[1]).abs() < (w[1] - w[0]).abs());
    }
}
