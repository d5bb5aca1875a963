use proptest::prelude::*;

use kernel_nc::estimators::{estimate, CellPlacement, EstimatorConfig, HyperMode, Method};
use kernel_nc::harness::{self, ExperimentPlan, Row};
use kernel_nc::objectives::{make_synthetic, resolve, NoisyOracle, Objective};
use kernel_nc::quadrature::GridSpec;
use kernel_nc::samplers::RngStream;

fn run(obj: &Objective, cfg: &EstimatorConfig, sigma: f64, seed: u64) -> kernel_nc::Estimate {
    let mut oracle = NoisyOracle::new(obj.clone(), sigma, RngStream::at(seed, vec![0])).unwrap();
    estimate(&mut oracle, cfg, &mut RngStream::at(seed, vec![1])).unwrap()
}

/// Mean and standard error of Ẑ over `trials` independent runs.
fn mean_and_se(obj: &Objective, cfg: &EstimatorConfig, sigma: f64, trials: u64) -> (f64, f64) {
    let zs: Vec<f64> = (0..trials).map(|t| run(obj, cfg, sigma, t).z_hat()).collect();
    (harness::mean(&zs), harness::sample_std(&zs) / (trials as f64).sqrt())
}

#[test]
fn noise_correction_removes_the_lognormal_bias() {
    let (c, lambda, sigma) = (0.3, 2.0, 0.1);
    let obj = Objective::constant(1, c);
    let target = (-lambda * c).exp();
    for method in [Method::Mc, Method::Pc, Method::PcMc, Method::MvsLmc] {
        let mut cfg = EstimatorConfig::for_objective(method, 8, lambda, sigma, &obj);
        cfg.grid = GridSpec::auto(1, 2000);
        cfg.hyper_mode = HyperMode::Fixed(0.2, 1.0);
        // long chains so the residual batch samples the surrogate density
        cfg.lmc.steps = 2000;
        let (m, se) = mean_and_se(&obj, &cfg, sigma, 10_000);
        assert!((m - target).abs() <= 3.0 * se, "{method}: mean {m} target {target} SE {se}");
        cfg.noise_correction = false;
        let (raw, _) = mean_and_se(&obj, &cfg, sigma, 2_000);
        assert!(raw > m, "{method}: the uncorrected estimate should sit above the corrected one");
    }
}

#[test]
fn surrogate_only_bias_shrinks_with_budget() {
    // without a residual batch the surrogate integral keeps a Jensen bias at
    // finite T, which must fall as the design grows
    let (c, lambda, sigma) = (0.3, 2.0, 0.1);
    let obj = Objective::constant(1, c);
    let target = (-lambda * c).exp();
    let bias = |t: usize| {
        let mut cfg = EstimatorConfig::for_objective(Method::Mvs, t, lambda, sigma, &obj);
        cfg.grid = GridSpec::auto(1, 2000);
        cfg.hyper_mode = HyperMode::Fixed(0.2, 1.0);
        (mean_and_se(&obj, &cfg, sigma, 400).0 - target).abs()
    };
    assert!(bias(64) < bias(4));
}

fn rows_for(plan: &ExperimentPlan) -> Vec<Row> {
    harness::run_rows(plan).unwrap()
}

fn wins(rows: &[Row], better: &str, worse: &str) -> usize {
    let errs = |e: &str| rows.iter().filter(|r| r.estimator == e).map(|r| r.rel_error.unwrap()).collect::<Vec<_>>();
    errs(better).iter().zip(errs(worse)).filter(|(a, b)| *a < b).count()
}

#[test]
fn pc_mc_beats_pc_on_corner_cells() {
    let mut plan = ExperimentPlan::new("linear-1d", vec![Method::PcMc, Method::Pc], vec![256], vec![1.0], vec![0.0]).unwrap();
    plan.placement = CellPlacement::Corner;
    plan.workers = 1;
    let rows = rows_for(&plan);
    let w = wins(&rows, "pc-mc", "pc");
    assert!(w >= 70, "pc-mc better in only {w}/100 trials");
}

#[test]
fn midpoint_pc_is_already_accurate_on_linear_target() {
    let obj = Objective::linear(1);
    let cfg = EstimatorConfig::for_objective(Method::Pc, 256, 1.0, 0.0, &obj);
    let est = run(&obj, &cfg, 0.0, 0);
    assert!((est.z_hat() - (1.0 - (-1.0f64).exp())).abs() <= 1e-3);
    assert_eq!(est.queries_used, 256);
    let mut plan = ExperimentPlan::new("linear-1d", vec![Method::PcMc, Method::Mc], vec![256], vec![1.0], vec![0.0]).unwrap();
    plan.workers = 1;
    assert!(wins(&rows_for(&plan), "pc-mc", "mc") >= 90);
}

#[test]
fn mvs_beats_mc_on_synthetic_targets() {
    let mut plan = ExperimentPlan::new("synthetic-1d", vec![Method::Mvs, Method::Mc], vec![256], vec![0.5], vec![0.0]).unwrap();
    plan.workers = 1;
    let rows = rows_for(&plan);
    let w = wins(&rows, "mvs", "mc");
    assert!(w >= 90, "mvs better in only {w}/100 trials");
}

#[test]
fn tiny_lambda_degenerates_to_one() {
    for id in ["synthetic-2d", "hennig", "ackley-1d", "psf", "hardclass:d=1,w=0.2"] {
        let obj = resolve(id, 3).unwrap();
        for method in Method::ALL {
            let mut cfg = EstimatorConfig::for_objective(method, 16, 1e-8, 0.0, &obj);
            cfg.grid = GridSpec::auto(obj.dim(), 2000);
            let z = run(&obj, &cfg, 0.0, 1).z_hat();
            assert!((z - 1.0).abs() <= 1e-6, "{id} {method}: {z}");
        }
    }
}

#[test]
fn ground_truth_is_shared_within_a_cell() {
    let mut plan = ExperimentPlan::new("zhou-1d", vec![Method::Mc, Method::Pc], vec![8, 16], vec![0.5, 2.0], vec![0.0]).unwrap();
    plan.trials = 3;
    plan.workers = 2;
    let rows = rows_for(&plan);
    for lambda in [0.5, 2.0] {
        let zs: Vec<u64> = rows.iter().filter(|r| r.lambda == lambda).map(|r| r.z_true.to_bits()).collect();
        assert!(zs.windows(2).all(|w| w[0] == w[1]));
    }
    assert!(rows.iter().all(|r| r.queries_used <= r.budget));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimates_are_positive_and_two_batch_identity_holds(seed in 0u64..1000, half in 1usize..12,
                                                           lambda in 0.1..8.0f64, noisy in any::<bool>()) {
        let obj = make_synthetic(1, seed);
        let sigma = if noisy { 0.05 } else { 0.0 };
        for method in Method::ALL {
            let mut cfg = EstimatorConfig::for_objective(method, 2 * half, lambda, sigma, &obj);
            cfg.grid = GridSpec::auto(1, 1000);
            let est = run(&obj, &cfg, sigma, seed);
            prop_assert!(est.z_hat() > 0.0);
            prop_assert!(est.queries_used <= 2 * half);
            if method.is_two_batch() {
                let (z1, r) = (est.z1_hat().unwrap(), est.r_hat().unwrap());
                prop_assert!(z1 > 0.0 && r > 0.0);
                prop_assert!((est.z_hat() / z1 / r - 1.0).abs() < 1e-12);
            }
        }
    }
}
