use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, HyperChoice};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, HyperMode, Method};
use crate::objectives::{CountingOracle, NoisyOracle, Objective};
use crate::quadrature::{GridSpec, Tabulation};
use crate::samplers::RngStream;

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 17] = [
    "estimator",
    "objective",
    "d",
    "nu",
    "lambda",
    "sigma",
    "T",
    "trial",
    "seed",
    "z1_hat",
    "r_hat",
    "z_hat",
    "z_true",
    "rel_error",
    "queries_used",
    "wall_ms",
    "failed",
];

const CELL_DOMAIN: u64 = 0xce11;
const INSTANCE_DOMAIN: u64 = 0x1057;
const CHUNK_CELLS: usize = 64;

/// One CSV row. `seed` is the seed the objective instance was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub estimator: String,
    pub objective: String,
    pub d: usize,
    pub nu: f64,
    pub lambda: f64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub budget: usize,
    pub trial: usize,
    pub seed: u64,
    pub z1_hat: Option<f64>,
    pub r_hat: Option<f64>,
    pub z_hat: Option<f64>,
    pub z_true: f64,
    pub rel_error: Option<f64>,
    pub queries_used: usize,
    pub wall_ms: f64,
    pub failed: bool,
}

/// Reference value of Z for one λ.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub lambda: f64,
    pub log_z: f64,
    /// Quadrature grid, or `None` for a closed form.
    pub grid: Option<GridSpec>,
}

impl GroundTruth {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn is_approximate(&self) -> bool {
        self.grid.is_some_and(|g| g.is_approximate())
    }

    pub fn method(&self) -> String {
        match self.grid {
            None => "closed form".to_string(),
            Some(g) => g.describe(),
        }
    }
}

/// Z for every λ, from the closed form when the objective has one and from a
/// single shared tabulation otherwise.
pub fn ground_truth(objective: &Objective, lambdas: &[f64]) -> Result<Vec<GroundTruth>> {
    if let Some(values) = lambdas.iter().map(|&l| objective.analytic_log_partition(l)).collect::<Option<Vec<f64>>>() {
        return Ok(lambdas.iter().zip(values).map(|(&lambda, log_z)| GroundTruth { lambda, log_z, grid: None }).collect());
    }
    let grid = GridSpec::ground_truth(objective.dim());
    let table = Tabulation::new(|x| objective.eval_unchecked(x), grid)?;
    Ok(lambdas
        .iter()
        .map(|&lambda| GroundTruth { lambda, log_z: table.log_exp_integral(lambda), grid: Some(grid) })
        .collect())
}

/// Seed of the objective instance used in `trial`: the pinned seed, a
/// per-trial seed for seeded families, 0 otherwise.
pub fn instance_seed(plan: &ExperimentPlan, trial: usize) -> u64 {
    match plan.objective.seed {
        Some(s) => s,
        None if plan.objective.is_seeded() => RngStream::at(plan.seed, vec![INSTANCE_DOMAIN, trial as u64]).next_u64(),
        None => 0,
    }
}

struct Instance {
    objective: Objective,
    truth: Vec<GroundTruth>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    method: Method,
    budget: usize,
    lambda: usize,
    sigma: usize,
    trial: usize,
}

fn cells(plan: &ExperimentPlan) -> Vec<Cell> {
    let mut out = Vec::with_capacity(plan.cell_count());
    for &method in &plan.estimators {
        for &budget in &plan.budgets {
            for lambda in 0..plan.lambdas.len() {
                for sigma in 0..plan.sigmas.len() {
                    for trial in 0..plan.trials {
                        out.push(Cell { method, budget, lambda, sigma, trial });
                    }
                }
            }
        }
    }
    out
}

fn method_code(m: Method) -> u64 {
    Method::ALL.iter().position(|x| *x == m).expect("listed") as u64
}

/// Estimator settings for one cell.
pub fn cell_config(plan: &ExperimentPlan, objective: &Objective, method: Method, budget: usize, lambda: f64, sigma: f64) -> EstimatorConfig {
    let mut cfg = EstimatorConfig::for_objective(method, budget, lambda, sigma, objective);
    if let Some(nu) = plan.nu {
        cfg.nu = nu;
    }
    match plan.hyper {
        HyperChoice::Auto => {}
        HyperChoice::Learned => cfg.hyper_mode = HyperMode::Learned,
        HyperChoice::Fixed(l, s) => cfg.hyper_mode = HyperMode::Fixed(l, s),
    }
    cfg.placement = plan.placement;
    cfg.noise_correction = plan.noise_correction;
    cfg.grid = GridSpec::auto(objective.dim(), plan.grid_budget);
    if let Some(steps) = plan.lmc_steps {
        cfg.lmc.steps = steps;
    }
    if let Some(beta) = plan.lmc_beta {
        cfg.lmc.beta = beta;
    }
    cfg
}

/// Outcome of [`run_plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: usize,
    pub failures: usize,
    pub out: PathBuf,
    pub manifest: PathBuf,
    /// `(cell label, error)` for each failed cell.
    pub failure_messages: Vec<(String, String)>,
}

/// Runs every cell and returns the rows in cell order without touching disk.
pub fn run_rows(plan: &ExperimentPlan) -> Result<Vec<Row>> {
    let mut rows = Vec::with_capacity(plan.cell_count());
    execute(plan, |chunk| {
        rows.extend(chunk.iter().map(|(r, _)| r.clone()));
        Ok(())
    })?;
    Ok(rows)
}

/// Runs the plan, streaming rows to `plan.out` and writing a manifest next to it.
pub fn run_plan(plan: &ExperimentPlan) -> Result<RunReport> {
    let mut writer = csv::Writer::from_writer(File::create(&plan.out)?);
    let mut rows = 0;
    let mut failure_messages = Vec::new();
    let truth = execute(plan, |chunk| {
        for (row, err) in chunk {
            writer.serialize(row)?;
            rows += 1;
            if let Some(e) = err {
                let label = format!("{} T={} lambda={} sigma={} trial={}", row.estimator, row.budget, row.lambda, row.sigma, row.trial);
                failure_messages.push((label, e.clone()));
            }
        }
        writer.flush()?;
        Ok(())
    })?;
    drop(writer);
    let manifest = manifest_path(&plan.out);
    std::fs::write(&manifest, manifest_text(plan, &truth, rows, &failure_messages))?;
    Ok(RunReport { rows, failures: failure_messages.len(), out: plan.out.clone(), manifest, failure_messages })
}

/// `<out>.manifest`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Builds instances, then runs cells chunk by chunk on a bounded pool, handing
/// each completed chunk to `sink` in cell order. Returns the instances' truth.
fn execute(plan: &ExperimentPlan, mut sink: impl FnMut(&[(Row, Option<String>)]) -> Result<()>) -> Result<BTreeMap<u64, Vec<GroundTruth>>> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::Plan(format!("cannot start worker pool: {e}")))?;

    let seeds: Vec<u64> = (0..plan.trials).map(|t| instance_seed(plan, t)).collect();
    let mut unique = seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    let built: Vec<(u64, Arc<Instance>)> = pool.install(|| {
        unique
            .par_iter()
            .map(|&seed| {
                let objective = plan.objective.build(seed)?;
                let truth = ground_truth(&objective, &plan.lambdas)?;
                Ok((seed, Arc::new(Instance { objective, truth })))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let instances: BTreeMap<u64, Arc<Instance>> = built.into_iter().collect();

    let all = cells(plan);
    for chunk in all.chunks(CHUNK_CELLS) {
        let rows: Vec<(Row, Option<String>)> = pool.install(|| {
            chunk
                .par_iter()
                .map(|cell| {
                    let seed = seeds[cell.trial];
                    run_cell(plan, &instances[&seed], seed, cell)
                })
                .collect()
        });
        sink(&rows)?;
    }
    Ok(instances.into_iter().map(|(k, v)| (k, v.truth.clone())).collect())
}

fn run_cell(plan: &ExperimentPlan, instance: &Instance, seed: u64, cell: &Cell) -> (Row, Option<String>) {
    let lambda = plan.lambdas[cell.lambda];
    let sigma = plan.sigmas[cell.sigma];
    let objective = &instance.objective;
    let truth = &instance.truth[cell.lambda];
    let cfg = cell_config(plan, objective, cell.method, cell.budget, lambda, sigma);
    let stream = RngStream::at(
        plan.seed,
        vec![CELL_DOMAIN, method_code(cell.method), cell.budget as u64, lambda.to_bits(), sigma.to_bits(), cell.trial as u64],
    );
    let mut row = Row {
        estimator: cell.method.to_string(),
        objective: plan.objective.to_string(),
        d: objective.dim(),
        nu: cfg.nu.value(),
        lambda,
        sigma,
        budget: cell.budget,
        trial: cell.trial,
        seed,
        z1_hat: None,
        r_hat: None,
        z_hat: None,
        z_true: truth.z(),
        rel_error: None,
        queries_used: 0,
        wall_ms: 0.0,
        failed: true,
    };
    let oracle = match NoisyOracle::new(objective.clone(), sigma, stream.child(0)) {
        Ok(o) => o,
        Err(e) => return (row, Some(e.to_string())),
    };
    let mut counter = CountingOracle::new(oracle);
    match estimate(&mut counter, &cfg, &mut stream.child(1)) {
        Ok(est) => {
            assert_eq!(est.queries_used, counter.count(), "reported queries must match oracle calls");
            assert!(est.queries_used <= cell.budget, "estimator exceeded its budget");
            row.z1_hat = est.z1_hat();
            row.r_hat = est.r_hat();
            row.z_hat = Some(est.z_hat());
            row.rel_error = Some(est.relative_error(truth.log_z));
            row.queries_used = est.queries_used;
            if plan.timing {
                row.wall_ms = est.wall_time.as_secs_f64() * 1e3;
            }
            row.failed = false;
            (row, None)
        }
        Err(e) => {
            row.queries_used = counter.count();
            (row, Some(e.to_string()))
        }
    }
}

fn manifest_text(plan: &ExperimentPlan, truth: &BTreeMap<u64, Vec<GroundTruth>>, rows: usize, failures: &[(String, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "\n[plan]");
    s.push_str(&plan.to_text());
    let _ = writeln!(s, "\n[ground_truth]");
    for (seed, values) in truth {
        for g in values {
            let flag = if g.is_approximate() { " (approximate)" } else { "" };
            let _ = writeln!(s, "seed={seed} lambda={:?} z_true={:?} via {}{flag}", g.lambda, g.z(), g.method());
        }
    }
    let _ = writeln!(s, "\n[settings]");
    let _ = writeln!(s, "surrogate_grid = {}", GridSpec::auto(plan.objective.build(0).map(|o| o.dim()).unwrap_or(1), plan.grid_budget).describe());
    let _ = writeln!(s, "hyperparameters = {:?}, refit per trial when learned", plan.hyper);
    let _ = writeln!(s, "instances = {}", truth.len());
    let _ = writeln!(s, "\n[result]");
    let _ = writeln!(s, "rows = {rows}");
    let _ = writeln!(s, "failures = {}", failures.len());
    for (cell, err) in failures {
        let _ = writeln!(s, "failed: {cell}: {err}");
    }
    s
}
