use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kernel_nc::harness::{self, ExperimentPlan};
use kernel_nc::objectives::{list_functions, ObjectiveId};
use kernel_nc::{Error, Method};

const EXIT_RUNTIME: u8 = 1;
const EXIT_PLAN: u8 = 2;
const EXIT_FAILURES: u8 = 3;

#[derive(Parser)]
#[command(name = "kernel-nc", version, about = "Normalizing-constant estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment plan and write its CSV and manifest.
    Run {
        plan: PathBuf,
        /// Override the plan's worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the plan's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a results CSV and fit the log-log error rate of one estimator.
    Rates {
        csv: PathBuf,
        #[arg(long)]
        estimator: Method,
        /// Print the predicted exponent next to the fitted slope.
        #[arg(long)]
        theory: bool,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        objective: Option<String>,
    },
    /// Print the reference normalizing constant of an objective.
    Groundtruth {
        objective: String,
        #[arg(long, num_args = 1.., required = true)]
        lambda: Vec<f64>,
        /// Seed for seeded families when the id does not pin one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List registered objective ids.
    ListFunctions,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { plan, workers, out } => run(plan, workers, out),
        Command::Rates { csv, estimator, theory, lambda, sigma, nu, objective } => {
            report(rates(csv, estimator, theory, lambda, sigma, nu, objective))
        }
        Command::Groundtruth { objective, lambda, seed } => report(groundtruth(&objective, &lambda, seed)),
        Command::ListFunctions => {
            for (id, about) in list_functions() {
                println!("{id:<52} {about}");
            }
            ExitCode::SUCCESS
        }
    }
}

fn report(result: kernel_nc::Result<()>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Plan(_) | Error::UnknownObjective(_) | Error::UnsupportedDimension { .. } => EXIT_PLAN,
                _ => EXIT_RUNTIME,
            };
            ExitCode::from(code)
        }
    }
}

fn run(path: PathBuf, workers: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let mut plan = match ExperimentPlan::from_file(&path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PLAN);
        }
    };
    if let Some(w) = workers {
        plan.workers = w;
    }
    if let Some(o) = out {
        plan.out = o;
    }
    if let Err(e) = plan.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_PLAN);
    }
    eprintln!("running {} cells on {} worker(s)", plan.cell_count(), plan.workers);
    match harness::run_plan(&plan) {
        Ok(r) => {
            println!("wrote {} rows to {} (manifest {})", r.rows, r.out.display(), r.manifest.display());
            for (cell, err) in r.failure_messages.iter().take(10) {
                eprintln!("failed: {cell}: {err}");
            }
            if r.failures > 0 {
                eprintln!("{} of {} cells failed", r.failures, r.rows);
                ExitCode::from(EXIT_FAILURES)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ Error::Plan(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_PLAN)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn rates(
    csv: PathBuf,
    estimator: Method,
    theory: bool,
    lambda: Option<f64>,
    sigma: Option<f64>,
    nu: Option<f64>,
    objective: Option<String>,
) -> kernel_nc::Result<()> {
    let rows = harness::read_rows(&csv)?;
    let summary = harness::summarize(&rows);
    for note in &summary.omitted {
        eprintln!("warning: omitted {note}");
    }
    let cells: Vec<_> = summary
        .cells
        .into_iter()
        .filter(|c| lambda.is_none_or(|l| c.lambda == l))
        .filter(|c| sigma.is_none_or(|s| c.sigma == s))
        .filter(|c| nu.is_none_or(|n| c.nu == n))
        .filter(|c| objective.as_ref().is_none_or(|o| &c.objective == o))
        .collect();
    println!("{:<8} {:>6} {:>8} {:>8} {:>5} {:>12} {:>12} {:>12} {:>4} {:>4}", "est", "T", "lambda", "sigma", "nu", "mean", "std", "median", "n", "fail");
    for c in cells.iter().filter(|c| c.estimator == estimator.id()) {
        println!(
            "{:<8} {:>6} {:>8} {:>8} {:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>4} {:>4}",
            c.estimator, c.budget, c.lambda, c.sigma, c.nu, c.mean, c.std, c.median, c.n, c.failures
        );
    }
    let fit = harness::fit_rate(&cells, estimator, None)?;
    println!(
        "{estimator}: slope {:.4} +/- {:.4} (intercept {:.4}, T in [{}, {}], {} points)",
        fit.slope, fit.stderr, fit.intercept, fit.t_range.0, fit.t_range.1, fit.points
    );
    if theory {
        match fit.theory_exponent {
            Some(e) => println!("theory exponent: {e:.4}"),
            None => println!("theory exponent: none for this regime"),
        }
    }
    Ok(())
}

fn groundtruth(objective: &str, lambdas: &[f64], seed: u64) -> kernel_nc::Result<()> {
    let obj = ObjectiveId::parse(objective)?.build(seed)?;
    for g in harness::ground_truth(&obj, lambdas)? {
        let flag = if g.is_approximate() { " (approximate)" } else { "" };
        println!("{} lambda={} Z={:.12e} log Z={:.12} via {}{flag}", obj.name(), g.lambda, g.z(), g.log_z, g.method());
    }
    Ok(())
}
