use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::{CellPlacement, Method};
use crate::kernel::Smoothness;
use crate::objectives::ObjectiveId;
use crate::quadrature::DEFAULT_BUDGET;

/// How GP hyperparameters are chosen for every cell of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum HyperChoice {
    /// Pinned hyperparameters when the objective has them, learned otherwise.
    #[default]
    Auto,
    Learned,
    Fixed(f64, f64),
}

/// One experiment grid: the cross product of estimators, budgets, λ, σ and
/// trials on a single objective.
///
/// Plans are read from a flat `key = value` file; `#` starts a comment and
/// arrays are written `[a, b, c]`:
///
/// ```text
/// objective  = synthetic-1d
/// estimators = [mc, mvs-lmc]
/// T          = [64, 128, 256]
/// lambda     = [0.5]
/// sigma      = [0.0, 0.01]
/// trials     = 100
/// seed       = 7
/// out        = results.csv
/// ```
///
/// Optional keys: `nu`, `workers`, `timing`, `hyper` (`auto`, `learned` or
/// `fixed:<l>,<s>`), `placement` (`centre` or `corner`), `noise_correction`,
/// `grid_budget`, `lmc_steps`, `lmc_beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub objective: ObjectiveId,
    pub estimators: Vec<Method>,
    pub budgets: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Overrides the objective's default smoothness.
    pub nu: Option<Smoothness>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    /// Record wall-clock times; off by default so reruns are byte-identical.
    pub timing: bool,
    pub hyper: HyperChoice,
    pub placement: CellPlacement,
    pub noise_correction: bool,
    /// Node budget of the surrogate-integral grid.
    pub grid_budget: usize,
    pub lmc_steps: Option<usize>,
    pub lmc_beta: Option<f64>,
}

impl ExperimentPlan {
    /// A plan with default options for the given sweep.
    pub fn new(objective: &str, estimators: Vec<Method>, budgets: Vec<usize>, lambdas: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let plan = ExperimentPlan {
            objective: ObjectiveId::parse(objective)?,
            estimators,
            budgets,
            lambdas,
            sigmas,
            nu: None,
            trials: 100,
            seed: 0,
            out: PathBuf::from("results.csv"),
            workers: default_workers(),
            timing: false,
            hyper: HyperChoice::Auto,
            placement: CellPlacement::Centre,
            noise_correction: true,
            grid_budget: DEFAULT_BUDGET,
            lmc_steps: None,
            lmc_beta: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Plan(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut objective = None;
        let mut estimators = None;
        let mut budgets = None;
        let mut lambdas = None;
        let mut sigmas = None;
        let mut out = None;
        let mut plan_opts = Options::default();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Plan(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let at = |e: Error| Error::Plan(format!("line {}: `{key}`: {}", lineno + 1, plain(e)));
            match key {
                "objective" => objective = Some(ObjectiveId::parse(unquote(value)).map_err(at)?),
                "estimators" => estimators = Some(parse_list(value, |s| s.parse::<Method>()).map_err(at)?),
                "T" => budgets = Some(parse_list(value, parse_num::<usize>).map_err(at)?),
                "lambda" => lambdas = Some(parse_list(value, parse_num::<f64>).map_err(at)?),
                "sigma" => sigmas = Some(parse_list(value, parse_num::<f64>).map_err(at)?),
                "nu" => plan_opts.nu = Some(value.parse::<Smoothness>().map_err(at)?),
                "trials" => plan_opts.trials = Some(parse_num(value).map_err(at)?),
                "seed" => plan_opts.seed = Some(parse_num(value).map_err(at)?),
                "out" => out = Some(PathBuf::from(unquote(value))),
                "workers" => plan_opts.workers = Some(parse_num(value).map_err(at)?),
                "timing" => plan_opts.timing = Some(parse_bool(value).map_err(at)?),
                "hyper" => plan_opts.hyper = Some(parse_hyper(value).map_err(at)?),
                "placement" => plan_opts.placement = Some(parse_placement(value).map_err(at)?),
                "noise_correction" => plan_opts.noise_correction = Some(parse_bool(value).map_err(at)?),
                "grid_budget" => plan_opts.grid_budget = Some(parse_num(value).map_err(at)?),
                "lmc_steps" => plan_opts.lmc_steps = Some(parse_num(value).map_err(at)?),
                "lmc_beta" => plan_opts.lmc_beta = Some(parse_num(value).map_err(at)?),
                other => return Err(Error::Plan(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }

        let missing = |k: &str| Error::Plan(format!("missing required key `{k}`"));
        let plan = ExperimentPlan {
            objective: objective.ok_or_else(|| missing("objective"))?,
            estimators: estimators.ok_or_else(|| missing("estimators"))?,
            budgets: budgets.ok_or_else(|| missing("T"))?,
            lambdas: lambdas.ok_or_else(|| missing("lambda"))?,
            sigmas: sigmas.unwrap_or_else(|| vec![0.0]),
            nu: plan_opts.nu,
            trials: plan_opts.trials.unwrap_or(100),
            seed: plan_opts.seed.unwrap_or(0),
            out: out.ok_or_else(|| missing("out"))?,
            workers: plan_opts.workers.unwrap_or_else(default_workers),
            timing: plan_opts.timing.unwrap_or(false),
            hyper: plan_opts.hyper.unwrap_or_default(),
            placement: plan_opts.placement.unwrap_or_default(),
            noise_correction: plan_opts.noise_correction.unwrap_or(true),
            grid_budget: plan_opts.grid_budget.unwrap_or(DEFAULT_BUDGET),
            lmc_steps: plan_opts.lmc_steps,
            lmc_beta: plan_opts.lmc_beta,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Plan(msg));
        if self.estimators.is_empty() || self.budgets.is_empty() || self.lambdas.is_empty() || self.sigmas.is_empty() {
            return fail("estimators, T, lambda and sigma must all be non-empty".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if let Some(&l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return fail(format!("lambda values must be positive (got {l})"));
        }
        if let Some(&s) = self.sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return fail(format!("sigma values must be non-negative (got {s})"));
        }
        if self.grid_budget == 0 {
            return fail("grid_budget must be positive".into());
        }
        self.objective.build(0).map_err(|e| Error::Plan(format!("objective `{}`: {}", self.objective, plain(e))))?;
        Ok(())
    }

    /// Canonical `key = value` rendering; parses back to an equal plan.
    pub fn to_text(&self) -> String {
        let list = |v: Vec<String>| format!("[{}]", v.join(", "));
        let mut s = String::new();
        let _ = writeln!(s, "objective = {}", self.objective);
        let _ = writeln!(s, "estimators = {}", list(self.estimators.iter().map(|m| m.to_string()).collect()));
        let _ = writeln!(s, "T = {}", list(self.budgets.iter().map(|t| t.to_string()).collect()));
        let _ = writeln!(s, "lambda = {}", list(self.lambdas.iter().map(|v| format!("{v:?}")).collect()));
        let _ = writeln!(s, "sigma = {}", list(self.sigmas.iter().map(|v| format!("{v:?}")).collect()));
        if let Some(nu) = self.nu {
            let _ = writeln!(s, "nu = {nu}");
        }
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "timing = {}", self.timing);
        let hyper = match self.hyper {
            HyperChoice::Auto => "auto".to_string(),
            HyperChoice::Learned => "learned".to_string(),
            HyperChoice::Fixed(l, sc) => format!("fixed:{l:?},{sc:?}"),
        };
        let _ = writeln!(s, "hyper = {hyper}");
        let placement = match self.placement {
            CellPlacement::Centre => "centre",
            CellPlacement::Corner => "corner",
        };
        let _ = writeln!(s, "placement = {placement}");
        let _ = writeln!(s, "noise_correction = {}", self.noise_correction);
        let _ = writeln!(s, "grid_budget = {}", self.grid_budget);
        if let Some(steps) = self.lmc_steps {
            let _ = writeln!(s, "lmc_steps = {steps}");
        }
        if let Some(beta) = self.lmc_beta {
            let _ = writeln!(s, "lmc_beta = {beta:?}");
        }
        s
    }

    /// Number of (estimator, T, λ, σ, trial) cells.
    pub fn cell_count(&self) -> usize {
        self.estimators.len() * self.budgets.len() * self.lambdas.len() * self.sigmas.len() * self.trials
    }
}

#[derive(Default)]
struct Options {
    nu: Option<Smoothness>,
    trials: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    timing: Option<bool>,
    hyper: Option<HyperChoice>,
    placement: Option<CellPlacement>,
    noise_correction: Option<bool>,
    grid_budget: Option<usize>,
    lmc_steps: Option<usize>,
    lmc_beta: Option<f64>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn plain(e: Error) -> String {
    match e {
        Error::Plan(m) | Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn unquote(s: &str) -> &str {
    s.trim().trim_matches('"')
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    let s = unquote(s);
    s.parse().map_err(|_| Error::Plan(format!("cannot parse `{s}` as a number")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match unquote(s) {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Plan(format!("expected true or false, got `{other}`"))),
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let inner = s.trim();
    let inner = match (inner.strip_prefix('['), inner.ends_with(']')) {
        (Some(rest), true) => &rest[..rest.len() - 1],
        (None, false) => inner,
        _ => return Err(Error::Plan(format!("unbalanced brackets in `{s}`"))),
    };
    inner.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| item(unquote(t))).collect()
}

fn parse_hyper(s: &str) -> Result<HyperChoice> {
    match unquote(s) {
        "auto" => Ok(HyperChoice::Auto),
        "learned" => Ok(HyperChoice::Learned),
        other => {
            let pair = other
                .strip_prefix("fixed:")
                .ok_or_else(|| Error::Plan(format!("expected auto, learned or fixed:<l>,<s>, got `{other}`")))?;
            let vals = parse_list(pair, parse_num::<f64>)?;
            match vals[..] {
                [l, sc] if l > 0.0 && sc > 0.0 => Ok(HyperChoice::Fixed(l, sc)),
                _ => Err(Error::Plan(format!("fixed hyperparameters need two positive values, got `{pair}`"))),
            }
        }
    }
}

fn parse_placement(s: &str) -> Result<CellPlacement> {
    match unquote(s) {
        "centre" | "center" => Ok(CellPlacement::Centre),
        "corner" => Ok(CellPlacement::Corner),
        other => Err(Error::Plan(format!("expected centre or corner, got `{other}`"))),
    }
}
