//! Gaussian-process posterior with an incrementally bordered Cholesky factor,
//! maximum-variance point search and marginal-likelihood hyperparameter fitting.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::kernel::{KernelSpec, Smoothness};
use crate::samplers::RngStream;

/// Pivots below this value abort a factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Negative variances down to this value are rounding noise and clamp to zero.
pub const VARIANCE_CLAMP: f64 = -1e-8;

/// Immutable GP posterior over `n` observations.
///
/// `chol` stores the lower-triangular factor of `K + ξI` row by row (row `i`
/// holds `i + 1` entries); `alpha` solves `(K + ξI) α = y`.
#[derive(Debug, Clone)]
pub struct GpState {
    kernel: KernelSpec,
    dim: usize,
    xi: f64,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    chol: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

impl GpState {
    /// Prior (no observations).
    pub fn new(kernel: KernelSpec, dim: usize, xi: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(Error::InvalidParameter(format!("xi must be non-negative (got {xi})")));
        }
        Ok(GpState { kernel, dim, xi, xs: Vec::new(), ys: Vec::new(), chol: Vec::new(), alpha: Vec::new() })
    }

    /// Batch construction from scratch.
    pub fn from_data(kernel: KernelSpec, dim: usize, xi: f64, xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        let mut state = GpState::new(kernel, dim, xi)?;
        check_dim(xs.len(), ys.len())?;
        for x in &xs {
            check_dim(dim, x.len())?;
        }
        let n = xs.len();
        let mut chol: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = vec![0.0; i + 1];
            for j in 0..=i {
                let mut v = if i == j {
                    kernel.scale() + xi
                } else {
                    kernel.eval_unchecked(&xs[i], &xs[j])
                };
                let other = if j == i { &row[..j] } else { &chol[j][..j] };
                v -= dot(&row[..j], other);
                if i == j {
                    if v < PIVOT_TOLERANCE {
                        return Err(breakdown(i, v));
                    }
                    row[j] = v.sqrt();
                } else {
                    row[j] = v / chol[j][j];
                }
            }
            chol.push(row);
        }
        state.xs = xs;
        state.ys = ys;
        state.chol = chol;
        state.alpha = state.solve(&state.ys);
        Ok(state)
    }

    /// Returns a new state with one more observation; `self` is untouched.
    pub fn extend(&self, x: &[f64], y: f64) -> Result<GpState> {
        check_dim(self.dim, x.len())?;
        let k: Vec<f64> = self.xs.iter().map(|xi| self.kernel.eval_unchecked(x, xi)).collect();
        let row_head = self.forward(&k);
        let pivot = self.kernel.scale() + self.xi - dot(&row_head, &row_head);
        if pivot < PIVOT_TOLERANCE {
            return Err(breakdown(self.xs.len(), pivot));
        }
        let mut next = self.clone();
        let mut row = row_head;
        row.push(pivot.sqrt());
        next.chol.push(row);
        next.xs.push(x.to_vec());
        next.ys.push(y);
        next.alpha = next.solve(&next.ys);
        Ok(next)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn observations(&self) -> &[f64] {
        &self.ys
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Lower Cholesky factor as a dense square matrix.
    pub fn cholesky_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        self.chol
            .iter()
            .map(|row| {
                let mut full = row.clone();
                full.resize(n, 0.0);
                full
            })
            .collect()
    }

    /// μ(x) = k(x)ᵀ α.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.mean_unchecked(x))
    }

    /// σ²(x) = k(x,x) - k(x)ᵀ(K + ξI)⁻¹k(x), clamped to `[0, s]`.
    pub fn posterior_var(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let mut scratch = Vec::with_capacity(self.len());
        self.var_with_scratch(x, &mut scratch)
    }

    /// ∇μ(x) = Σᵢ αᵢ ∇ₓk(x, xᵢ).
    pub fn posterior_mean_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut g = vec![0.0; self.dim];
        self.mean_grad_into(x, &mut g);
        Ok(g)
    }

    #[inline]
    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> f64 {
        self.xs.iter().zip(&self.alpha).map(|(xi, a)| a * self.kernel.eval_unchecked(x, xi)).sum()
    }

    pub(crate) fn mean_grad_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (xi, a) in self.xs.iter().zip(&self.alpha) {
            self.kernel.accumulate_grad(x, xi, *a, out);
        }
    }

    pub(crate) fn var_with_scratch(&self, x: &[f64], scratch: &mut Vec<f64>) -> Result<f64> {
        let s = self.kernel.scale();
        scratch.clear();
        for (i, row) in self.chol.iter().enumerate() {
            let mut v = self.kernel.eval_unchecked(x, &self.xs[i]);
            for (l, prev) in row[..i].iter().zip(scratch.iter()) {
                v -= l * prev;
            }
            scratch.push(v / row[i]);
        }
        let var = s - dot(scratch, scratch);
        if var < VARIANCE_CLAMP {
            return Err(Error::NumericalBreakdown(format!(
                "posterior variance {var:e} is negative beyond rounding; raise xi"
            )));
        }
        Ok(var.clamp(0.0, s))
    }

    /// Solves L z = b.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(b.len());
        for (i, row) in self.chol.iter().enumerate() {
            let mut v = b[i];
            for (l, prev) in row[..i].iter().zip(&z) {
                v -= l * prev;
            }
            z.push(v / row[i]);
        }
        z
    }

    /// Solves L Lᵀ a = b.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = self.forward(b);
        let n = z.len();
        for i in (0..n).rev() {
            let mut v = z[i];
            for (k, zk) in z.iter().enumerate().skip(i + 1) {
                v -= self.chol[k][i] * zk;
            }
            z[i] = v / self.chol[i][i];
        }
        z
    }
}

fn breakdown(index: usize, pivot: f64) -> Error {
    Error::NumericalBreakdown(format!(
        "Cholesky pivot {pivot:e} at row {index} is below {PIVOT_TOLERANCE:e}; increase the jitter xi"
    ))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Seeds and refinement settings for [`max_variance_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBudget {
    /// Coarse-grid seed count target; realised as `q^d` points with
    /// `q = max(2, ⌊count^{1/d}⌋)`.
    pub grid_seeds: usize,
    pub random_seeds: usize,
    /// How many of the best seeds get refined by coordinate ascent.
    pub refine_top: usize,
    /// Refinement stops once the step falls below this.
    pub tolerance: f64,
}

impl SearchBudget {
    /// `2^d·⌈10/d⌉` grid seeds, `10d` uniform seeds.
    pub fn for_dim(d: usize) -> Self {
        let grid = (1usize << d.min(20)) * 10usize.div_ceil(d);
        SearchBudget { grid_seeds: grid, random_seeds: 10 * d, refine_top: 4, tolerance: 1e-4 }
    }

    fn grid_side(&self, d: usize) -> usize {
        let q = (self.grid_seeds as f64).powf(1.0 / d as f64).floor() as usize;
        // guard against powf rounding just below an integer root
        let q = if (q + 1).checked_pow(d as u32).is_some_and(|p| p <= self.grid_seeds) { q + 1 } else { q };
        q.max(2)
    }
}

/// Best point found for the posterior standard deviation over `[0,1]^d`.
///
/// Seeds are a closed coarse grid plus uniform draws from `rng`; the best
/// `refine_top` seeds are improved by a shrinking-step coordinate ascent that
/// only ever accepts increases.
pub fn max_variance_point(state: &GpState, search: &SearchBudget, rng: &mut RngStream) -> Result<Vec<f64>> {
    let d = state.dim();
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    let q = search.grid_side(d);
    let total = q.checked_pow(d as u32).unwrap_or(usize::MAX).min(1 << 20);
    for idx in 0..total {
        let mut rem = idx;
        let mut p = vec![0.0; d];
        for c in p.iter_mut() {
            *c = (rem % q) as f64 / (q - 1) as f64;
            rem /= q;
        }
        seeds.push(p);
    }
    for _ in 0..search.random_seeds {
        seeds.push((0..d).map(|_| rng.random::<f64>()).collect());
    }
    if state.is_empty() {
        return Ok(seeds.swap_remove(0));
    }

    let mut scratch = Vec::with_capacity(state.len());
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(seeds.len());
    for p in seeds {
        let v = state.var_with_scratch(&p, &mut scratch)?;
        scored.push((v, p));
    }
    // stable ordering: ties keep seed order
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(search.refine_top.max(1));

    let initial_step = 0.5 / (q - 1) as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (mut value, mut point) in scored {
        let mut step = initial_step;
        while step >= search.tolerance {
            let mut improved = false;
            for c in 0..d {
                for dir in [1.0, -1.0] {
                    let mut cand = point.clone();
                    cand[c] = (cand[c] + dir * step).clamp(0.0, 1.0);
                    if cand[c] == point[c] {
                        continue;
                    }
                    let v = state.var_with_scratch(&cand, &mut scratch)?;
                    if v > value {
                        value = v;
                        point = cand;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            best = Some((value, point));
        }
    }
    Ok(best.expect("at least one seed").1)
}

/// Log-spaced candidate grid for the (lengthscale, scale) search.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub lengthscale_range: (f64, f64),
    pub scale_range: (f64, f64),
    pub points_per_axis: usize,
    /// Coordinate-descent halvings after the grid pass.
    pub refine_rounds: usize,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid { lengthscale_range: (0.05, 2.0), scale_range: (0.01, 100.0), points_per_axis: 16, refine_rounds: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperFitResult {
    pub lengthscale: f64,
    pub scale: f64,
    pub log_marginal_likelihood: f64,
}

/// log p(y | X) = -½ yᵀ(K+ξI)⁻¹y - ½ log det(K+ξI) - (n/2) log 2π.
///
/// Returns `None` when the factorization breaks down.
pub fn log_marginal_likelihood(kernel: KernelSpec, xs: &[Vec<f64>], ys: &[f64], xi: f64) -> Option<f64> {
    let dim = xs.first()?.len();
    let state = GpState::from_data(kernel, dim, xi, xs.to_vec(), ys.to_vec()).ok()?;
    let log_det: f64 = state.chol.iter().enumerate().map(|(i, row)| 2.0 * row[i].ln()).sum();
    let fit = dot(ys, &state.alpha);
    let n = ys.len() as f64;
    let v = -0.5 * fit - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    v.is_finite().then_some(v)
}

/// Maximises the marginal likelihood over a log-spaced grid, then refines the
/// winning cell by coordinate descent in log space (kept inside the grid box).
pub fn fit_hyperparams(
    xs: &[Vec<f64>],
    ys: &[f64],
    nu: Smoothness,
    xi: f64,
    grid: &HyperGrid,
) -> Result<HyperFitResult> {
    check_dim(xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Err(Error::InvalidParameter("hyperparameter fit needs at least two points".into()));
    }
    if grid.points_per_axis < 2 {
        return Err(Error::InvalidParameter("hyperparameter grid needs two points per axis".into()));
    }
    let (l_lo, l_hi) = (grid.lengthscale_range.0.ln(), grid.lengthscale_range.1.ln());
    let (s_lo, s_hi) = (grid.scale_range.0.ln(), grid.scale_range.1.ln());
    let m = grid.points_per_axis;
    let axis = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (m - 1) as f64;

    let score = |log_l: f64, log_s: f64| -> Option<f64> {
        let kernel = KernelSpec::new(nu, log_l.exp(), log_s.exp()).ok()?;
        log_marginal_likelihood(kernel, xs, ys, xi)
    };

    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..m {
        for j in 0..m {
            let (ll, ls) = (axis(l_lo, l_hi, i), axis(s_lo, s_hi, j));
            if let Some(v) = score(ll, ls) {
                if best.is_none_or(|(bv, _, _)| v > bv) {
                    best = Some((v, ll, ls));
                }
            }
        }
    }
    let (mut value, mut ll, mut ls) = best.ok_or(Error::FitFailed)?;

    let mut step_l = 0.5 * (l_hi - l_lo) / (m - 1) as f64;
    let mut step_s = 0.5 * (s_hi - s_lo) / (m - 1) as f64;
    for _ in 0..grid.refine_rounds {
        for (dl, ds) in [(step_l, 0.0), (-step_l, 0.0), (0.0, step_s), (0.0, -step_s)] {
            let (cl, cs) = ((ll + dl).clamp(l_lo, l_hi), (ls + ds).clamp(s_lo, s_hi));
            if let Some(v) = score(cl, cs) {
                if v > value {
                    (value, ll, ls) = (v, cl, cs);
                }
            }
        }
        step_l *= 0.5;
        step_s *= 0.5;
    }
    Ok(HyperFitResult { lengthscale: ll.exp(), scale: ls.exp(), log_marginal_likelihood: value })
}
