//! Packed bump functions with exactly computable normalizing constants.
//!
//! The unit cube holds `M = ⌊1/w⌋^d` cells of side `w`, each carrying an
//! optional downward bump `g(x) = -(η / h(0)) h(2(x - c) / w)` built from the
//! mollifier `h(u) = exp(-1 / (1 - ‖u‖²))` on the unit ball. Because supports
//! are disjoint, `Z = 1 + ΔZ · Σ Sᵢ` where ΔZ is the single-cell gain.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::Smoothness;
use crate::objectives::Objective;
use crate::samplers::RngStream;

const RADIAL_NODES: usize = 10_000;

/// Standard mollifier on the unit ball.
pub fn mollifier(norm_sq: f64) -> f64 {
    if norm_sq >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - norm_sq)).exp()
    }
}

/// −η-deep bump of width `w` (support radius `w/2`) centred at `center`.
pub fn bump(x: &[f64], center: &[f64], w: f64, eta: f64) -> f64 {
    let norm_sq: f64 = x.iter().zip(center).map(|(a, c)| (2.0 * (a - c) / w).powi(2)).sum();
    if norm_sq >= 1.0 {
        return 0.0;
    }
    // h(u)/h(0) = exp(1 - 1/(1 - |u|^2))
    -eta * (1.0 - 1.0 / (1.0 - norm_sq)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpClassSpec {
    pub d: usize,
    pub w: f64,
    pub eta: f64,
    pub norm_budget: f64,
    pub nu: Smoothness,
    pub c_eta: f64,
    pub cells_per_side: usize,
    pub m: usize,
}

impl BumpClassSpec {
    /// Height from the norm budget: η = B · c_η · M^{-(ν/d + 1/2)}.
    pub fn new(d: usize, w: f64, nu: Smoothness, norm_budget: f64, c_eta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Spec("dimension must be positive".into()));
        }
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::Spec(format!("bump width must lie in (0, 1] (got {w})")));
        }
        if !(norm_budget > 0.0 && c_eta > 0.0) {
            return Err(Error::Spec("norm budget and c_eta must be positive".into()));
        }
        let cells_per_side = (1.0 / w + 1e-12).floor() as usize;
        let m = cells_per_side
            .checked_pow(d as u32)
            .ok_or_else(|| Error::Spec(format!("{cells_per_side}^{d} cells overflow")))?;
        let eta = norm_budget * c_eta * (m as f64).powf(-(nu.value() / d as f64 + 0.5));
        Ok(BumpClassSpec { d, w, eta, norm_budget, nu, c_eta, cells_per_side, m })
    }

    /// Overrides the bump height.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// Centre of cell `index` (row-major over the cell grid).
    pub fn cell_centre(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        (0..self.d)
            .map(|_| {
                let i = rem % self.cells_per_side;
                rem /= self.cells_per_side;
                (i as f64 + 0.5) * self.w
            })
            .collect()
    }

    /// Cell index containing `x`, if `x` is inside the packed region.
    fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut index = 0;
        let mut stride = 1;
        for &c in x {
            let i = (c / self.w).floor();
            if i < 0.0 || i as usize >= self.cells_per_side {
                return None;
            }
            index += i as usize * stride;
            stride *= self.cells_per_side;
        }
        Some(index)
    }

    /// Random sign vector with P(Sᵢ = 1) = `density`.
    pub fn random_signs(&self, density: f64, rng: &mut RngStream) -> Vec<bool> {
        (0..self.m).map(|_| rng.random::<f64>() < density).collect()
    }
}

/// f = Σ Sᵢ gᵢ over the cell grid.
pub fn make_instance(spec: &BumpClassSpec, signs: &[bool]) -> Result<Objective> {
    if signs.len() != spec.m {
        return Err(Error::Spec(format!("expected {} signs, got {}", spec.m, signs.len())));
    }
    let s = spec.clone();
    let active = signs.to_vec();
    let count = signs.iter().filter(|b| **b).count();
    let name = format!("hardclass-{}d-w{}-k{}", spec.d, spec.w, count);
    let eval_spec = s.clone();
    let objective = Objective::new(name, spec.d, spec.nu, move |x| match eval_spec.cell_of(x) {
        Some(i) if active[i] => bump(x, &eval_spec.cell_centre(i), eval_spec.w, eval_spec.eta),
        _ => 0.0,
    })
    .with_log_partition(move |lambda| (1.0 + delta_z(&s, lambda) * count as f64).ln());
    Ok(objective)
}

/// Surface area of the unit sphere in ℝ^d (2 for d = 1).
fn unit_sphere_area(d: usize) -> f64 {
    // Γ(d/2) by recurrence from Γ(1/2) or Γ(1)
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut arg = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while arg < d as f64 / 2.0 - 1e-12 {
        gamma *= arg;
        arg += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma
}

/// ΔZ = ∫_cell (e^{-λg} − 1), by radial Simpson quadrature on 10⁴ intervals.
pub fn delta_z(spec: &BumpClassSpec, lambda: f64) -> f64 {
    if lambda == 0.0 || spec.eta == 0.0 {
        return 0.0;
    }
    let d = spec.d;
    let a = lambda * spec.eta;
    let integrand = |t: f64| {
        let bump = if t >= 1.0 { 0.0 } else { (1.0 - 1.0 / (1.0 - t * t)).exp() };
        (a * bump).exp_m1() * t.powi(d as i32 - 1)
    };
    let n = RADIAL_NODES;
    let h = 1.0 / n as f64;
    let mut sum = integrand(0.0) + integrand(1.0);
    for i in 1..n {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * integrand(i as f64 * h);
    }
    unit_sphere_area(d) * (0.5 * spec.w).powi(d as i32) * sum * h / 3.0
}

/// Z = 1 + ΔZ Σ Sᵢ.
pub fn analytic_nc(spec: &BumpClassSpec, signs: &[bool], lambda: f64) -> Result<f64> {
    if signs.len() != spec.m {
        return Err(Error::Spec(format!("expected {} signs, got {}", spec.m, signs.len())));
    }
    let count = signs.iter().filter(|b| **b).count();
    if count == 0 {
        return Ok(1.0);
    }
    Ok(1.0 + delta_z(spec, lambda) * count as f64)
}

/// (c₁ wᵈ (e^{c₂λη} − 1), wᵈ (e^{λη} − 1)) with c₁ = 2^{-d},
/// c₂ = h(½,…,½)/h(0).
pub fn delta_z_bounds(spec: &BumpClassSpec, lambda: f64) -> Result<(f64, f64)> {
    let d = spec.d;
    if d >= 4 {
        return Err(Error::BoundInapplicable(d));
    }
    let c1 = 0.5f64.powi(d as i32);
    let c2 = mollifier(d as f64 / 4.0) / mollifier(0.0);
    let wd = spec.w.powi(d as i32);
    let a = lambda * spec.eta;
    Ok((c1 * wd * (c2 * a).exp_m1(), wd * a.exp_m1()))
}

/// Parses `d=2,w=0.2,signs-seed=3,sign-density=0.5[,nu=2.5][,B=1][,c-eta=1][,eta=..]`.
pub fn from_registry_params(params: &str, fallback_seed: u64) -> Result<Objective> {
    let mut d = 1usize;
    let mut w = 0.1;
    let mut seed = fallback_seed;
    let mut density = 0.5;
    let mut nu = Smoothness::FiveHalves;
    let mut budget = 1.0;
    let mut c_eta = 1.0;
    let mut eta = None;
    let bad = |k: &str, v: &str| Error::UnknownObjective(format!("hardclass parameter {k}={v}"));
    for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| bad(pair, ""))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "d" => d = v.parse().map_err(|_| bad(k, v))?,
            "w" => w = v.parse().map_err(|_| bad(k, v))?,
            "signs-seed" => seed = v.parse().map_err(|_| bad(k, v))?,
            "sign-density" => density = v.parse().map_err(|_| bad(k, v))?,
            "nu" => nu = v.parse().map_err(|_| bad(k, v))?,
            "B" => budget = v.parse().map_err(|_| bad(k, v))?,
            "c-eta" => c_eta = v.parse().map_err(|_| bad(k, v))?,
            "eta" => eta = Some(v.parse().map_err(|_| bad(k, v))?),
            _ => return Err(bad(k, v)),
        }
    }
    let mut spec = BumpClassSpec::new(d, w, nu, budget, c_eta)?;
    if let Some(e) = eta {
        spec = spec.with_eta(e);
    }
    let signs = spec.random_signs(density, &mut RngStream::at(seed, vec![0x5167]));
    make_instance(&spec, &signs)
}
