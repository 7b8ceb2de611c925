//! Population-side Marchenko–Pastur machinery for an atomic population
//! spectrum `H = Σ w_k δ_{λ_k}` at aspect ratio `y = p/n`.
//!
//! Conventions: `s` is the Stieltjes transform of the companion limit
//! `F̲^{y,H}` (the `n × n` side), which solves
//! `z = −1/s + y Σ w λ/(1 + sλ)` with `Im s > 0`. Densities returned by
//! [`mp_density`] are for the `p × p` limit `F^{y,H}`, i.e. `Im s/(π y)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A population spectrum as weighted atoms, sorted non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    y: f64,
}

impl SpectralModel {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>, y: f64) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::Input(format!(
                "{} atoms with {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Input(format!("aspect ratio y = {y} must be positive")));
        }
        if let Some(a) = atoms.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Input(format!("atom {a} is not strictly positive")));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Input("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("weights sum to {total}, not 1")));
        }
        if y == 1.0 {
            log::warn!("aspect ratio y = 1 sits on the excluded boundary of the theory");
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights.into_iter().map(|w| w / total)).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (atoms, weights) = pairs.into_iter().unzip();
        Ok(Self { atoms, weights, y })
    }

    /// Uniform weights `1/m`: the spectral distribution of a `p × p` matrix
    /// with the given eigenvalues.
    pub fn uniform(atoms: Vec<f64>, y: f64) -> Result<Self> {
        let m = atoms.len();
        Self::new(atoms, vec![1.0 / m.max(1) as f64; m], y)
    }

    pub fn point_mass(value: f64, y: f64) -> Result<Self> {
        Self::new(vec![value], vec![1.0], y)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// The same model with every atom multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| a * c).collect(),
            weights: self.weights.clone(),
            y: self.y,
        }
    }

    /// `z(s)` and `dz/ds` of the inverse companion Stieltjes map.
    pub(crate) fn inverse_map(&self, s: Complex64) -> (Complex64, Complex64) {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut dsum = Complex64::new(0.0, 0.0);
        for (&l, &w) in self.atoms.iter().zip(&self.weights) {
            let inv = 1.0 / (1.0 + s * l);
            let t = w * l * inv;
            sum += t;
            dsum += t * l * inv;
        }
        let is = 1.0 / s;
        (-is + self.y * sum, is * is - self.y * dsum)
    }
}

/// Root of the critical-threshold equation with the `k` leading atoms
/// excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiSolution {
    pub k: usize,
    pub xi: f64,
    pub residual: f64,
}

fn xi_lhs(model: &SpectralModel, k: usize, xi: f64) -> f64 {
    model.atoms[k..]
        .iter()
        .zip(&model.weights[k..])
        .map(|(&l, &w)| {
            let t = l * xi / (1.0 - l * xi);
            w * t * t
        })
        .sum()
}

fn xi_lhs_derivative(model: &SpectralModel, k: usize, xi: f64) -> f64 {
    model.atoms[k..]
        .iter()
        .zip(&model.weights[k..])
        .map(|(&l, &w)| {
            let d = 1.0 - l * xi;
            2.0 * w * l * l * xi / (d * d * d)
        })
        .sum()
}

/// Solves `Σ_{j>k} w_j (λ_j ξ/(1 − λ_j ξ))² = 1/y` for `ξ ∈ (0, 1/λ_{k+1})`.
///
/// For uniform weights over `p` atoms this is the usual
/// `(1/p) Σ_{j>k} (λ_j ξ/(1 − λ_j ξ))² = n/p`. The left side is strictly
/// increasing, so bisection always brackets the root.
pub fn solve_xi(model: &SpectralModel, k: usize) -> Result<XiSolution> {
    if k >= model.len() {
        return Err(Error::Index(format!(
            "cannot exclude {k} leading atoms from a model with {} atoms",
            model.len()
        )));
    }
    let lead = model.atoms[k..]
        .iter()
        .zip(&model.weights[k..])
        .find(|(_, w)| **w > 0.0)
        .map(|(l, _)| *l)
        .ok_or_else(|| Error::Domain("all remaining atoms carry zero weight".into()))?;
    let target = 1.0 / model.y;
    let mut lo = 1e-12 / lead;
    let mut hi = (1.0 - 1e-9) / lead;
    if xi_lhs(model, k, hi) < target {
        return Err(Error::Numeric(format!(
            "critical-threshold equation has no root below 1/lambda_(k+1) for k = {k}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if xi_lhs(model, k, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 / lead {
            break;
        }
    }
    let mut xi = 0.5 * (lo + hi);
    // a few guarded Newton steps take the residual to round-off
    for _ in 0..3 {
        let f = xi_lhs(model, k, xi) - target;
        let step = f / xi_lhs_derivative(model, k, xi);
        let next = xi - step;
        if next > lo && next < hi {
            xi = next;
        }
    }
    let residual = (xi_lhs(model, k, xi) - target).abs();
    if residual >= 1e-10 * target.max(1.0) {
        return Err(Error::Numeric(format!(
            "critical-threshold residual {residual:.3e} above tolerance (k = {k})"
        )));
    }
    Ok(XiSolution { k, xi, residual })
}

fn check_below_pole(model: &SpectralModel, xi: f64) -> Result<()> {
    if !(xi > 0.0) || xi * model.max_atom() >= 1.0 {
        return Err(Error::Domain(format!(
            "xi = {xi} must satisfy 0 < xi * lambda_1 < 1 (lambda_1 = {})",
            model.max_atom()
        )));
    }
    Ok(())
}

/// Rightmost endpoint of the support of the limiting sample spectrum,
/// `r = (1/ξ₀)(1 + y ∫ λξ₀/(1 − λξ₀) dH)`.
pub fn edge(model: &SpectralModel, xi0: f64) -> Result<f64> {
    check_below_pole(model, xi0)?;
    let integral: f64 = model
        .atoms
        .iter()
        .zip(&model.weights)
        .map(|(&l, &w)| w * l * xi0 / (1.0 - l * xi0))
        .sum();
    Ok((1.0 + model.y * integral) / xi0)
}

/// Cube of the Tracy-Widom scale of the leading gap,
/// `σ³ = (1/ξ³)(1 + y ∫ (λξ/(1 − λξ))³ dH)`.
pub fn sigma_cubed(model: &SpectralModel, xi: f64) -> Result<f64> {
    check_below_pole(model, xi)?;
    let integral: f64 = model
        .atoms
        .iter()
        .zip(&model.weights)
        .map(|(&l, &w)| {
            let t = l * xi / (1.0 - l * xi);
            w * t * t * t
        })
        .sum();
    Ok((1.0 + model.y * integral) / (xi * xi * xi))
}

fn collides(model: &SpectralModel, beta: f64) -> bool {
    model.atoms.iter().any(|&l| (beta - l).abs() <= 1e-9 * l.abs().max(1.0))
}

/// `ψ(β) = β + yβ ∫ λ/(β − λ) dH`.
pub fn psi(model: &SpectralModel, beta: f64) -> Result<f64> {
    if collides(model, beta) {
        return Err(Error::Domain(format!("beta = {beta} coincides with an atom")));
    }
    let integral: f64 = model
        .atoms
        .iter()
        .zip(&model.weights)
        .map(|(&l, &w)| w * l / (beta - l))
        .sum();
    Ok(beta + model.y * beta * integral)
}

/// `ψ′(β) = 1 − y ∫ λ²/(β − λ)² dH`, and 0 on the support of `H`.
pub fn psi_prime(model: &SpectralModel, beta: f64) -> f64 {
    if collides(model, beta) {
        return 0.0;
    }
    let integral: f64 = model
        .atoms
        .iter()
        .zip(&model.weights)
        .map(|(&l, &w)| w * l * l / ((beta - l) * (beta - l)))
        .sum();
    1.0 - model.y * integral
}

/// Iteration controls for the Stieltjes solver.
#[derive(Debug, Clone, Copy)]
pub struct StieltjesOptions {
    pub damping: f64,
    pub max_fixed_point: usize,
    pub max_newton: usize,
}

impl Default for StieltjesOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_fixed_point: 100_000,
            max_newton: 60,
        }
    }
}

fn residual(model: &SpectralModel, z: Complex64, s: Complex64) -> f64 {
    (model.inverse_map(s).0 - z).norm()
}

fn residual_ok(model: &SpectralModel, z: Complex64, s: Complex64) -> bool {
    residual(model, z, s) < 1e-10 * z.norm().max(1.0)
}

/// Newton iteration on `z(s) = z` from `s0`; returns the root only when it
/// converged into the upper half plane (the unique admissible solution).
pub(crate) fn newton_root(model: &SpectralModel, z: Complex64, s0: Complex64, max_iter: usize) -> Option<Complex64> {
    let mut s = s0;
    for _ in 0..max_iter {
        let (zs, dz) = model.inverse_map(s);
        if !(dz.norm() > 0.0) {
            return None;
        }
        let step = (zs - z) / dz;
        s -= step;
        if !(s.re.is_finite() && s.im.is_finite()) {
            return None;
        }
        if step.norm() <= 1e-15 * s.norm().max(1e-300) {
            break;
        }
    }
    (s.im > 0.0 && residual_ok(model, z, s)).then_some(s)
}

fn fixed_point(model: &SpectralModel, z: Complex64, mut s: Complex64, damping: f64, max_iter: usize) -> Complex64 {
    for _ in 0..max_iter {
        let mut sum = Complex64::new(0.0, 0.0);
        for (&l, &w) in model.atoms.iter().zip(&model.weights) {
            sum += w * l / (1.0 + s * l);
        }
        let next = -1.0 / (z - model.y * sum);
        let upd = damping * s + (1.0 - damping) * next;
        let delta = (upd - s).norm();
        s = upd;
        if delta <= 1e-13 * s.norm().max(1e-300) {
            break;
        }
    }
    s
}

/// Companion Stieltjes transform `s̲(z)` for `Im z > 0`.
///
/// Damped fixed-point iteration from `−1/z` followed by Newton polishing.
/// When the fixed point is too slow (tiny `Im z`) the solve is continued
/// down a ladder of imaginary offsets, starting where the fixed point
/// contracts quickly.
pub fn mp_stieltjes(z: Complex64, model: &SpectralModel, opts: &StieltjesOptions) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("Stieltjes transform needs Im z > 0, got {z}")));
    }
    let quick = fixed_point(model, z, -1.0 / z, opts.damping, opts.max_fixed_point.min(500));
    if let Some(s) = newton_root(model, z, quick, opts.max_newton) {
        return Ok(s);
    }
    let top = 0.5 * (1.0 + z.re.abs()).max(model.max_atom());
    let mut etas = vec![z.im];
    while *etas.last().unwrap() < top {
        let next = etas.last().unwrap() * 10.0;
        etas.push(next);
    }
    etas.reverse();
    let mut s = {
        let z0 = Complex64::new(z.re, etas[0]);
        let s0 = fixed_point(model, z0, -1.0 / z0, opts.damping, opts.max_fixed_point);
        newton_root(model, z0, s0, opts.max_newton).unwrap_or(s0)
    };
    for &eta in &etas[1..] {
        let zk = Complex64::new(z.re, eta);
        s = match newton_root(model, zk, s, opts.max_newton) {
            Some(r) => r,
            None => {
                let fp = fixed_point(model, zk, s, opts.damping, opts.max_fixed_point);
                newton_root(model, zk, fp, opts.max_newton).unwrap_or(fp)
            }
        };
    }
    if s.im > 0.0 && residual_ok(model, z, s) {
        Ok(s)
    } else {
        Err(Error::Numeric(format!(
            "Stieltjes solver did not converge at z = {z} (residual {:.3e})",
            residual(model, z, s)
        )))
    }
}

/// Solves along an ascending real grid at fixed offset `eta`, warm-starting
/// Newton from the neighbouring grid point (right to left) and falling back
/// to [`mp_stieltjes`] whenever the warm start leaves the upper half plane.
pub(crate) fn stieltjes_on_grid(model: &SpectralModel, grid: &[f64], eta: f64) -> Result<Vec<Complex64>> {
    let opts = StieltjesOptions::default();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut prev: Option<Complex64> = None;
    for i in (0..grid.len()).rev() {
        let z = Complex64::new(grid[i], eta);
        let s = match prev.and_then(|p| newton_root(model, z, p, 40)) {
            Some(s) => s,
            None => mp_stieltjes(z, model, &opts)?,
        };
        out[i] = s;
        prev = Some(s);
    }
    Ok(out)
}

/// Default imaginary offset for density evaluation: `1e-5` times the
/// right edge of the support.
pub fn default_eta(model: &SpectralModel) -> Result<f64> {
    let xi0 = solve_xi(model, 0)?.xi;
    Ok(1e-5 * edge(model, xi0)?)
}

/// Interval `[lo, r]` containing the continuous part of `F^{y,H}`:
/// `lo = λ_min (1 − √y)²` (slightly widened) and `r` the right edge.
pub fn support_bracket(model: &SpectralModel) -> Result<(f64, f64)> {
    let xi0 = solve_xi(model, 0)?.xi;
    let r = edge(model, xi0)?;
    let lower = model.min_atom() * (1.0 - model.y.sqrt()).powi(2);
    Ok(((0.98 * lower).max(1e-6 * r), r))
}

/// Density of the `p × p` limiting spectral distribution `F^{y,H}` on an
/// increasing grid: `max(0, Im s̲(x + iη)/(π y))`.
pub fn mp_density(model: &SpectralModel, grid: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("density offset eta = {eta} must be positive")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("density grid must be strictly increasing".into()));
    }
    let scale = std::f64::consts::PI * model.y;
    Ok(stieltjes_on_grid(model, grid, eta)?
        .into_iter()
        .map(|s| (s.im / scale).max(0.0))
        .collect())
}

/// Uniform grid of `points` nodes over [`support_bracket`].
pub fn density_grid(model: &SpectralModel, points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = support_bracket(model)?;
    let m = points.max(2);
    Ok((0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect())
}

/// Left end `l` of the rightmost support interval of `F^{y,H}`, located on
/// a grid of `points` nodes below the right edge `r`. A short interval
/// `r − l` signals that the edge regularity assumed by the Tracy-Widom limit
/// is weak; it is reported as a diagnostic only.
pub fn rightmost_interval(model: &SpectralModel, points: usize) -> Result<(f64, f64)> {
    let (lo, r) = support_bracket(model)?;
    let grid = density_grid(model, points)?;
    let eta = 1e-5 * r;
    let dens = mp_density(model, &grid, eta)?;
    let peak = dens.iter().cloned().fold(0.0, f64::max);
    // walk left from the edge past the last interval's mass
    let mut i = grid.len() - 1;
    while i > 0 && dens[i] <= 1e-3 * peak {
        i -= 1;
    }
    while i > 0 && dens[i - 1] > 1e-3 * peak {
        i -= 1;
    }
    Ok((grid[i].max(lo), r))
}
