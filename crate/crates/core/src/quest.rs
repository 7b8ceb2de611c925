//! Population spectrum estimation by inverting the Marchenko–Pastur map.
//!
//! The population spectrum is modelled by `K` weighted atoms. The top `T`
//! atoms are singletons of mass `1/p`, so isolated leading eigenvalues can be
//! represented without dragging the bulk. The remaining `p − T` ranks are
//! split into near-equal blocks. Weights are fixed by the block sizes, and
//! only the log-locations are fitted. Sample-eigenvalue quantiles implied
//! by the model are matched to the observed eigenvalues in least squares by
//! Levenberg–Marquardt with an analytic Jacobian of the forward map.

use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{edge, solve_xi, stieltjes_on_grid, support_bracket, SpectralModel};
use crate::spectra::EigenReport;

/// Estimated population eigenvalues `λ̃_{j,Q}` (the `j/p`-quantiles of the
/// fitted spectrum), non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub quantile_eigs: Vec<f64>,
    pub fit_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SpectrumEstimate {
    /// Wraps a user-supplied vector after checking positivity and order.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Input(
                "spectrum estimate must be nonempty and strictly positive".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            log::warn!("spectrum estimate was not sorted non-increasing; sorting");
            values.sort_by(|a, b| b.total_cmp(a));
        }
        Ok(Self {
            quantile_eigs: values,
            fit_residual: 0.0,
            iterations: 0,
            converged: true,
        })
    }
}

/// Pluggable source of `λ̃_{j,Q}`.
pub trait SpectrumEstimator: Send + Sync {
    fn estimate(&self, report: &EigenReport) -> Result<SpectrumEstimate>;
}

/// Controls for the built-in estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuestOptions {
    /// Maximum number of atoms `K` (capped at `p`).
    pub atoms: usize,
    /// Maximum number of leading singleton atoms.
    pub singletons: usize,
    /// Density grid size for the forward map.
    pub grid: usize,
    /// Forward-map evaluation budget.
    pub max_evals: usize,
    /// Relative cost reduction per step below which a step counts as stalled;
    /// three stalled steps in a row end the fit.
    pub tol: f64,
    /// Weight of the penalty `Σ (ln τ_k − ln τ_{k+1})²` over the singleton
    /// atoms. Subcritical singletons barely move any sample quantile, so
    /// without it they drift freely and can chase edge fluctuations.
    pub smoothing: f64,
    /// Weight of the second-difference penalty over the bulk blocks, which
    /// regularizes directions the forward map barely sees.
    pub curvature: f64,
}

impl Default for QuestOptions {
    fn default() -> Self {
        Self {
            atoms: 32,
            singletons: 8,
            grid: 512,
            max_evals: 2000,
            tol: 1e-4,
            smoothing: 0.02,
            curvature: 1e-3,
        }
    }
}

impl SpectrumEstimator for QuestOptions {
    fn estimate(&self, report: &EigenReport) -> Result<SpectrumEstimate> {
        estimate_spectrum(report, self)
    }
}

/// Reads `λ̃_{j,Q}` from a CSV file with a `lambda_tilde_q` column, so that
/// outputs of another spectrum estimator can be injected verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSpectrum {
    pub values: Vec<f64>,
}

impl ExternalSpectrum {
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let col = rdr
            .headers()?
            .iter()
            .position(|h| h.trim() == "lambda_tilde_q")
            .ok_or_else(|| Error::Input(format!("{}: no lambda_tilde_q column", path.display())))?;
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let cell = rec.get(col).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: i + 2,
                col: col + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            values.push(v);
        }
        Ok(Self { values })
    }
}

impl SpectrumEstimator for ExternalSpectrum {
    fn estimate(&self, report: &EigenReport) -> Result<SpectrumEstimate> {
        if self.values.len() != report.p {
            return Err(Error::Dimension(format!(
                "external spectrum has {} values for p = {}",
                self.values.len(),
                report.p
            )));
        }
        SpectrumEstimate::from_values(self.values.clone())
    }
}

fn singleton_count(p: usize, opts: &QuestOptions) -> usize {
    opts.singletons.min(opts.atoms.clamp(1, p) / 4)
}

/// Block layout: sizes in population ranks, largest eigenvalues first.
fn block_sizes(p: usize, opts: &QuestOptions) -> Vec<usize> {
    let k = opts.atoms.clamp(1, p);
    let t = singleton_count(p, opts);
    let rest = p - t;
    let blocks = k - t;
    let mut sizes = vec![1; t];
    sizes.extend((0..blocks).map(|b| rest / blocks + usize::from(b < rest % blocks)));
    sizes
}

fn block_weights(sizes: &[usize], p: usize) -> Vec<f64> {
    sizes.iter().map(|&s| s as f64 / p as f64).collect()
}

/// Continuous mass of the `p × p` limit: `min(1, 1/y)`.
fn continuous_mass(y: f64) -> f64 {
    (1.0 / y).min(1.0)
}

/// Ascending quantile levels `(j − ½)/p` that fall in the continuous part,
/// rescaled to `(0, 1)`, along with how many leading levels sit at zero.
fn continuous_levels(p: usize, y: f64) -> (usize, Vec<f64>) {
    let zero = 1.0 - continuous_mass(y);
    let mc = continuous_mass(y);
    let mut zeros = 0;
    let mut levels = Vec::with_capacity(p);
    for j in 0..p {
        let u = (j as f64 + 0.5) / p as f64;
        if u <= zero {
            zeros += 1;
        } else {
            levels.push((u - zero) / mc);
        }
    }
    (zeros, levels)
}

struct Forward {
    /// Model quantiles at the requested (ascending) levels.
    quantiles: Vec<f64>,
    /// `∂q_i/∂ln τ_k`, row-major `levels × atoms`, atoms in input order.
    jacobian: Option<Vec<f64>>,
}

/// Quantiles of the continuous part of `F^{y,H}` at ascending levels, by
/// cumulative trapezoid integration of the density on a uniform grid over
/// [`support_bracket`] and linear inversion.
///
/// The Jacobian is exact for this discretization: it includes the motion of
/// the grid endpoints and of the offset `η`, both of which depend on the
/// atoms.
fn forward(taus: &[f64], ws: &[f64], y: f64, levels: &[f64], grid_size: usize, with_jac: bool) -> Result<Forward> {
    let model = SpectralModel::new(taus.to_vec(), ws.to_vec(), y)?;
    let xi0 = solve_xi(&model, 0)?.xi;
    let r = edge(&model, xi0)?;
    let (lo, r_check) = support_bracket(&model)?;
    debug_assert!((r - r_check).abs() <= 1e-12 * r);
    let g = grid_size.max(16);
    let h = (r - lo) / (g - 1) as f64;
    let x: Vec<f64> = (0..g).map(|i| lo + h * i as f64).collect();
    let eta = 1e-5 * r;
    let s = stieltjes_on_grid(&model, &x, eta)?;
    let scale = std::f64::consts::PI * y;
    let rho: Vec<f64> = s.iter().map(|s| (s.im / scale).max(0.0)).collect();
    let mut cdf = vec![0.0; g];
    for i in 1..g {
        cdf[i] = cdf[i - 1] + 0.5 * h * (rho[i - 1] + rho[i]);
    }
    let total = cdf[g - 1];
    if !(total > 0.0) {
        return Err(Error::Numeric("forward map produced a vanishing density".into()));
    }
    let cn: Vec<f64> = cdf.iter().map(|c| c / total).collect();
    let m = taus.len();

    // grid endpoint sensitivities; ∂r/∂ξ vanishes at ξ₀
    let (dlo, dr, dcdf) = if with_jac {
        let dr: Vec<f64> = taus
            .iter()
            .zip(ws)
            .map(|(&t, &w)| {
                let d = 1.0 - t * xi0;
                t * y * w / (d * d)
            })
            .collect();
        let lower = 0.98 * model.min_atom() * (1.0 - y.sqrt()).powi(2);
        let dlo: Vec<f64> = if lower >= 1e-6 * r {
            let kmin = (0..m).fold(0, |best, k| if taus[k] < taus[best] { k } else { best });
            (0..m).map(|k| if k == kmin { lo } else { 0.0 }).collect()
        } else {
            dr.iter().map(|d| 1e-6 * d).collect()
        };
        let mut drho = vec![0.0; g * m];
        for i in 0..g {
            if rho[i] <= 0.0 {
                continue;
            }
            let (_, dz) = model.inverse_map(s[i]);
            let ds_dz = 1.0 / dz;
            let frac = i as f64 / (g - 1) as f64;
            for k in 0..m {
                let q = 1.0 + s[i] * taus[k];
                let ds_dtau: Complex64 = -(y * ws[k] / (q * q)) / dz;
                let dx = dlo[k] + (dr[k] - dlo[k]) * frac;
                let dzeta = Complex64::new(dx, 1e-5 * dr[k]);
                drho[i * m + k] = (taus[k] * ds_dtau + dzeta * ds_dz).im / scale;
            }
        }
        let mut d = vec![0.0; g * m];
        for i in 1..g {
            for k in 0..m {
                let dh = (dr[k] - dlo[k]) / (g - 1) as f64;
                d[i * m + k] = d[(i - 1) * m + k]
                    + 0.5 * dh * (rho[i - 1] + rho[i])
                    + 0.5 * h * (drho[(i - 1) * m + k] + drho[i * m + k]);
            }
        }
        (dlo, dr, Some(d))
    } else {
        (Vec::new(), Vec::new(), None)
    };

    let mut quantiles = Vec::with_capacity(levels.len());
    let mut jac = with_jac.then(|| vec![0.0; levels.len() * m]);
    let mut i = 0;
    for (row, &u) in levels.iter().enumerate() {
        while i + 2 < g && cn[i + 1] < u {
            i += 1;
        }
        let (a, b) = (cn[i], cn[i + 1]);
        let frac = if b > a {
            ((u - a) / (b - a)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        quantiles.push(x[i] + h * frac);
        if let (Some(jac), Some(d)) = (jac.as_mut(), dcdf.as_ref()) {
            let node = i as f64 / (g - 1) as f64;
            let dt = &d[(g - 1) * m..];
            for k in 0..m {
                let dh = (dr[k] - dlo[k]) / (g - 1) as f64;
                let dx = dlo[k] + (dr[k] - dlo[k]) * node;
                let mut v = dx + dh * frac;
                if b > a && frac > 0.0 && frac < 1.0 {
                    let da = (d[i * m + k] - a * dt[k]) / total;
                    let db = (d[(i + 1) * m + k] - b * dt[k]) / total;
                    v += h * ((u - b) * da - (u - a) * db) / ((b - a) * (b - a));
                }
                jac[row * m + k] = v;
            }
        }
    }
    Ok(Forward {
        quantiles,
        jacobian: jac,
    })
}

/// Model-implied sample eigenvalues: the quantiles of `F^{y,H}` at levels
/// `(j − ½)/p`, returned non-increasing. Levels inside the point mass at
/// zero (present when `y > 1`) map to 0.
pub fn forward_map(model: &SpectralModel, p: usize) -> Result<Vec<f64>> {
    forward_map_with_grid(model, p, QuestOptions::default().grid)
}

pub fn forward_map_with_grid(model: &SpectralModel, p: usize, grid: usize) -> Result<Vec<f64>> {
    let (zeros, levels) = continuous_levels(p, model.y());
    let mut out = vec![0.0; zeros];
    out.extend(forward(model.atoms(), model.weights(), model.y(), &levels, grid, false)?.quantiles);
    out.reverse();
    Ok(out)
}

fn solve_damped(jtj: &Mat<f64>, g: &[f64], mu: f64) -> Option<Vec<f64>> {
    let m = g.len();
    let mut a = jtj.clone();
    let max_diag = (0..m).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
    for k in 0..m {
        a[(k, k)] += mu * jtj[(k, k)].max(1e-12 * max_diag) + 1e-300;
    }
    let llt = a.llt(Side::Lower).ok()?;
    let mut rhs = Mat::<f64>::from_fn(m, 1, |k, _| -g[k]);
    llt.solve_in_place(&mut rhs);
    let step: Vec<f64> = (0..m).map(|k| rhs[(k, 0)]).collect();
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Initial log-locations: observed eigenvalues per block, recentred at the
/// population mean and shrunk by the ratio of population to sample spread.
///
/// The Marchenko–Pastur moment identity `Var(F) = Var(H) + y·mean(H)²`
/// gives the population spread, so white data starts as a point mass.
fn initial_theta(obs_desc: &[f64], nonzero: usize, sizes: &[usize], y: f64) -> Vec<f64> {
    let p = obs_desc.len() as f64;
    let mean = obs_desc.iter().sum::<f64>() / p;
    let second = obs_desc.iter().map(|v| v * v).sum::<f64>() / p;
    let var_f = (second - mean * mean).max(0.0);
    let var_h = (var_f - y * mean * mean).max(0.0);
    let shrink = if var_f > 0.0 { (var_h / var_f).sqrt() } else { 0.0 };
    let nz = &obs_desc[..nonzero.max(1)];
    let nz_mean = nz.iter().sum::<f64>() / nz.len() as f64;
    let total: usize = sizes.iter().sum();
    let mut start = 0usize;
    sizes
        .iter()
        .map(|&size| {
            let mid = (start as f64 + 0.5 * size as f64) / total as f64;
            start += size;
            let idx = ((mid * nz.len() as f64) as usize).min(nz.len() - 1);
            let v = mean + shrink * (nz[idx] - nz_mean);
            v.max(0.05 * mean).ln()
        })
        .collect()
}

/// Fits the block-atom model to the sample spectrum in `report`.
///
/// Never aborts on slow convergence: the last accepted iterate (always the
/// best so far) is returned with
/// `converged = false`.
pub fn estimate_spectrum(report: &EigenReport, opts: &QuestOptions) -> Result<SpectrumEstimate> {
    let (n, p) = (report.n, report.p);
    if n < 3 || p < 3 {
        return Err(Error::Input(format!(
            "spectrum estimation needs n, p >= 3 (got {n}, {p})"
        )));
    }
    let eigs = &report.cov_eigs;
    let (hi, lo) = (eigs[0], eigs[p - 1]);
    if !(hi > 0.0) {
        return Err(Error::Degenerate("all sample eigenvalues are zero".into()));
    }
    if hi - lo <= 1e-12 * hi {
        return Ok(SpectrumEstimate {
            quantile_eigs: vec![hi; p],
            fit_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    // fit in units of the mean eigenvalue so that the problem is scale-free
    let c = report.trace() / p as f64;
    let obs_desc: Vec<f64> = eigs.iter().map(|e| e / c).collect();
    let y = report.y_n;
    let sizes = block_sizes(p, opts);
    let (zeros, levels) = continuous_levels(p, y);
    let target: Vec<f64> = obs_desc.iter().rev().skip(zeros).copied().collect();
    let nonzero = n.min(p);
    let m = sizes.len();

    let ws = block_weights(&sizes, p);
    let penalized = singleton_count(p, opts).min(m - 1);
    let root_gamma = opts.smoothing.max(0.0).sqrt();
    let root_curv = opts.curvature.max(0.0).sqrt();
    let evaluate = |theta: &[f64], jac: bool| -> Option<(Vec<f64>, Option<Vec<f64>>, f64)> {
        let taus: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let f = forward(&taus, &ws, y, &levels, opts.grid, jac).ok()?;
        let mut res: Vec<f64> = f.quantiles.iter().zip(&target).map(|(q, t)| q - t).collect();
        let mut jacobian = f.jacobian;
        for k in 0..penalized {
            res.push(root_gamma * (theta[k] - theta[k + 1]));
            if let Some(j) = jacobian.as_mut() {
                let mut row = vec![0.0; m];
                row[k] = root_gamma;
                row[k + 1] = -root_gamma;
                j.extend(row);
            }
        }
        for k in penalized + 1..m.saturating_sub(1) {
            res.push(root_curv * (theta[k - 1] - 2.0 * theta[k] + theta[k + 1]));
            if let Some(j) = jacobian.as_mut() {
                let mut row = vec![0.0; m];
                row[k - 1] = root_curv;
                row[k] = -2.0 * root_curv;
                row[k + 1] = root_curv;
                j.extend(row);
            }
        }
        let cost = 0.5 * res.iter().map(|r| r * r).sum::<f64>();
        cost.is_finite().then_some((res, jacobian, cost))
    };

    let mut theta = initial_theta(&obs_desc, nonzero, &sizes, y);
    let mut evals = 1;
    let (mut res, mut jac, mut cost) = evaluate(&theta, true)
        .ok_or_else(|| Error::Numeric("forward map failed at the initial spectrum estimate".into()))?;
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = 0;
    'outer: while evals < opts.max_evals {
        iterations += 1;
        let j = jac.take().expect("jacobian requested");
        let rows = res.len();
        let jm = Mat::<f64>::from_fn(rows, m, |i, k| j[i * m + k]);
        let jtj = jm.transpose() * &jm;
        let grad: Vec<f64> = (0..m).map(|k| (0..rows).map(|i| j[i * m + k] * res[i]).sum()).collect();
        if grad.iter().map(|g| g.abs()).fold(0.0, f64::max) <= 1e-14 * (1.0 + cost) {
            converged = true;
            break;
        }
        loop {
            if evals >= opts.max_evals {
                break 'outer;
            }
            let Some(step) = solve_damped(&jtj, &grad, mu) else {
                mu *= 10.0;
                if mu > 1e12 {
                    converged = true;
                    break 'outer;
                }
                continue;
            };
            let trial: Vec<f64> = theta
                .iter()
                .zip(&step)
                .map(|(t, d)| (t + d.clamp(-1.0, 1.0)).clamp(-14.0, 14.0))
                .collect();
            evals += 1;
            match evaluate(&trial, true) {
                Some((r2, j2, c2)) if c2 < cost => {
                    let gain = (cost - c2) / cost.max(1e-300);
                    let small_step = step.iter().all(|d| d.abs() < 1e-10);
                    theta = trial;
                    res = r2;
                    jac = j2;
                    cost = c2;
                    mu = (mu / 3.0).max(1e-12);
                    stalled = if gain < opts.tol { stalled + 1 } else { 0 };
                    if stalled >= 3 || small_step {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    mu *= 4.0;
                    if mu > 1e12 {
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    let best_data_mse = evaluate(&theta, false)
        .map(|(r, _, _)| r[..target.len()].iter().map(|v| v * v).sum::<f64>() / target.len() as f64)
        .unwrap_or(f64::NAN);
    if !converged {
        log::warn!("spectrum fit stopped at the evaluation budget ({evals} evaluations)");
    }
    let mut quantile_eigs = Vec::with_capacity(p);
    for (t, &size) in theta.iter().zip(&sizes) {
        quantile_eigs.extend(std::iter::repeat_n(c * t.exp(), size));
    }
    quantile_eigs.sort_by(|a, b| b.total_cmp(a));
    Ok(SpectrumEstimate {
        quantile_eigs,
        fit_residual: best_data_mse * c * c,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_all_ranks() {
        let o = QuestOptions::default();
        for p in [3, 4, 10, 31, 32, 33, 400, 1001] {
            let s = block_sizes(p, &o);
            assert_eq!(s.iter().sum::<usize>(), p);
            assert!(s.len() <= 32 && s.iter().all(|&b| b >= 1));
        }
        assert_eq!(&block_sizes(400, &o)[..9], &[1, 1, 1, 1, 1, 1, 1, 1, 17]);
    }

    #[test]
    fn constant_eigenvalues_collapse_to_point_mass() {
        let report = EigenReport::from_shared(vec![2.5; 5], 10, 5).unwrap();
        let est = estimate_spectrum(&report, &QuestOptions::default()).unwrap();
        assert_eq!(est.quantile_eigs, vec![2.5; 5]);
    }

    #[test]
    fn forward_map_matches_classical_quantiles() {
        let y: f64 = 0.5;
        let p = 200;
        let model = SpectralModel::point_mass(1.0, y).unwrap();
        let q = forward_map(&model, p).unwrap();
        let (a, b) = ((1.0 - y.sqrt()).powi(2), (1.0 + y.sqrt()).powi(2));
        // closed-form density integrated on a fine grid
        let m = 200_000;
        let hh = (b - a) / m as f64;
        let dens = |x: f64| ((b - x) * (x - a)).max(0.0).sqrt() / (2.0 * std::f64::consts::PI * x * y);
        let mut cdf = vec![0.0; m + 1];
        for i in 1..=m {
            let (x0, x1) = (a + hh * (i - 1) as f64, a + hh * i as f64);
            cdf[i] = cdf[i - 1] + 0.5 * hh * (dens(x0) + dens(x1));
        }
        for (j, qj) in q.iter().rev().enumerate() {
            let u = (j as f64 + 0.5) / p as f64 * cdf[m];
            let i = cdf.partition_point(|c| *c < u).min(m);
            let exact = a + hh * i as f64;
            assert!((qj - exact).abs() < 0.02, "level {j}: {qj} vs {exact}");
        }
        assert!(q.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn forward_map_zero_block_when_p_exceeds_n() {
        let model = SpectralModel::point_mass(1.0, 2.0).unwrap();
        let q = forward_map(&model, 100).unwrap();
        assert_eq!(q.iter().filter(|v| **v == 0.0).count(), 50);
        assert!(q[0] <= (1.0 + 2f64.sqrt()).powi(2) + 0.01);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = 60;
        let y = 0.5;
        let opts = QuestOptions::default();
        let sizes = block_sizes(p, &opts);
        let ws = block_weights(&sizes, p);
        let theta: Vec<f64> = (0..sizes.len()).map(|k| (1.5 - 0.03 * k as f64).ln()).collect();
        let taus = |t: &[f64]| t.iter().map(|v| v.exp()).collect::<Vec<_>>();
        let (_, levels) = continuous_levels(p, y);
        let base = forward(&taus(&theta), &ws, y, &levels, opts.grid, true).unwrap();
        let jac = base.jacobian.unwrap();
        let m = sizes.len();
        let hstep = 1e-6;
        let mut max_err: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for k in 0..m {
            let mut tp = theta.clone();
            tp[k] += hstep;
            let mut tm = theta.clone();
            tm[k] -= hstep;
            let qp = forward(&taus(&tp), &ws, y, &levels, opts.grid, false).unwrap();
            let qm = forward(&taus(&tm), &ws, y, &levels, opts.grid, false).unwrap();
            for i in 0..levels.len() {
                let fd = (qp.quantiles[i] - qm.quantiles[i]) / (2.0 * hstep);
                max_err = max_err.max((fd - jac[i * m + k]).abs());
                max_abs = max_abs.max(fd.abs());
            }
        }
        assert!(max_err < 1e-3 * max_abs, "err {max_err} scale {max_abs}");
    }

    #[test]
    fn recovers_point_mass_from_its_own_quantiles() {
        let (n, p) = (600, 400);
        let model = SpectralModel::point_mass(1.0, p as f64 / n as f64).unwrap();
        let eigs = forward_map(&model, p).unwrap();
        let report = EigenReport::from_shared(eigs, n, p).unwrap();
        let est = estimate_spectrum(&report, &QuestOptions::default()).unwrap();
        assert!(
            est.quantile_eigs.iter().all(|v| (v - 1.0).abs() < 0.1),
            "{:?}",
            est.quantile_eigs
        );
    }
}
