//! Dense and tridiagonal eigenvalue helpers. Everything runs sequentially so
//! results are bit-identical regardless of the surrounding thread pool.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Eigenvalues of a symmetric matrix, sorted non-increasing. Only the lower
/// triangle is read.
pub fn sym_eigenvalues_desc(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut ev = a.self_adjoint_eigenvalues(Side::Lower).map_err(|e| {
        Error::Numeric(format!(
            "symmetric eigensolver failed on a {n}x{n} matrix (max |a_ij| = {:.3e}): {e:?}",
            max_abs(a),
            n = a.nrows()
        ))
    })?;
    ev.reverse();
    Ok(ev)
}

fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// `scale * AᵀA`.
pub fn gram_cols(a: MatRef<'_, f64>, scale: f64) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.ncols(), a.ncols());
    matmul(out.as_mut(), Accum::Replace, a.transpose(), a, scale, Par::Seq);
    out
}

/// `scale * AAᵀ`.
pub fn gram_rows(a: MatRef<'_, f64>, scale: f64) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), a.nrows());
    matmul(out.as_mut(), Accum::Replace, a, a.transpose(), scale, Par::Seq);
    out
}

/// `A * B`.
pub fn mat_mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// Symmetric tridiagonal matrix stored by its diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        Self { diag, off }
    }

    /// Number of eigenvalues strictly below `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -f64::MIN_POSITIVE.sqrt() * (1.0 + x.abs());
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k` largest eigenvalues, non-increasing, by bisection on Sturm
    /// counts. `hint` is an optional lower bracket expected to lie below the
    /// k-th largest eigenvalue; it is verified and discarded when wrong.
    pub fn top_eigenvalues(&self, k: usize, hint: Option<f64>, abs_tol: f64) -> Vec<f64> {
        let n = self.diag.len();
        let k = k.min(n);
        let (g_lo, g_hi) = self.gershgorin();
        let mut lo0 = g_lo;
        if let Some(h) = hint {
            if h > g_lo && n - self.count_below(h) >= k {
                lo0 = h;
            }
        }
        let mut out = Vec::with_capacity(k);
        let mut upper = g_hi;
        for j in 0..k {
            // the (j+1)-th largest is the eigenvalue with n-j-1 below it
            let target = n - j - 1;
            let (mut lo, mut hi) = (lo0, upper);
            while hi - lo > abs_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.count_below(mid) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let v = 0.5 * (lo + hi);
            out.push(v);
            upper = hi;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_eigenvalues_descending() {
        let a = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => 2.0,
            (1, 1) => 3.0,
            (2, 2) => 1.0,
            _ => 0.0,
        });
        let ev = sym_eigenvalues_desc(a.as_ref()).unwrap();
        assert_eq!(ev.len(), 3);
        assert!((ev[0] - 3.0).abs() < 1e-14);
        assert!((ev[1] - 2.0).abs() < 1e-14);
        assert!((ev[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 1.0 + ((i * 3) % 4) as f64 * 0.25).collect();
        let t = Tridiagonal::new(diag.clone(), off.clone());
        let dense = Mat::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i == j + 1 {
                off[j]
            } else if j == i + 1 {
                off[i]
            } else {
                0.0
            }
        });
        let full = sym_eigenvalues_desc(dense.as_ref()).unwrap();
        let top = t.top_eigenvalues(6, None, 1e-13);
        for (a, b) in top.iter().zip(&full) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        // wrong hints are ignored
        let hinted = t.top_eigenvalues(6, Some(full[2]), 1e-13);
        for (a, b) in hinted.iter().zip(&full) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
