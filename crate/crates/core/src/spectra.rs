//! Sample covariance matrices and the spectra of `YᵀY/n` and its `n × n`
//! companion `YYᵀ/n`.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// An `n × p` data matrix, rows are observations.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    values: Mat<f64>,
}

impl DataMatrix {
    /// Wraps a matrix after checking `n, p >= 3` and finiteness.
    pub fn new(values: Mat<f64>) -> Result<Self> {
        let (n, p) = (values.nrows(), values.ncols());
        if n < 3 || p < 3 {
            return Err(Error::Input(format!("data matrix must be at least 3x3, got {n}x{p}")));
        }
        for j in 0..p {
            for i in 0..n {
                if !values[(i, j)].is_finite() {
                    return Err(Error::Input(format!("non-finite entry at row {i}, column {j}")));
                }
            }
        }
        Ok(Self { values })
    }

    /// Builds from row-major data.
    pub fn from_rows(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {n}x{p} matrix",
                data.len()
            )));
        }
        Self::new(Mat::from_fn(n, p, |i, j| data[i * p + j]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.values
    }

    /// Subtracts each column's mean.
    pub fn demeaned(&self) -> Self {
        let (n, p) = (self.n(), self.p());
        let mut v = self.values.clone();
        for j in 0..p {
            let m = (0..n).map(|i| v[(i, j)]).sum::<f64>() / n as f64;
            for i in 0..n {
                v[(i, j)] -= m;
            }
        }
        Self { values: v }
    }
}

/// Descending spectra of the sample covariance and its companion matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenReport {
    pub cov_eigs: Vec<f64>,
    pub companion_eigs: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub y_n: f64,
}

impl EigenReport {
    /// Builds a report from the descending nonzero-carrying spectrum of
    /// whichever Gram matrix is smaller, padding the other with zeros.
    pub fn from_shared(mut shared: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if shared.len() != n.min(p) {
            return Err(Error::Dimension(format!(
                "expected {} shared eigenvalues, got {}",
                n.min(p),
                shared.len()
            )));
        }
        shared.sort_by(|a, b| b.total_cmp(a));
        clamp_psd(&mut shared)?;
        let mut cov = shared.clone();
        cov.resize(p, 0.0);
        let mut comp = shared;
        comp.resize(n, 0.0);
        Ok(Self {
            cov_eigs: cov,
            companion_eigs: comp,
            n,
            p,
            y_n: p as f64 / n as f64,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.cov_eigs[0]
    }

    pub fn lambda2(&self) -> f64 {
        self.cov_eigs[1]
    }

    pub fn trace(&self) -> f64 {
        self.cov_eigs.iter().sum()
    }
}

fn clamp_psd(eigs: &mut [f64]) -> Result<()> {
    let top = eigs.first().copied().unwrap_or(0.0).max(0.0);
    for v in eigs.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-10 * top.max(f64::MIN_POSITIVE) && *v < -1e-300 {
                return Err(Error::Numeric(format!(
                    "sample covariance eigenvalue {v:.3e} is negative beyond round-off (lambda1 = {top:.3e})"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// `YᵀY / n`.
pub fn sample_covariance(data: &DataMatrix) -> Mat<f64> {
    linalg::gram_cols(data.as_ref(), 1.0 / data.n() as f64)
}

/// Spectrum of a raw `n × p` matrix without the size checks of
/// [`DataMatrix`]; used by the bootstrap and the simulation harness.
pub fn spectrum_of(y: MatRef<'_, f64>) -> Result<EigenReport> {
    let (n, p) = (y.nrows(), y.ncols());
    let scale = 1.0 / n as f64;
    let shared = if p <= n {
        linalg::sym_eigenvalues_desc(linalg::gram_cols(y, scale).as_ref())?
    } else {
        linalg::sym_eigenvalues_desc(linalg::gram_rows(y, scale).as_ref())?
    };
    EigenReport::from_shared(shared, n, p)
}

/// Descending spectra of `Σ̂` and its companion; only the smaller of the two
/// eigenproblems is solved.
pub fn spectrum(data: &DataMatrix) -> Result<EigenReport> {
    spectrum_of(data.as_ref())
}

/// Empirical spectral distribution function: fraction of `eigs` that are
/// `<= t`.
pub fn esd(eigs: &[f64], t: f64) -> f64 {
    if eigs.is_empty() {
        return 0.0;
    }
    eigs.iter().filter(|&&v| v <= t).count() as f64 / eigs.len() as f64
}
