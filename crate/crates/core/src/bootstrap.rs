//! Parametric bootstrap from the truncated spectrum: Gaussian worlds with
//! covariance `diag(λ̃)`, functionals of their leading eigenvalues, and the
//! normalized statistics `L★`, `G★`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{bootstrap_normalizers, truncate_spectrum, xi_hat, Normalizers, TruncatedSpectrum};
use crate::quest::SpectrumEstimator;
use crate::rng::map_replicates;
use crate::spectra::{spectrum, spectrum_of, DataMatrix};
use crate::stats;

/// Version tag of the JSON summary.
pub const SUMMARY_SCHEMA: &str = "edgegap.bootstrap_summary.v1";

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A map from the top `k` eigenvalues (descending) to a fixed-length vector.
#[derive(Clone)]
pub struct Functional {
    k: usize,
    columns: Vec<String>,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("k", &self.k)
            .field("columns", &self.columns)
            .finish()
    }
}

impl Functional {
    /// A caller-supplied functional; `eval` must return `columns.len()`
    /// values.
    pub fn custom<F>(k: usize, columns: Vec<String>, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if k == 0 || columns.is_empty() {
            return Err(Error::Input("a functional needs k >= 1 and at least one output".into()));
        }
        Ok(Self {
            k,
            columns,
            eval: Arc::new(eval),
        })
    }

    pub fn lambda1() -> Self {
        Self::custom(1, vec!["lambda1".into()], |t| vec![t[0]]).expect("valid built-in")
    }

    pub fn top2() -> Self {
        Self::custom(2, vec!["lambda1".into(), "lambda2".into()], |t| vec![t[0], t[1]]).expect("valid built-in")
    }

    pub fn gap() -> Self {
        Self::custom(2, vec!["gap".into()], |t| vec![t[0] - t[1]]).expect("valid built-in")
    }

    pub fn topk(k: usize) -> Result<Self> {
        Self::custom(k, (1..=k).map(|j| format!("lambda{j}")).collect(), |t| t.to_vec())
    }

    /// Number of leading eigenvalues consumed.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn evaluate(&self, top: &[f64]) -> Vec<f64> {
        (self.eval)(&top[..self.k])
    }
}

impl FromStr for Functional {
    type Err = Error;

    /// `lambda1`, `top2`, `gap` or `topK` with `K >= 1`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda1" => Ok(Self::lambda1()),
            "top2" => Ok(Self::top2()),
            "gap" => Ok(Self::gap()),
            _ => match s.strip_prefix("top").and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if k >= 1 => Self::topk(k),
                _ => Err(Error::Input(format!("unknown functional {s:?}"))),
            },
        }
    }
}

/// `B` bootstrap replicates of a functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRun {
    pub lambdas: Vec<f64>,
    pub n: usize,
    pub b: usize,
    pub columns: Vec<String>,
    /// One row per replicate.
    pub stats: Vec<Vec<f64>>,
    pub normalizers: Normalizers,
    pub seed: u64,
}

/// Draws `n` rows of `N(0, diag(scale²))`, row by row.
pub fn diagonal_gaussian<R: Rng + ?Sized>(n: usize, scales: &[f64], rng: &mut R) -> Mat<f64> {
    let p = scales.len();
    let mut y = Mat::<f64>::zeros(n, p);
    for i in 0..n {
        for (j, s) in scales.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            y[(i, j)] = s * z;
        }
    }
    y
}

/// Runs the bootstrap on the world `N(0, diag(λ̃))` with `n` observations.
pub fn run_bootstrap(
    trunc: &TruncatedSpectrum,
    n: usize,
    b: usize,
    phi: &Functional,
    seed: u64,
) -> Result<BootstrapRun> {
    let p = trunc.p();
    if b == 0 {
        return Err(Error::Input("bootstrap needs B >= 1".into()));
    }
    if phi.k() > n.min(p) {
        return Err(Error::Dimension(format!(
            "functional uses {} eigenvalues but min(n, p) = {}",
            phi.k(),
            n.min(p)
        )));
    }
    let normalizers = bootstrap_normalizers(trunc, n)?;
    let scales: Vec<f64> = trunc.lambdas.iter().map(|l| l.sqrt()).collect();
    let rows = map_replicates(b, seed, |_, rng| -> Result<Vec<f64>> {
        let y = diagonal_gaussian(n, &scales, rng);
        let eigs = spectrum_of(y.as_ref())?.cov_eigs;
        let row = phi.evaluate(&eigs);
        if row.len() != phi.columns().len() || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "functional returned {row:?} for columns {:?}",
                phi.columns()
            )));
        }
        Ok(row)
    });
    let stats = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BootstrapRun {
        lambdas: trunc.lambdas.clone(),
        n,
        b,
        columns: phi.columns().to_vec(),
        stats,
        normalizers,
        seed,
    })
}

impl BootstrapRun {
    /// Values of one output coordinate across replicates.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Input(format!("bootstrap run has no column {name:?}")))?;
        Ok(self.stats.iter().map(|r| r[j]).collect())
    }

    /// One row per replicate, header from the column names.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.stats {
            out.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self, levels: &[f64]) -> Result<BootstrapSummary> {
        let cols: Vec<Vec<f64>> = (0..self.columns.len())
            .map(|j| self.stats.iter().map(|r| r[j]).collect())
            .collect();
        let mut quantiles = Vec::with_capacity(levels.len());
        for &level in levels {
            quantiles.push(QuantileRow {
                level,
                values: cols.iter().map(|c| stats::quantile(c, level)).collect::<Result<_>>()?,
            });
        }
        Ok(BootstrapSummary {
            schema: SUMMARY_SCHEMA.to_string(),
            n: self.n,
            p: self.lambdas.len(),
            b: self.b,
            seed: self.seed,
            columns: self.columns.clone(),
            mean: cols.iter().map(|c| stats::mean(c)).collect(),
            sd: cols.iter().map(|c| stats::sd(c)).collect(),
            quantiles,
            normalizers: self.normalizers,
            low_precision: self.b < 2,
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn write_files(&self, stem: &Path, levels: &[f64]) -> Result<()> {
        self.write_csv(std::fs::File::create(stem.with_extension("csv"))?)?;
        let json = serde_json::to_string_pretty(&self.summary(levels)?)?;
        std::fs::write(stem.with_extension("json"), json + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub level: f64,
    pub values: Vec<f64>,
}

/// Per-column moments and quantiles of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub schema: String,
    pub n: usize,
    pub p: usize,
    pub b: usize,
    pub seed: u64,
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub quantiles: Vec<QuantileRow>,
    pub normalizers: Normalizers,
    pub low_precision: bool,
}

/// `L★` and `G★` per replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSamples {
    pub l: Vec<f64>,
    pub g: Vec<f64>,
}

/// `L★ = n^{2/3}(λ₁★ − r̃)/σ̃` and `G★ = n^{2/3}(λ₁★ − λ₂★)/σ̃`; the run
/// must carry `lambda1` and `lambda2` columns.
pub fn normalized_samples(run: &BootstrapRun) -> Result<NormalizedSamples> {
    let l1 = run.column("lambda1")?;
    let l2 = run.column("lambda2")?;
    let Normalizers {
        r_tilde, sigma_tilde, ..
    } = run.normalizers;
    let c = (run.n as f64).powf(2.0 / 3.0) / sigma_tilde;
    Ok(NormalizedSamples {
        l: l1.iter().map(|a| c * (a - r_tilde)).collect(),
        g: l1.iter().zip(&l2).map(|(a, b)| c * (a - b)).collect(),
    })
}

/// Type-7 quantile of a normalized sample.
pub fn bootstrap_quantile(sample: &[f64], level: f64) -> Result<f64> {
    stats::quantile(sample, level)
}

/// Fraction of an externally supplied ground-truth sample at or below `q`.
pub fn coverage(truth: &[f64], q: f64) -> f64 {
    stats::coverage(truth, q)
}

/// Truncated spectrum `λ̃` for a data set: eigenvalues, `ξ̂`, spectrum
/// estimate, cap.
pub fn bootstrap_world(
    data: &DataMatrix,
    epsilon: f64,
    estimator: &dyn SpectrumEstimator,
) -> Result<TruncatedSpectrum> {
    let report = spectrum(data)?;
    let est = estimator.estimate(&report)?;
    if !est.converged {
        log::warn!("spectrum fit did not converge; bootstrapping from the last iterate");
    }
    truncate_spectrum(&est, xi_hat(&report), epsilon)
}

/// `E★λ₁(Σ̂★) − λ̃₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    pub bias: f64,
    pub lambda1_tilde: f64,
    pub bootstrap_mean: f64,
    pub b: usize,
    /// Set when `B = 1`.
    pub low_precision: bool,
}

/// Bias of `λ₁(Σ̂)` as an estimator of `λ₁(Σ)`.
pub fn bias_estimate(
    data: &DataMatrix,
    epsilon: f64,
    b: usize,
    seed: u64,
    estimator: &dyn SpectrumEstimator,
) -> Result<BiasEstimate> {
    let trunc = bootstrap_world(data, epsilon, estimator)?;
    let run = run_bootstrap(&trunc, data.n(), b, &Functional::lambda1(), seed)?;
    bias_from_run(&run)
}

pub fn bias_from_run(run: &BootstrapRun) -> Result<BiasEstimate> {
    let l1 = run.column("lambda1")?;
    let top = run.lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = stats::mean(&l1);
    if run.b < 2 {
        log::warn!("bias estimate from a single bootstrap draw");
    }
    Ok(BiasEstimate {
        bias: m - top,
        lambda1_tilde: top,
        bootstrap_mean: m,
        b: run.b,
        low_precision: run.b < 2,
    })
}
