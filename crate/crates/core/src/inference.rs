//! The gap test: `T_n`, its critical value and p-value, the `ε̂` inverse,
//! confidence intervals, the spike-count estimator `K̂`, and Onatski's
//! gap-ratio statistic for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{leading_tie, sigma_hat, truncate_spectrum, xi_hat};
use crate::mp::rightmost_interval;
use crate::quest::{SpectrumEstimate, SpectrumEstimator};
use crate::spectra::{spectrum, DataMatrix, EigenReport};
use crate::tw::TWTable;

/// Version tag written into every serialized report.
pub const REPORT_SCHEMA: &str = "edgegap.test_report.v1";

/// `T = n^{2/3}(λ₁ − λ₂)/σ̂`.
pub fn t_statistic(lambda1: f64, lambda2: f64, sigma_hat: f64, n: usize) -> f64 {
    (n as f64).powf(2.0 / 3.0) * (lambda1 - lambda2) / sigma_hat
}

/// `R(κ) = max_{j ≤ κ} (λ_j − λ_{j+1})/(λ_{j+1} − λ_{j+2})` over descending
/// eigenvalues.
pub fn onatski(eigs: &[f64], kappa: usize) -> Result<f64> {
    if kappa == 0 || eigs.len() < kappa + 2 {
        return Err(Error::Dimension(format!(
            "gap ratio with kappa = {kappa} needs {} eigenvalues, got {}",
            kappa + 2,
            eigs.len()
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for j in 0..kappa {
        let den = eigs[j + 1] - eigs[j + 2];
        if den <= 0.0 {
            return Err(Error::Degenerate(format!(
                "eigenvalues {} and {} coincide",
                j + 2,
                j + 3
            )));
        }
        best = best.max((eigs[j] - eigs[j + 1]) / den);
    }
    Ok(best)
}

/// `K̂ = min{k : T_{n,k} < n^ν} − 1` with
/// `T_{n,k} = n^{2/3}(λ_k − λ_{k+1})/σ̂`.
pub fn k_hat(eigs: &[f64], sigma_hat: f64, n: usize, nu: f64) -> Result<usize> {
    if !(nu > 0.0 && nu < 2.0 / 3.0) {
        return Err(Error::Input(format!("nu = {nu} outside (0, 2/3)")));
    }
    let threshold = (n as f64).powf(nu);
    let usable = eigs.len().min(n);
    for k in 1..usable {
        if t_statistic(eigs[k - 1], eigs[k], sigma_hat, n) < threshold {
            return Ok(k - 1);
        }
    }
    Err(Error::Numeric(format!(
        "every one of the {} leading gaps exceeds the threshold n^nu = {threshold:.3}",
        usable.saturating_sub(1)
    )))
}

/// Smallest separation at which the test rejects, or `+∞` when it never
/// does on the search bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonHat {
    Finite(f64),
    Infinite,
}

impl EpsilonHat {
    pub fn value(&self) -> f64 {
        match self {
            EpsilonHat::Finite(v) => *v,
            EpsilonHat::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for EpsilonHat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EpsilonHat::Finite(v) => s.serialize_f64(*v),
            EpsilonHat::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for EpsilonHat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(EpsilonHat::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(EpsilonHat::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad epsilon_hat {t:?}"))),
        }
    }
}

/// Bisection controls for `ε̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSearch {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Default for EpsilonSearch {
    fn default() -> Self {
        Self {
            lo: 1e-4,
            hi: 0.999,
            tol: 1e-4,
        }
    }
}

/// Outcome of the `ε̂` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonHatResult {
    pub value: EpsilonHat,
    /// The test already rejects at the left end of the bracket.
    pub left_boundary: bool,
}

/// Smallest `ε` in the bracket with `T(ε) ≥ q`, by bisection on the
/// non-decreasing map `t_of`.
pub fn epsilon_hat_search<F>(t_of: F, q: f64, search: &EpsilonSearch) -> Result<EpsilonHatResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if t_of(search.lo)? >= q {
        return Ok(EpsilonHatResult {
            value: EpsilonHat::Finite(search.lo),
            left_boundary: true,
        });
    }
    if t_of(search.hi)? < q {
        return Ok(EpsilonHatResult {
            value: EpsilonHat::Infinite,
            left_boundary: false,
        });
    }
    let (mut lo, mut hi) = (search.lo, search.hi);
    let mut t_hi = t_of(hi)?;
    for _ in 0..200 {
        if hi - lo < search.tol && (t_hi - q).abs() <= 5e-4 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let t = t_of(mid)?;
        if t >= q {
            hi = mid;
            t_hi = t;
        } else {
            lo = mid;
        }
    }
    Ok(EpsilonHatResult {
        value: EpsilonHat::Finite(hi),
        left_boundary: false,
    })
}

/// `(1/((1 + ε̂)ξ̂), ∞)` for `λ₁(Σ)`; 0 when `ε̂` is infinite.
pub fn lambda1_lower_bound(xi_hat: f64, eps_hat: EpsilonHat) -> f64 {
    match eps_hat {
        EpsilonHat::Finite(e) => 1.0 / ((1.0 + e) * xi_hat),
        EpsilonHat::Infinite => 0.0,
    }
}

/// `λ₁(Σ̂) ± |q′_{α/2}| σ̂/n^{2/3}` for the edge `r_n`.
pub fn rn_interval(lambda1: f64, sigma_hat: f64, n: usize, alpha: f64, table: &TWTable) -> Result<(f64, f64)> {
    Ok(rn_interval_with_quantile(
        lambda1,
        sigma_hat,
        n,
        table.tw1_quantile(alpha / 2.0)?,
    ))
}

/// [`rn_interval`] with the TW₁ quantile supplied directly.
pub fn rn_interval_with_quantile(lambda1: f64, sigma_hat: f64, n: usize, q: f64) -> (f64, f64) {
    let half = q.abs() * sigma_hat / (n as f64).powf(2.0 / 3.0);
    (lambda1 - half, lambda1 + half)
}

/// Settings of one test run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub epsilon: f64,
    pub alpha: f64,
    /// Also evaluate the gap-ratio statistic `R(κ)` when set.
    pub kappa: Option<usize>,
    /// Threshold exponent for `K̂`; skipped when `None`.
    pub nu: Option<f64>,
    pub search: EpsilonSearch,
    /// Locate `ε̂` (the bisection costs a few dozen cheap evaluations).
    pub with_epsilon_hat: bool,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            alpha: 0.05,
            kappa: None,
            nu: Some(1.0 / 3.0),
            search: EpsilonSearch::default(),
            with_epsilon_hat: true,
        }
    }
}

impl TestOptions {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Input(format!("epsilon = {} outside (0, 1)", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Input(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// Gap-ratio comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnatskiReport {
    pub kappa: usize,
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Everything one run of the test produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema: String,
    pub n: usize,
    pub p: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub t_n: f64,
    pub sigma_hat: f64,
    pub xi_hat: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
    pub epsilon_hat: Option<EpsilonHat>,
    pub ci_lambda1_lower: Option<f64>,
    pub ci_rn_lower: f64,
    pub ci_rn_upper: f64,
    pub k_hat: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onatski: Option<OnatskiReport>,
    pub flags: Vec<String>,
}

impl TestReport {
    /// Two-column `field value` table.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let mut rows: Vec<(&str, String)> = vec![
            ("n", self.n.to_string()),
            ("p", self.p.to_string()),
            ("lambda1", format!("{:.6}", self.lambda1)),
            ("lambda2", format!("{:.6}", self.lambda2)),
            ("t_n", format!("{:.6}", self.t_n)),
            ("sigma_hat", format!("{:.6}", self.sigma_hat)),
            ("xi_hat", format!("{:.6}", self.xi_hat)),
            ("epsilon", format!("{}", self.epsilon)),
            ("alpha", format!("{}", self.alpha)),
            ("critical", format!("{:.6}", self.critical)),
            ("p_value", format!("{:.6}", self.p_value)),
            ("reject", self.reject.to_string()),
            (
                "epsilon_hat",
                match self.epsilon_hat {
                    Some(EpsilonHat::Finite(v)) => format!("{v:.6}"),
                    Some(EpsilonHat::Infinite) => "inf".into(),
                    None => "-".into(),
                },
            ),
            ("ci_lambda1_lower", opt(self.ci_lambda1_lower)),
            ("ci_rn_lower", format!("{:.6}", self.ci_rn_lower)),
            ("ci_rn_upper", format!("{:.6}", self.ci_rn_upper)),
            ("k_hat", self.k_hat.map_or("-".into(), |k| k.to_string())),
        ];
        if let Some(o) = &self.onatski {
            rows.push(("onatski_kappa", o.kappa.to_string()));
            rows.push(("onatski_statistic", format!("{:.6}", o.statistic)));
            rows.push(("onatski_critical", format!("{:.6}", o.critical)));
            rows.push(("onatski_p_value", format!("{:.6}", o.p_value)));
            rows.push(("onatski_reject", o.reject.to_string()));
        }
        rows.push((
            "flags",
            if self.flags.is_empty() {
                "-".into()
            } else {
                self.flags.join(",")
            },
        ));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

/// Sample eigenvalues standing in for a failed spectrum fit; strictly
/// positive so the truncation stays well defined.
fn fallback_estimate(report: &EigenReport) -> SpectrumEstimate {
    let floor = 1e-12 * report.lambda1().max(f64::MIN_POSITIVE);
    SpectrumEstimate {
        quantile_eigs: report.cov_eigs.iter().map(|&l| l.max(floor)).collect(),
        fit_residual: f64::NAN,
        iterations: 0,
        converged: false,
    }
}

/// The full pipeline on a data matrix.
pub fn run_test(
    data: &DataMatrix,
    opts: &TestOptions,
    table: &TWTable,
    estimator: &dyn SpectrumEstimator,
) -> Result<TestReport> {
    run_test_on_report(&spectrum(data)?, opts, table, estimator)
}

/// The pipeline from a precomputed spectrum.
pub fn run_test_on_report(
    report: &EigenReport,
    opts: &TestOptions,
    table: &TWTable,
    estimator: &dyn SpectrumEstimator,
) -> Result<TestReport> {
    opts.validate()?;
    let (n, p) = (report.n, report.p);
    let y = report.y_n;
    let mut flags = Vec::new();
    let (l1, l2) = (report.lambda1(), report.lambda2());
    if !(l1 > 0.0) {
        return Err(Error::Degenerate("all sample eigenvalues are zero".into()));
    }
    if leading_tie(report) {
        flags.push("leading_tie".to_string());
    }
    if l2 <= 1e-12 * l1 {
        flags.push("degenerate_spectrum".to_string());
    }
    let xi = xi_hat(report);
    let est = match estimator.estimate(report) {
        Ok(e) => {
            if !e.converged {
                flags.push("spectrum_fit_not_converged".to_string());
            }
            e
        }
        Err(e) => {
            log::warn!("spectrum estimation failed ({e}); using sample eigenvalues");
            flags.push("spectrum_fit_failed".to_string());
            fallback_estimate(report)
        }
    };
    if est.quantile_eigs.len() != p {
        return Err(Error::Dimension(format!(
            "spectrum estimate has {} values for p = {p}",
            est.quantile_eigs.len()
        )));
    }
    let t_of = |eps: f64| -> Result<f64> {
        let trunc = truncate_spectrum(&est, xi, eps)?;
        Ok(t_statistic(l1, l2, sigma_hat(&trunc, y)?, n))
    };
    let trunc = truncate_spectrum(&est, xi, opts.epsilon)?;
    let sigma = sigma_hat(&trunc, y)?;
    let t_n = t_statistic(l1, l2, sigma, n);
    let critical = table.gap_quantile(opts.alpha)?;
    let p_value = table.gap_p_value(t_n)?;
    let reject = t_n > critical;

    if let Ok(model) = trunc.model(y) {
        match rightmost_interval(&model, 256) {
            Ok((l, r)) if r - l < 0.01 * r => flags.push("weak_edge_regularity".to_string()),
            Ok(_) => {}
            Err(e) => log::debug!("edge regularity diagnostic skipped: {e}"),
        }
    }

    let (epsilon_hat, ci_lambda1_lower) = if opts.with_epsilon_hat {
        let e = epsilon_hat_search(t_of, critical, &opts.search)?;
        if e.left_boundary {
            flags.push("epsilon_hat_at_left_boundary".to_string());
        }
        if e.value == EpsilonHat::Infinite {
            flags.push("lambda1_interval_uninformative".to_string());
        }
        (Some(e.value), Some(lambda1_lower_bound(xi, e.value)))
    } else {
        (None, None)
    };
    let (ci_rn_lower, ci_rn_upper) = rn_interval(l1, sigma, n, opts.alpha, table)?;

    let k = match opts.nu {
        Some(nu) => match k_hat(&report.cov_eigs, sigma, n, nu) {
            Ok(k) => Some(k),
            Err(Error::Numeric(m)) => {
                log::warn!("{m}");
                flags.push("k_hat_scan_exhausted".to_string());
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };

    let onatski_report = match opts.kappa {
        Some(kappa) => match onatski(&report.cov_eigs, kappa) {
            Ok(stat) => {
                let crit = table.onatski_critical(kappa, opts.alpha)?;
                Some(OnatskiReport {
                    kappa,
                    statistic: stat,
                    critical: crit,
                    p_value: table.onatski_p_value(kappa, stat)?,
                    reject: stat > crit,
                })
            }
            Err(Error::Degenerate(m)) => {
                log::warn!("gap ratio undefined: {m}");
                flags.push("onatski_degenerate".to_string());
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };

    Ok(TestReport {
        schema: REPORT_SCHEMA.to_string(),
        n,
        p,
        lambda1: l1,
        lambda2: l2,
        t_n,
        sigma_hat: sigma,
        xi_hat: xi,
        epsilon: opts.epsilon,
        alpha: opts.alpha,
        critical,
        p_value,
        reject,
        epsilon_hat,
        ci_lambda1_lower,
        ci_rn_lower,
        ci_rn_upper,
        k_hat: k,
        onatski: onatski_report,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tw::{GoeMethod, TwConfig};
    use proptest::prelude::*;

    #[test]
    fn t_statistic_arithmetic() {
        let t = t_statistic(3.40, 3.30, 2.37, 600);
        assert!((t - 600f64.powf(2.0 / 3.0) * 0.10 / 2.37).abs() < 1e-12);
        assert!((t - 3.0016).abs() < 5e-4);
        assert_eq!(t_statistic(2.0, 2.0, 1.0, 10), 0.0);
    }

    #[test]
    fn onatski_examples() {
        assert_eq!(onatski(&[5.0, 3.0, 2.0, 1.5], 2).unwrap(), 2.0);
        assert_eq!(onatski(&[4.0, 2.0, 1.0], 1).unwrap(), 2.0);
        assert_eq!(onatski(&[4.0, 3.0, 2.0, 1.0], 2).unwrap(), 1.0);
        assert!(matches!(onatski(&[3.0, 1.0, 1.0], 1), Err(Error::Degenerate(_))));
        assert!(matches!(onatski(&[3.0, 2.0], 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn k_hat_first_scan_exit() {
        assert_eq!(k_hat(&[1.0, 0.999, 0.5, 0.1], 1.0, 100, 1.0 / 3.0).unwrap(), 0);
        assert_eq!(k_hat(&[5.0, 3.0, 1.0, 0.999, 0.99], 1.0, 100, 1.0 / 3.0).unwrap(), 2);
        assert!(k_hat(&[1.0, 0.5], 1.0, 100, 0.7).is_err());
    }

    #[test]
    fn lambda1_bound_arithmetic() {
        let b = lambda1_lower_bound(0.55, EpsilonHat::Finite(0.2));
        assert!((b - 1.5152).abs() < 1e-4);
        assert_eq!(lambda1_lower_bound(0.55, EpsilonHat::Infinite), 0.0);
    }

    #[test]
    fn epsilon_hat_cases() {
        let s = EpsilonSearch::default();
        let left = epsilon_hat_search(|_| Ok(10.0), 4.0, &s).unwrap();
        assert!(left.left_boundary);
        assert_eq!(left.value, EpsilonHat::Finite(s.lo));
        let inf = epsilon_hat_search(|_| Ok(1.0), 4.0, &s).unwrap();
        assert_eq!(inf.value, EpsilonHat::Infinite);
        let lin = epsilon_hat_search(|e| Ok(10.0 * e), 4.0, &s).unwrap();
        let EpsilonHat::Finite(v) = lin.value else { panic!() };
        assert!((v - 0.4).abs() < 1e-4 && 10.0 * v >= 4.0);
    }

    #[test]
    fn epsilon_hat_serializes_inf_marker() {
        assert_eq!(serde_json::to_string(&EpsilonHat::Infinite).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&EpsilonHat::Finite(0.25)).unwrap(), "0.25");
        let back: EpsilonHat = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, EpsilonHat::Infinite);
    }

    #[test]
    fn rn_interval_arithmetic() {
        let (lo, hi) = rn_interval_with_quantile(3.30, 2.37, 600, -3.52);
        assert!((lo - 3.183).abs() < 1e-3 && (hi - 3.417).abs() < 1e-3);
    }

    #[test]
    fn rn_interval_is_symmetric_about_lambda1() {
        let table = TWTable::build(TwConfig {
            d: 3,
            goe_n: 40,
            reps: 1000,
            seed: 1,
            method: GoeMethod::Tridiagonal,
        })
        .unwrap();
        let (lo, hi) = rn_interval(3.30, 2.37, 600, 0.05, &table).unwrap();
        assert!(((lo + hi) / 2.0 - 3.30).abs() < 1e-12);
        let q = table.tw1_quantile(0.025).unwrap();
        assert!(((hi - lo) / 2.0 - q.abs() * 2.37 / 600f64.powf(2.0 / 3.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn t_statistic_is_scale_free(l1 in 0.1f64..10.0, gap in 0.0f64..5.0, s in 0.1f64..5.0, c in 0.01f64..100.0) {
            let a = t_statistic(l1 + gap, l1, s, 500);
            let b = t_statistic(c * (l1 + gap), c * l1, c * s, 500);
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn k_hat_ignores_appended_small_eigenvalues(
            mut eigs in prop::collection::vec(0.0f64..10.0, 4..30),
            extra in prop::collection::vec(0.0f64..1.0, 1..10),
        ) {
            eigs.sort_by(|a, b| b.total_cmp(a));
            let n = 1000;
            if let Ok(k) = k_hat(&eigs, 1.0, n, 1.0 / 3.0) {
                if k + 2 < eigs.len() {
                    let floor = eigs[k + 1];
                    let mut longer = eigs[..k + 2].to_vec();
                    // only eigenvalues below λ_{K̂+2} are appended
                    longer.extend(extra.iter().map(|e| floor * e));
                    longer.sort_by(|a, b| b.total_cmp(a));
                    prop_assert_eq!(k_hat(&longer, 1.0, n, 1.0 / 3.0).unwrap(), k);
                }
            }
        }
    }
}
