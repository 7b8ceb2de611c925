//! Simulation harness: population spectra, data generators, replicate
//! sweeps, and the rejection-rate, power-curve and bootstrap tables.

use std::fmt::Write as _;
use std::io::Write;

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{normalized_samples, run_bootstrap, Functional};
use crate::error::{Error, Result};
use crate::estimators::{truncate_spectrum, xi_hat};
use crate::inference::{k_hat, onatski, run_test_on_report, TestOptions};
use crate::linalg::mat_mul;
use crate::mp::{edge, sigma_cubed, solve_xi, SpectralModel};
use crate::quest::SpectrumEstimator;
use crate::rng::{derive_seed, map_replicates, replicate_rng};
use crate::spectra::{spectrum, spectrum_of, DataMatrix};
use crate::stats;
use crate::tw::TWTable;

/// Variance of a `t₁₀` variable.
pub const T10_VARIANCE: f64 = 10.0 / 8.0;

/// Bulk eigenvalues past this index (1-based) decay as `j^{-c}`.
pub const DECAY_START: usize = 152;

/// Shape of the population spectrum below the leading eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumKind {
    /// Leading values then ones.
    Spiked,
    /// Leading values, ones up to index 151, then `j^{-c}`.
    Decaying { c: f64 },
    /// All `p` eigenvalues given explicitly.
    Custom { atoms: Vec<f64> },
}

/// Law of the i.i.d. entries of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataLaw {
    Gaussian,
    /// `t₁₀/√1.25`, unit variance.
    T10,
}

impl DataLaw {
    pub fn tag(&self) -> &'static str {
        match self {
            DataLaw::Gaussian => "gaussian",
            DataLaw::T10 => "t10",
        }
    }
}

/// Population eigenvalues, in index order, for a spectrum shape.
pub fn population_eigs(kind: &SpectrumKind, leading: &[f64], p: usize) -> Result<Vec<f64>> {
    let mut eigs = match kind {
        SpectrumKind::Spiked => vec![1.0; p],
        SpectrumKind::Decaying { c } => {
            if !(*c > 0.0) {
                return Err(Error::Input(format!("decay exponent c = {c} must be positive")));
            }
            (1..=p)
                .map(|j| if j < DECAY_START { 1.0 } else { (j as f64).powf(-c) })
                .collect()
        }
        SpectrumKind::Custom { atoms } => {
            if atoms.len() != p {
                return Err(Error::Dimension(format!("{} custom atoms for p = {p}", atoms.len())));
            }
            atoms.clone()
        }
    };
    if leading.len() > p {
        return Err(Error::Dimension(format!(
            "{} leading values for p = {p}",
            leading.len()
        )));
    }
    eigs[..leading.len()].copy_from_slice(leading);
    if eigs.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Input(
            "population eigenvalues must be positive and finite".into(),
        ));
    }
    Ok(eigs)
}

/// The population spectrum as a uniform model at `y = p/n`.
pub fn gen_spectrum(kind: &SpectrumKind, leading: &[f64], p: usize, n: usize) -> Result<SpectralModel> {
    SpectralModel::uniform(population_eigs(kind, leading, p)?, p as f64 / n as f64)
}

/// Haar-distributed orthogonal matrix: `Q` from the QR factorization of a
/// Gaussian matrix with columns flipped so that `diag(R) > 0`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Mat<f64> {
    let mut g = Mat::<f64>::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            g[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// `n × p` matrix of i.i.d. standardized entries, filled row by row.
pub fn standard_entries<R: Rng + ?Sized>(n: usize, p: usize, law: DataLaw, rng: &mut R) -> Mat<f64> {
    let mut x = Mat::<f64>::zeros(n, p);
    match law {
        DataLaw::Gaussian => {
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = rng.sample(StandardNormal);
                }
            }
        }
        DataLaw::T10 => {
            let t = StudentT::new(10.0).expect("10 degrees of freedom");
            let s = T10_VARIANCE.sqrt();
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = t.sample(rng) / s;
                }
            }
        }
    }
    x
}

/// `Y = XΣ^{1/2}` with `Σ = diag(eigs)`, or `Σ = Q diag(eigs) Qᵀ` with Haar
/// `Q` when `rotate` is set.
pub fn gen_data<R: Rng + ?Sized>(
    eigs: &[f64],
    rotate: bool,
    law: DataLaw,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    DataMatrix::new(gen_matrix(eigs, rotate, law, n, rng, true))
}

/// As [`gen_data`]; with `full = false` the trailing `Qᵀ` is skipped, which
/// leaves the spectrum unchanged.
fn gen_matrix<R: Rng + ?Sized>(
    eigs: &[f64],
    rotate: bool,
    law: DataLaw,
    n: usize,
    rng: &mut R,
    full: bool,
) -> Mat<f64> {
    let p = eigs.len();
    let q = rotate.then(|| haar_orthogonal(p, rng));
    let mut x = standard_entries(n, p, law, rng);
    let scales: Vec<f64> = eigs.iter().map(|l| l.sqrt()).collect();
    match q {
        None => {
            for j in 0..p {
                for i in 0..n {
                    x[(i, j)] *= scales[j];
                }
            }
            x
        }
        Some(q) => {
            let mut xq = mat_mul(x.as_ref(), q.as_ref());
            for j in 0..p {
                for i in 0..n {
                    xq[(i, j)] *= scales[j];
                }
            }
            if full {
                mat_mul(xq.as_ref(), q.transpose())
            } else {
                xq
            }
        }
    }
}

/// One simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub spectrum: SpectrumKind,
    pub leading: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub law: DataLaw,
    pub rotate: bool,
    pub reps: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub alpha: f64,
}

impl Scenario {
    pub fn spiked(label: &str, leading: &[f64], n: usize, p: usize, reps: usize, seed: u64) -> Self {
        Self {
            label: label.to_string(),
            spectrum: SpectrumKind::Spiked,
            leading: leading.to_vec(),
            n,
            p,
            law: DataLaw::Gaussian,
            rotate: false,
            reps,
            seed,
            epsilon: 0.2,
            alpha: 0.05,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Input(format!("scenario {:?} has reps = 0", self.label)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 && self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Input(format!(
                "scenario {:?} has a level outside (0, 1)",
                self.label
            )));
        }
        Ok(())
    }

    pub fn population(&self) -> Result<Vec<f64>> {
        population_eigs(&self.spectrum, &self.leading, self.p)
    }

    pub fn model(&self) -> Result<SpectralModel> {
        gen_spectrum(&self.spectrum, &self.leading, self.p, self.n)
    }

    /// `(1/((1+ε)ξ_{n,1}), 1/((1−ε)ξ_{n,1}))`: the upper end of the null
    /// region and the lower end of the one-spike alternative.
    pub fn boundary_markers(&self) -> Result<(f64, f64)> {
        let xi1 = solve_xi(&self.model()?, 1)?.xi;
        Ok((1.0 / ((1.0 + self.epsilon) * xi1), 1.0 / ((1.0 - self.epsilon) * xi1)))
    }

    /// Sample spectrum of replicate `i`.
    fn replicate_matrix(&self, eigs: &[f64], rng: &mut ChaCha8Rng) -> Mat<f64> {
        gen_matrix(eigs, self.rotate, self.law, self.n, rng, false)
    }
}

/// Per-replicate outcome of the test battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub t_n: f64,
    pub reject: bool,
    pub sigma_hat: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub onatski1: Option<f64>,
    pub onatski10: Option<f64>,
    pub k_hat: Option<usize>,
    pub ci_rn_lower: f64,
    pub ci_rn_upper: f64,
    pub flags: Vec<String>,
}

/// Runs the test battery on every replicate of a scenario. Replicates whose
/// pipeline fails are logged and returned as errors in place.
pub fn run_scenario(
    scn: &Scenario,
    table: &TWTable,
    estimator: &dyn SpectrumEstimator,
) -> Result<Vec<std::result::Result<ReplicateRecord, String>>> {
    scn.validate()?;
    let eigs = scn.population()?;
    let opts = TestOptions {
        epsilon: scn.epsilon,
        alpha: scn.alpha,
        kappa: None,
        nu: None,
        with_epsilon_hat: false,
        ..TestOptions::default()
    };
    Ok(map_replicates(scn.reps, scn.seed, |i, rng| {
        let y = scn.replicate_matrix(&eigs, rng);
        let out = (|| -> Result<ReplicateRecord> {
            let report = spectrum_of(y.as_ref())?;
            let t = run_test_on_report(&report, &opts, table, estimator)?;
            let kh = match k_hat(&report.cov_eigs, t.sigma_hat, report.n, 1.0 / 3.0) {
                Ok(k) => Some(k),
                Err(Error::Numeric(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ReplicateRecord {
                rep: i,
                t_n: t.t_n,
                reject: t.reject,
                sigma_hat: t.sigma_hat,
                lambda1: t.lambda1,
                lambda2: t.lambda2,
                onatski1: onatski(&report.cov_eigs, 1).ok(),
                onatski10: onatski(&report.cov_eigs, 10).ok(),
                k_hat: kh,
                ci_rn_lower: t.ci_rn_lower,
                ci_rn_upper: t.ci_rn_upper,
                flags: t.flags,
            })
        })();
        out.map_err(|e| {
            log::warn!("scenario {:?} replicate {i}: {e}", scn.label);
            e.to_string()
        })
    }))
}

/// Rejection frequencies of `T_n`, `R_n(1)` and `R_n(10)` over the
/// successful replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRates {
    pub t_n: f64,
    pub r1: f64,
    pub r10: f64,
    pub completed: usize,
    pub failures: usize,
}

impl RejectionRates {
    pub fn from_records(
        records: &[std::result::Result<ReplicateRecord, String>],
        table: &TWTable,
        alpha: f64,
    ) -> Result<Self> {
        let ok: Vec<&ReplicateRecord> = records.iter().filter_map(|r| r.as_ref().ok()).collect();
        let failures = records.len() - ok.len();
        if ok.is_empty() {
            return Err(Error::Numeric(format!("all {failures} replicates failed")));
        }
        let c1 = table.onatski_critical(1, alpha)?;
        let c10 = table.onatski_critical(10, alpha)?;
        let m = ok.len() as f64;
        let rate = |f: &dyn Fn(&ReplicateRecord) -> bool| ok.iter().filter(|r| f(r)).count() as f64 / m;
        Ok(Self {
            t_n: rate(&|r| r.reject),
            r1: rate(&|r| r.onatski1.is_some_and(|v| v > c1)),
            r10: rate(&|r| r.onatski10.is_some_and(|v| v > c10)),
            completed: ok.len(),
            failures,
        })
    }
}

/// One line of a rejection-rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub hypothesis: String,
    pub k: usize,
    pub leading: Vec<f64>,
    pub law: DataLaw,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub rates: RejectionRates,
}

/// A table row specification: hypothesis label, `K`, scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub hypothesis: String,
    pub k: usize,
    pub scenario: Scenario,
}

/// The fifteen three-spike settings at `(n, p) = (600, 400)`.
pub fn table1_entries(reps: usize, seed: u64) -> Vec<TableEntry> {
    let rows: [(usize, [f64; 3]); 15] = [
        (0, [1.0, 1.0, 1.0]),
        (0, [1.25, 1.25, 1.25]),
        (0, [1.25, 1.25, 1.0]),
        (0, [1.3, 1.3, 1.3]),
        (0, [1.3, 1.3, 1.0]),
        (0, [1.5, 1.5, 1.3]),
        (0, [1.5, 1.5, 1.0]),
        (1, [2.5, 1.5, 1.3]),
        (1, [3.0, 1.5, 1.3]),
        (1, [3.5, 1.5, 1.3]),
        (1, [4.0, 1.5, 1.3]),
        (1, [4.5, 1.5, 1.3]),
        (1, [5.0, 1.5, 1.3]),
        (2, [4.0, 3.0, 1.0]),
        (2, [5.0, 3.0, 1.0]),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, (k, l))| TableEntry {
            hypothesis: if *k == 0 { "H0".into() } else { format!("H1({k})") },
            k: *k,
            scenario: Scenario::spiked(
                &format!("({},{},{})", l[0], l[1], l[2]),
                l,
                600,
                400,
                reps,
                derive_seed(seed, i as u64),
            ),
        })
        .collect()
}

/// Runs every entry and collects its rejection rates.
pub fn table_runner(
    entries: &[TableEntry],
    table: &TWTable,
    estimator: &dyn SpectrumEstimator,
) -> Result<Vec<TableRow>> {
    entries
        .iter()
        .map(|e| {
            let s = &e.scenario;
            log::info!("table row {} ({} reps)", s.label, s.reps);
            let recs = run_scenario(s, table, estimator)?;
            Ok(TableRow {
                label: s.label.clone(),
                hypothesis: e.hypothesis.clone(),
                k: e.k,
                leading: s.leading.clone(),
                law: s.law,
                n: s.n,
                p: s.p,
                reps: s.reps,
                rates: RejectionRates::from_records(&recs, table, s.alpha)?,
            })
        })
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_table_csv<W: Write>(rows: &[TableRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "hypothesis",
        "K",
        "leading",
        "law",
        "n",
        "p",
        "reps",
        "completed",
        "T_n",
        "R_n(1)",
        "R_n(10)",
    ])?;
    for r in rows {
        out.write_record([
            r.hypothesis.clone(),
            r.k.to_string(),
            join(&r.leading),
            r.law.tag().to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.reps.to_string(),
            r.rates.completed.to_string(),
            format!("{:.4}", r.rates.t_n),
            format!("{:.4}", r.rates.r1),
            format!("{:.4}", r.rates.r10),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `count` equispaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda1: f64,
    pub rates: RejectionRates,
}

/// Rejection rates along a grid of `λ₁` values with the rest of the
/// population held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub base: Scenario,
    pub points: Vec<CurvePoint>,
    pub null_upper: f64,
    pub alt_lower: f64,
}

pub fn power_curve(
    base: &Scenario,
    grid: &[f64],
    table: &TWTable,
    estimator: &dyn SpectrumEstimator,
) -> Result<PowerCurve> {
    let mut points = Vec::with_capacity(grid.len());
    for (i, &l1) in grid.iter().enumerate() {
        let mut s = base.clone();
        if s.leading.is_empty() {
            s.leading.push(l1);
        } else {
            s.leading[0] = l1;
        }
        s.seed = derive_seed(base.seed, i as u64);
        log::info!("curve {} at lambda1 = {l1}", base.label);
        let recs = run_scenario(&s, table, estimator)?;
        points.push(CurvePoint {
            lambda1: l1,
            rates: RejectionRates::from_records(&recs, table, s.alpha)?,
        });
    }
    let mut probe = base.clone();
    if probe.leading.is_empty() {
        probe.leading.push(grid.first().copied().unwrap_or(1.0));
    }
    let (null_upper, alt_lower) = probe.boundary_markers()?;
    Ok(PowerCurve {
        base: base.clone(),
        points,
        null_upper,
        alt_lower,
    })
}

impl PowerCurve {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["lambda1", "T_n", "R_n(1)", "R_n(10)", "completed"])?;
        for p in &self.points {
            out.write_record([
                p.lambda1.to_string(),
                format!("{:.4}", p.rates.t_n),
                format!("{:.4}", p.rates.r1),
                format!("{:.4}", p.rates.r10),
                p.rates.completed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Line plot of the three rates with the level line and the two
    /// boundary markers.
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (640.0, 400.0, 50.0);
        let xs: Vec<f64> = self.points.iter().map(|p| p.lambda1).collect();
        let (x0, x1) = match (xs.first(), xs.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            (Some(&a), _) => (a - 0.5, a + 0.5),
            _ => (0.0, 1.0),
        };
        let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let py = |y: f64| h - m - y * (h - 2.0 * m);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
            t = m,
            b = h - m,
            r = w - m
        );
        for k in 0..=4 {
            let y = k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{y:.2}</text>"#,
                m - 6.0,
                py(y) + 4.0
            );
        }
        for x in [x0, 0.5 * (x0 + x1), x1] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{x:.2}</text>"#,
                px(x),
                h - m + 18.0
            );
        }
        let a = self.base.alpha;
        let _ = writeln!(
            s,
            r##"<line x1="{m}" x2="{}" y1="{y}" y2="{y}" stroke="#888" stroke-dasharray="4 3"/>"##,
            w - m,
            y = py(a)
        );
        for (x, label) in [(self.null_upper, "H0 end"), (self.alt_lower, "H1 start")] {
            if x >= x0 && x <= x1 {
                let _ = writeln!(
                    s,
                    r##"<line x1="{X}" x2="{X}" y1="{}" y2="{}" stroke="#c33"/><text x="{X}" y="{}" text-anchor="middle" fill="#c33">{label}</text>"##,
                    h - m,
                    h - m + 6.0,
                    h - m + 32.0,
                    X = px(x)
                );
            }
        }
        let series: [(&str, &str, fn(&RejectionRates) -> f64); 3] = [
            ("T_n", "#1f77b4", |r| r.t_n),
            ("R_n(1)", "#2ca02c", |r| r.r1),
            ("R_n(10)", "#ff7f0e", |r| r.r10),
        ];
        for (i, (name, color, f)) in series.iter().enumerate() {
            let pts: Vec<String> = self
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p.lambda1), py(f(&p.rates))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
                m + 10.0,
                m + 16.0 * (i as f64 + 1.0)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            w / 2.0,
            m / 2.0,
            self.base.label
        );
        s.push_str("</svg>\n");
        s
    }
}

/// The four panels: spiked Gaussian, spiked `t₁₀`, decaying `c = 1` and
/// `c = 0.5` (both Gaussian), at `(n, p) = (600, 400)`.
pub fn figure1_panels(reps: usize, seed: u64) -> Vec<Scenario> {
    let mk = |i: u64, label: &str, spectrum: SpectrumKind, law: DataLaw| Scenario {
        label: label.to_string(),
        spectrum,
        leading: vec![1.0],
        n: 600,
        p: 400,
        law,
        rotate: false,
        reps,
        seed: derive_seed(seed, i),
        epsilon: 0.2,
        alpha: 0.05,
    };
    vec![
        mk(0, "spiked_gaussian", SpectrumKind::Spiked, DataLaw::Gaussian),
        mk(1, "spiked_t10", SpectrumKind::Spiked, DataLaw::T10),
        mk(2, "decaying_c1", SpectrumKind::Decaying { c: 1.0 }, DataLaw::Gaussian),
        mk(3, "decaying_c0.5", SpectrumKind::Decaying { c: 0.5 }, DataLaw::Gaussian),
    ]
}

/// Default `λ₁` grid of the power curves: 26 points on `[1, 3.5]`.
pub fn figure1_grid() -> Vec<f64> {
    linspace(1.0, 3.5, 26)
}

/// Population normalizers `(r_n, σ_n)`.
pub fn population_edge(model: &SpectralModel) -> Result<(f64, f64)> {
    let xi0 = solve_xi(model, 0)?.xi;
    Ok((edge(model, xi0)?, sigma_cubed(model, xi0)?.cbrt()))
}

/// Sizes of a bootstrap evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEvalSettings {
    /// Direct simulations defining the ground truth.
    pub truth_reps: usize,
    /// Data sets (the first of the truth replicates) that are bootstrapped.
    pub outer: usize,
    pub b: usize,
}

impl Default for BootstrapEvalSettings {
    fn default() -> Self {
        Self {
            truth_reps: 5000,
            outer: 100,
            b: 500,
        }
    }
}

/// Ground truth and bootstrap summary for one normalized statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapTableRow {
    pub label: String,
    pub law: DataLaw,
    pub statistic: String,
    pub truth_mean: f64,
    pub truth_sd: f64,
    pub truth_q95: f64,
    pub boot_mean: f64,
    pub boot_mean_sd: f64,
    pub boot_sd: f64,
    pub boot_sd_sd: f64,
    pub boot_q95: f64,
    /// Average over data sets of `P(truth ≤ q̂₀.₉₅)`.
    pub coverage: f64,
    pub outer: usize,
    pub b: usize,
}

/// Direct-simulation samples of `L_n`, `G_n` and `λ₁(Σ̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSample {
    pub l: Vec<f64>,
    pub g: Vec<f64>,
    pub lambda1: Vec<f64>,
}

pub fn truth_sample(scn: &Scenario, reps: usize) -> Result<TruthSample> {
    let eigs = scn.population()?;
    let (r, sigma) = population_edge(&scn.model()?)?;
    let c = (scn.n as f64).powf(2.0 / 3.0) / sigma;
    let rows = map_replicates(reps, scn.seed, |_, rng| -> Result<(f64, f64)> {
        let e = spectrum_of(scn.replicate_matrix(&eigs, rng).as_ref())?;
        Ok((e.lambda1(), e.lambda2()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(TruthSample {
        l: rows.iter().map(|(a, _)| c * (a - r)).collect(),
        g: rows.iter().map(|(a, b)| c * (a - b)).collect(),
        lambda1: rows.iter().map(|(a, _)| *a).collect(),
    })
}

/// Bootstrap `L★`, `G★` on replicate `i` of a scenario.
fn bootstrap_on_replicate(
    scn: &Scenario,
    eigs: &[f64],
    i: usize,
    b: usize,
    estimator: &dyn SpectrumEstimator,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = replicate_rng(scn.seed, i as u64);
    let data = DataMatrix::new(scn.replicate_matrix(eigs, &mut rng))?;
    let report = spectrum(&data)?;
    let est = estimator.estimate(&report)?;
    let trunc = truncate_spectrum(&est, xi_hat(&report), scn.epsilon)?;
    let run = run_bootstrap(
        &trunc,
        scn.n,
        b,
        &Functional::top2(),
        derive_seed(scn.seed, 0xB007 + i as u64),
    )?;
    let s = normalized_samples(&run)?;
    Ok((s.l, s.g))
}

/// Table-2/3 style comparison of bootstrap estimates with direct
/// simulation, for `L_n` and `G_n`.
pub fn bootstrap_eval(
    scn: &Scenario,
    settings: &BootstrapEvalSettings,
    estimator: &dyn SpectrumEstimator,
) -> Result<[BootstrapTableRow; 2]> {
    if settings.outer == 0 || settings.b == 0 || settings.truth_reps < settings.outer {
        return Err(Error::Input(
            "bootstrap evaluation needs 1 <= outer <= truth_reps and B >= 1".into(),
        ));
    }
    let truth = truth_sample(scn, settings.truth_reps)?;
    let eigs = scn.population()?;
    let boots = map_replicates(settings.outer, 0, |i, _| {
        bootstrap_on_replicate(scn, &eigs, i, settings.b, estimator)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let row =
        |name: &str, truth: &[f64], pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Result<BootstrapTableRow> {
            let means: Vec<f64> = boots.iter().map(|b| stats::mean(pick(b))).collect();
            let sds: Vec<f64> = boots.iter().map(|b| stats::sd(pick(b))).collect();
            let qs = boots
                .iter()
                .map(|b| stats::quantile(pick(b), 0.95))
                .collect::<Result<Vec<_>>>()?;
            let cov: Vec<f64> = qs.iter().map(|&q| stats::coverage(truth, q)).collect();
            Ok(BootstrapTableRow {
                label: scn.label.clone(),
                law: scn.law,
                statistic: name.to_string(),
                truth_mean: stats::mean(truth),
                truth_sd: stats::sd(truth),
                truth_q95: stats::quantile(truth, 0.95)?,
                boot_mean: stats::mean(&means),
                boot_mean_sd: stats::sd(&means),
                boot_sd: stats::mean(&sds),
                boot_sd_sd: stats::sd(&sds),
                boot_q95: stats::mean(&qs),
                coverage: stats::mean(&cov),
                outer: settings.outer,
                b: settings.b,
            })
        };
    Ok([row("L_n", &truth.l, &|b| &b.0)?, row("G_n", &truth.g, &|b| &b.1)?])
}

/// The three population shapes at `(n, p) = (500, 300)` with Haar rotation,
/// for each data law.
pub fn bootstrap_table_scenarios(seed: u64) -> Vec<Scenario> {
    let shapes: [(&str, Vec<f64>); 3] = [
        ("identity", vec![]),
        ("two_spikes", vec![1.4, 1.2]),
        ("five_spikes", vec![1.3; 5]),
    ];
    let mut out = Vec::new();
    for (li, law) in [DataLaw::Gaussian, DataLaw::T10].into_iter().enumerate() {
        for (si, (name, lead)) in shapes.iter().enumerate() {
            let mut s = Scenario::spiked(name, lead, 500, 300, 1, derive_seed(seed, (10 * li + si) as u64));
            s.law = law;
            s.rotate = true;
            out.push(s);
        }
    }
    out
}

/// `E λ₁(Σ̂) − λ₁(Σ)` against its bootstrap estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub label: String,
    pub law: DataLaw,
    pub truth: f64,
    pub estimate: f64,
    pub estimate_sd: f64,
    pub outer: usize,
    pub b: usize,
}

pub fn bias_eval(
    scn: &Scenario,
    settings: &BootstrapEvalSettings,
    estimator: &dyn SpectrumEstimator,
) -> Result<BiasRow> {
    if settings.outer == 0 || settings.b == 0 || settings.truth_reps < settings.outer {
        return Err(Error::Input(
            "bias evaluation needs 1 <= outer <= truth_reps and B >= 1".into(),
        ));
    }
    let eigs = scn.population()?;
    let l1_pop = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let truth = stats::mean(&truth_sample(scn, settings.truth_reps)?.lambda1) - l1_pop;
    let ests = map_replicates(settings.outer, 0, |i, _| -> Result<f64> {
        let mut rng = replicate_rng(scn.seed, i as u64);
        let data = DataMatrix::new(scn.replicate_matrix(&eigs, &mut rng))?;
        let est = crate::bootstrap::bias_estimate(
            &data,
            scn.epsilon,
            settings.b,
            derive_seed(scn.seed, 0xB1A5 + i as u64),
            estimator,
        )?;
        Ok(est.bias)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BiasRow {
        label: scn.label.clone(),
        law: scn.law,
        truth,
        estimate: stats::mean(&ests),
        estimate_sd: stats::sd(&ests),
        outer: settings.outer,
        b: settings.b,
    })
}

/// The bias settings at `(n, p) = (500, 600)` with Haar rotation.
pub fn bias_table_scenarios(seed: u64) -> Vec<Scenario> {
    let leads = [[1.0, 1.0], [1.1, 1.0], [1.2, 1.0], [1.2, 1.1]];
    let mut out = Vec::new();
    for (li, law) in [DataLaw::Gaussian, DataLaw::T10].into_iter().enumerate() {
        for (si, l) in leads.iter().enumerate() {
            let mut s = Scenario::spiked(
                &format!("({},{})", l[0], l[1]),
                l,
                500,
                600,
                1,
                derive_seed(seed, (100 + 10 * li + si) as u64),
            );
            s.law = law;
            s.rotate = true;
            out.push(s);
        }
    }
    out
}

pub fn write_bootstrap_csv<W: Write>(rows: &[BootstrapTableRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_bias_csv<W: Write>(rows: &[BiasRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
