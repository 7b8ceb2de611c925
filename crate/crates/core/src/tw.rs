//! Monte Carlo tables of the joint Tracy-Widom law of the top `d` scaled
//! GOE eigenvalues.
//!
//! A draw is `N^{2/3}(λ_j(W)/√N − 2)` for `j ≤ d`, where
//! `W = (G + Gᵀ)/√2` and `G` has i.i.d. standard normal entries. The
//! default sampler uses the orthogonally equivalent tridiagonal model
//! (diagonal `N(0, 2)`, off-diagonal `χ_{N−1}, …, χ_1`), whose top
//! eigenvalues come from Sturm bisection at `O(N)` cost per eigenvalue.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues_desc, Tridiagonal};
use crate::rng::map_replicates;
use crate::stats;

const MAGIC: &[u8; 4] = b"TWMC";
const FORMAT: u32 = 1;
/// Quantile queries below this many replicates are refused.
pub const MIN_QUERY_REPS: usize = 1000;

/// How GOE spectra are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoeMethod {
    /// Tridiagonal model with Sturm bisection.
    Tridiagonal,
    /// Dense `N × N` matrix and a full symmetric eigensolve.
    Dense,
}

impl GoeMethod {
    pub fn tag(self) -> &'static str {
        match self {
            GoeMethod::Tridiagonal => "tridiag",
            GoeMethod::Dense => "dense",
        }
    }
}

impl std::str::FromStr for GoeMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tridiag" | "tridiagonal" => Ok(GoeMethod::Tridiagonal),
            "dense" => Ok(GoeMethod::Dense),
            _ => Err(Error::Input(format!("unknown GOE method {s:?}"))),
        }
    }
}

/// Parameters identifying a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwConfig {
    pub d: usize,
    pub goe_n: usize,
    pub reps: usize,
    pub seed: u64,
    pub method: GoeMethod,
}

impl Default for TwConfig {
    fn default() -> Self {
        Self {
            d: 12,
            goe_n: 2000,
            reps: 20_000,
            seed: 42,
            method: GoeMethod::Tridiagonal,
        }
    }
}

impl TwConfig {
    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.goe_n == 0 || self.reps == 0 {
            return Err(Error::Input("d, goe_n and reps must be positive".into()));
        }
        if self.d > self.goe_n {
            return Err(Error::Dimension(format!(
                "cannot keep {} eigenvalues of a {}x{} matrix",
                self.d, self.goe_n, self.goe_n
            )));
        }
        Ok(())
    }

    /// File name under which this table is cached.
    pub fn cache_file_name(&self) -> String {
        format!(
            "tw_d{}_n{}_r{}_s{}_{}.twmc",
            self.d,
            self.goe_n,
            self.reps,
            self.seed,
            self.method.tag()
        )
    }
}

fn scale(eigs: &mut [f64], goe_n: usize) {
    let n = goe_n as f64;
    let (root, c) = (n.sqrt(), n.powf(1.0 / 6.0));
    for e in eigs {
        *e = c * (*e - 2.0 * root);
    }
}

/// Top-`d` scaled eigenvalues of a dense GOE(`goe_n`) draw.
pub fn sample_goe_scaled_eigs(goe_n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if d > goe_n {
        return Err(Error::Dimension(format!("d = {d} exceeds goe_n = {goe_n}")));
    }
    let mut w = Mat::<f64>::zeros(goe_n, goe_n);
    for j in 0..goe_n {
        w[(j, j)] = std::f64::consts::SQRT_2 * rng.sample::<f64, _>(StandardNormal);
        for i in j + 1..goe_n {
            // (g_ij + g_ji)/√2 is standard normal
            let v: f64 = rng.sample(StandardNormal);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let mut eigs = sym_eigenvalues_desc(w.as_ref())?;
    eigs.truncate(d);
    scale(&mut eigs, goe_n);
    Ok(eigs)
}

/// Same law as [`sample_goe_scaled_eigs`] through the tridiagonal model.
pub fn sample_goe_scaled_eigs_tridiagonal(goe_n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if d > goe_n {
        return Err(Error::Dimension(format!("d = {d} exceeds goe_n = {goe_n}")));
    }
    let diag: Vec<f64> = (0..goe_n)
        .map(|_| std::f64::consts::SQRT_2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let off: Vec<f64> = (1..goe_n)
        .rev()
        .map(|k| {
            let chi2 = ChiSquared::new(k as f64).expect("positive degrees of freedom");
            chi2.sample(rng).sqrt()
        })
        .collect();
    let t = Tridiagonal::new(diag, off);
    let n = goe_n as f64;
    let c = n.powf(1.0 / 6.0);
    // scaled eigenvalues below −60 are far outside any plausible top-12
    let hint = 2.0 * n.sqrt() - 60.0 / c;
    let tol = 1e-10 / c;
    let mut eigs = t.top_eigenvalues(d, Some(hint), tol);
    scale(&mut eigs, goe_n);
    Ok(eigs)
}

/// Monte Carlo samples of the scaled top-`d` GOE eigenvalues, with lazily
/// sorted views for quantile queries.
#[derive(Debug)]
pub struct TWTable {
    config: TwConfig,
    samples: Vec<f64>,
    gaps: OnceLock<Vec<f64>>,
    first: OnceLock<Vec<f64>>,
    ratio_max: Vec<OnceLock<Vec<f64>>>,
}

impl TWTable {
    /// Wraps existing row-major samples; every row must be non-increasing.
    pub fn from_samples(config: TwConfig, samples: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if samples.len() != config.reps * config.d {
            return Err(Error::Dimension(format!(
                "{} samples for a {}x{} table",
                samples.len(),
                config.reps,
                config.d
            )));
        }
        for row in samples.chunks(config.d) {
            if row.iter().any(|v| !v.is_finite()) || row.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::Input("table row is not finite and non-increasing".into()));
            }
        }
        Ok(Self {
            config,
            samples,
            gaps: OnceLock::new(),
            first: OnceLock::new(),
            ratio_max: (0..config.d.saturating_sub(2)).map(|_| OnceLock::new()).collect(),
        })
    }

    /// Draws a fresh table; replicate `i` uses its own counter-based stream,
    /// so the result does not depend on the thread count.
    pub fn build(config: TwConfig) -> Result<Self> {
        config.validate()?;
        let sampler = match config.method {
            GoeMethod::Tridiagonal => sample_goe_scaled_eigs_tridiagonal,
            GoeMethod::Dense => sample_goe_scaled_eigs,
        };
        let rows = map_replicates(config.reps, config.seed, |_, rng| sampler(config.goe_n, config.d, rng));
        let mut samples = Vec::with_capacity(config.reps * config.d);
        for row in rows {
            samples.extend(row?);
        }
        Self::from_samples(config, samples)
    }

    /// Loads `dir/<cache_file_name>` when it matches `config` exactly and
    /// otherwise builds and persists a new table.
    pub fn build_or_load(dir: &Path, config: TwConfig) -> Result<Self> {
        let path = dir.join(config.cache_file_name());
        if path.exists() {
            match Self::read_from(&path) {
                Ok(t) if t.config == config => return Ok(t),
                Ok(_) => log::warn!("cache {} does not match the request; rebuilding", path.display()),
                Err(e) => log::warn!("cache {} unreadable ({e}); rebuilding", path.display()),
            }
        }
        log::info!(
            "building TW table: d={} goe_n={} reps={} seed={} method={}",
            config.d,
            config.goe_n,
            config.reps,
            config.seed,
            config.method.tag()
        );
        let table = Self::build(config)?;
        fs::create_dir_all(dir).map_err(|e| Error::Cache(format!("cannot create {}: {e}", dir.display())))?;
        table.write_to(&path)?;
        Ok(table)
    }

    /// Writes the binary cache format atomically (temp file then rename).
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let tmp: PathBuf = path.with_extension("twmc.tmp");
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            w.write_all(MAGIC)?;
            w.write_all(&FORMAT.to_le_bytes())?;
            w.write_all(&(self.config.d as u32).to_le_bytes())?;
            w.write_all(&(self.config.goe_n as u32).to_le_bytes())?;
            w.write_all(&(self.config.reps as u64).to_le_bytes())?;
            w.write_all(&self.config.seed.to_le_bytes())?;
            for v in &self.samples {
                w.write_all(&v.to_le_bytes())?;
            }
            w.flush()?;
            drop(w);
            fs::rename(&tmp, path)
        };
        write().map_err(|e| Error::Cache(format!("cannot write {}: {e}", path.display())))
    }

    /// Reads a cache file. The sampling method is recovered from the file
    /// name; anything unrecognised is treated as the default method.
    pub fn read_from(path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::Cache(format!("{}: {m}", path.display()));
        let file = fs::File::open(path).map_err(|e| bad(&e.to_string()))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u32b = [0u8; 4];
        let mut u64b = [0u8; 8];
        let mut next_u32 = |r: &mut BufReader<fs::File>| -> Result<u32> {
            r.read_exact(&mut u32b).map_err(|_| bad("truncated header"))?;
            Ok(u32::from_le_bytes(u32b))
        };
        let format = next_u32(&mut r)?;
        if format != FORMAT {
            return Err(bad(&format!("format version {format}, expected {FORMAT}")));
        }
        let d = next_u32(&mut r)? as usize;
        let goe_n = next_u32(&mut r)? as usize;
        let mut next_u64 = |r: &mut BufReader<fs::File>| -> Result<u64> {
            r.read_exact(&mut u64b).map_err(|_| bad("truncated header"))?;
            Ok(u64::from_le_bytes(u64b))
        };
        let reps = next_u64(&mut r)? as usize;
        let seed = next_u64(&mut r)?;
        let mut body = Vec::new();
        r.read_to_end(&mut body).map_err(|e| bad(&e.to_string()))?;
        if body.len() != reps * d * 8 {
            return Err(bad("body length does not match header"));
        }
        let samples = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let method = if name.ends_with("_dense.twmc") {
            GoeMethod::Dense
        } else {
            GoeMethod::Tridiagonal
        };
        let config = TwConfig {
            d,
            goe_n,
            reps,
            seed,
            method,
        };
        Self::from_samples(config, samples).map_err(|e| bad(&e.to_string()))
    }

    pub fn config(&self) -> &TwConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    pub fn reps(&self) -> usize {
        self.config.reps
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.config.d..(i + 1) * self.config.d]
    }

    /// Column `j` (0-based) in replicate order.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.chunks(self.config.d).map(|r| r[j]).collect()
    }

    fn check_precision(&self) -> Result<()> {
        if self.config.reps < MIN_QUERY_REPS {
            return Err(Error::Precision(format!(
                "{} replicates; quantile queries need at least {MIN_QUERY_REPS}",
                self.config.reps
            )));
        }
        Ok(())
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Input(format!("level {alpha} outside (0, 1)")));
        }
        Ok(())
    }

    /// Sorted sample of `ζ₁ − ζ₂`.
    pub fn sorted_gaps(&self) -> Result<&[f64]> {
        if self.config.d < 2 {
            return Err(Error::Dimension("gap statistics need d >= 2".into()));
        }
        Ok(self.gaps.get_or_init(|| {
            stats::sorted(
                &self
                    .samples
                    .chunks(self.config.d)
                    .map(|r| r[0] - r[1])
                    .collect::<Vec<_>>(),
            )
        }))
    }

    /// Sorted sample of `ζ₁`.
    pub fn sorted_first(&self) -> &[f64] {
        self.first.get_or_init(|| stats::sorted(&self.column(0)))
    }

    /// `(1 − α)`-quantile of `ζ₁ − ζ₂`: the critical value of the gap test.
    pub fn gap_quantile(&self, alpha: f64) -> Result<f64> {
        Self::check_alpha(alpha)?;
        self.check_precision()?;
        stats::quantile_sorted(self.sorted_gaps()?, 1.0 - alpha)
    }

    /// Add-one Monte Carlo p-value `(1 + #{gaps ≥ t})/(reps + 1)`.
    pub fn gap_p_value(&self, t: f64) -> Result<f64> {
        self.check_precision()?;
        let gaps = self.sorted_gaps()?;
        Ok((1 + stats::count_at_least(gaps, t)) as f64 / (gaps.len() + 1) as f64)
    }

    /// `level`-quantile `q′_level` of the one-dimensional law `ζ₁`.
    pub fn tw1_quantile(&self, level: f64) -> Result<f64> {
        Self::check_alpha(level)?;
        self.check_precision()?;
        stats::quantile_sorted(self.sorted_first(), level)
    }

    /// Sorted sample of `max_{j ≤ κ} (ζ_j − ζ_{j+1})/(ζ_{j+1} − ζ_{j+2})`.
    pub fn sorted_ratio_max(&self, kappa: usize) -> Result<&[f64]> {
        if kappa == 0 || kappa + 2 > self.config.d {
            return Err(Error::Dimension(format!(
                "kappa = {kappa} needs d >= kappa + 2, table has d = {}",
                self.config.d
            )));
        }
        Ok(self.ratio_max[kappa - 1].get_or_init(|| {
            let v: Vec<f64> = self
                .samples
                .chunks(self.config.d)
                .map(|r| {
                    (0..kappa)
                        .map(|j| (r[j] - r[j + 1]) / (r[j + 1] - r[j + 2]))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            stats::sorted(&v)
        }))
    }

    /// `(1 − α)`-quantile of the gap-ratio maximum over `κ` ratios.
    pub fn onatski_critical(&self, kappa: usize, alpha: f64) -> Result<f64> {
        Self::check_alpha(alpha)?;
        self.check_precision()?;
        stats::quantile_sorted(self.sorted_ratio_max(kappa)?, 1.0 - alpha)
    }

    /// Add-one Monte Carlo p-value of a gap-ratio statistic.
    pub fn onatski_p_value(&self, kappa: usize, r: f64) -> Result<f64> {
        self.check_precision()?;
        let v = self.sorted_ratio_max(kappa)?;
        Ok((1 + stats::count_at_least(v, r)) as f64 / (v.len() + 1) as f64)
    }

    /// CSV export: header `rep,zeta_1,…,zeta_d` then one row per replicate.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["rep".to_string()];
        header.extend((1..=self.config.d).map(|j| format!("zeta_{j}")));
        w.write_record(&header)?;
        for (i, row) in self.samples.chunks(self.config.d).enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
