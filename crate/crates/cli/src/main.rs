//! `edgegap` command-line front end.
//!
//! Settings resolve as command-line flag, then `--config` file entry, then
//! built-in default. Exit codes: 0 success, 2 input error, 3 numeric
//! failure, 4 cache error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgegap::bootstrap::{bias_from_run, bootstrap_world, normalized_samples, run_bootstrap, Functional};
use edgegap::inference::{k_hat, run_test, t_statistic, EpsilonSearch, TestOptions};
use edgegap::io::{ingest_csv, returns_from_csv, write_atomic, write_matrix_csv, KeyValueConfig, MissingPolicy};
use edgegap::quest::{ExternalSpectrum, QuestOptions, SpectrumEstimator};
use edgegap::sim::{
    bias_eval, bias_table_scenarios, bootstrap_eval, bootstrap_table_scenarios, figure1_grid, figure1_panels,
    power_curve, table1_entries, table_runner, write_bias_csv, write_bootstrap_csv, write_table_csv,
    BootstrapEvalSettings, PowerCurve,
};
use edgegap::spectra::spectrum;
use edgegap::tw::GoeMethod;
use edgegap::{DataMatrix, Error, Result, TWTable, TwConfig};

/// Environment variable overriding the TW table cache directory.
const CACHE_ENV: &str = "EDGEGAP_CACHE_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "edgegap",
    version,
    about = "Tracy-Widom versus Gaussian regime test for the top covariance eigenvalue"
)]
struct Cli {
    /// `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for Monte Carlo work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory holding cached TW tables.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(flatten)]
    tw: TwArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct TwArgs {
    /// Number of leading GOE eigenvalues kept per table replicate.
    #[arg(long, global = true)]
    d: Option<usize>,
    /// GOE matrix size.
    #[arg(long, global = true)]
    goe_n: Option<usize>,
    /// Table replicates.
    #[arg(long, global = true)]
    tw_reps: Option<usize>,
    #[arg(long, global = true)]
    tw_seed: Option<u64>,
    /// GOE sampler: tridiagonal or dense.
    #[arg(long, global = true)]
    goe_method: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build (or load) the cached multivariate Tracy-Widom table.
    TwTable {
        /// Alias of --tw-reps.
        #[arg(long)]
        reps: Option<usize>,
        /// Alias of --tw-seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also export the samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Test whether the top population eigenvalue is subcritical.
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Also report the gap-ratio statistic with this many ratios.
        #[arg(long)]
        kappa: Option<usize>,
        #[arg(long)]
        nu: Option<f64>,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Estimate the number of supercritical eigenvalues.
    Khat {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Parametric bootstrap of leading-eigenvalue functionals.
    Bootstrap {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "B")]
        b: Option<usize>,
        #[arg(long)]
        stat: Option<Stat>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output stem: writes STEM.csv and STEM.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the simulation studies at desk scale.
    Simulate {
        #[arg(long)]
        scenario: ScenarioName,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Bootstrap tables: direct-simulation replicates.
        #[arg(long)]
        truth_reps: Option<usize>,
        /// Bootstrap tables: data sets bootstrapped.
        #[arg(long)]
        outer: Option<usize>,
        #[arg(long = "B")]
        b: Option<usize>,
    },
    /// Convert a prices CSV to log returns.
    Returns {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Missing-value handling: columns (default) or rows.
        #[arg(long)]
        missing: Option<String>,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Observations-by-variables CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Subtract column means before analysis.
    #[arg(long)]
    demean: bool,
    /// Missing-value handling: rows (default) or columns.
    #[arg(long)]
    missing: Option<String>,
    /// Use this population spectrum estimate (column lambda_tilde_q)
    /// instead of fitting one.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Stat {
    Lambda1,
    Gap,
    Top2,
    Bias,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioName {
    Spiked,
    Decaying,
    Table1,
    Figure1,
    BootstrapTables,
}

/// Flag, then config file, then default.
struct Resolver {
    file: KeyValueConfig,
}

impl Resolver {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.file.get(key)?.unwrap_or(default)),
        }
    }

    fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.file.get::<bool>(key)?.unwrap_or(false))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => KeyValueConfig::load(p)?,
        None => KeyValueConfig::default(),
    };
    let cfg = Resolver { file };
    if let Some(t) = cfg.pick_opt(cli.threads, "threads")? {
        if t == 0 {
            return Err(Error::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Input(format!("cannot size the thread pool: {e}")))?;
    }
    let cache_dir = cache_dir(&cfg, cli.cache_dir.clone())?;
    let tw_cfg = |reps: Option<usize>, seed: Option<u64>| -> Result<TwConfig> {
        let def = TwConfig::default();
        let method: String = cfg.pick(cli.tw.goe_method.clone(), "goe_method", def.method.tag().to_string())?;
        Ok(TwConfig {
            d: cfg.pick(cli.tw.d, "d", def.d)?,
            goe_n: cfg.pick(cli.tw.goe_n, "goe_n", def.goe_n)?,
            reps: cfg.pick(reps.or(cli.tw.tw_reps), "tw_reps", def.reps)?,
            seed: cfg.pick(seed.or(cli.tw.tw_seed), "tw_seed", def.seed)?,
            method: GoeMethod::from_str(&method)?,
        })
    };
    let load_table = |c: TwConfig| TWTable::build_or_load(&cache_dir, c);

    match cli.command {
        Command::TwTable { reps, seed, ref csv } => {
            let c = tw_cfg(reps, seed)?;
            let table = load_table(c)?;
            println!("table     {}", cache_dir.join(c.cache_file_name()).display());
            println!("d         {}", table.d());
            println!("reps      {}", table.reps());
            println!("mean_tw1  {:.4}", edgegap::stats::mean(table.sorted_first()));
            println!("gap_q95   {:.4}", table.gap_quantile(0.05)?);
            if let Some(path) = csv {
                table.write_csv(fs::File::create(path)?)?;
            }
        }
        Command::Test {
            ref input,
            epsilon,
            alpha,
            kappa,
            nu,
            ref json,
        } => {
            let data = load_input(&cfg, input)?;
            let estimator = estimator_for(input, data.p())?;
            let opts = TestOptions {
                epsilon: cfg.pick(epsilon, "epsilon", 0.2)?,
                alpha: cfg.pick(alpha, "alpha", 0.05)?,
                kappa: cfg.pick_opt(kappa, "kappa")?,
                nu: Some(cfg.pick(nu, "nu", 1.0 / 3.0)?),
                search: EpsilonSearch::default(),
                with_epsilon_hat: true,
            };
            let table = load_table(tw_cfg(None, None)?)?;
            let report = run_test(&data, &opts, &table, estimator.as_ref())?;
            print!("{}", report.to_text());
            if let Some(path) = json {
                write_atomic(path, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
            }
        }
        Command::Khat { ref input, nu, epsilon } => {
            let data = load_input(&cfg, input)?;
            let estimator = estimator_for(input, data.p())?;
            let nu = cfg.pick(nu, "nu", 1.0 / 3.0)?;
            let eps = cfg.pick(epsilon, "epsilon", 0.2)?;
            let report = spectrum(&data)?;
            let est = estimator.estimate(&report)?;
            let trunc = edgegap::estimators::truncate_spectrum(&est, edgegap::estimators::xi_hat(&report), eps)?;
            let sigma = edgegap::estimators::sigma_hat(&trunc, report.y_n)?;
            let k = k_hat(&report.cov_eigs, sigma, report.n, nu)?;
            println!("k_hat      {k}");
            println!("threshold  {:.6}", (report.n as f64).powf(nu));
            println!("sigma_hat  {sigma:.6}");
            for j in 0..(k + 2).min(report.cov_eigs.len() - 1) {
                let t = t_statistic(report.cov_eigs[j], report.cov_eigs[j + 1], sigma, report.n);
                println!("T_n,{:<4}   {t:.6}", j + 1);
            }
        }
        Command::Bootstrap {
            ref input,
            b,
            stat,
            epsilon,
            seed,
            ref out,
        } => {
            let data = load_input(&cfg, input)?;
            let estimator = estimator_for(input, data.p())?;
            let b = cfg.pick(b, "b", 500)?;
            let stat = match stat {
                Some(s) => s,
                None => match cfg.file.raw("stat") {
                    Some(s) => Stat::from_str(s, true).map_err(|e| Error::Input(format!("stat: {e}")))?,
                    None => Stat::Lambda1,
                },
            };
            let eps = cfg.pick(epsilon, "epsilon", 0.2)?;
            let seed = cfg.pick(seed, "seed", 1)?;
            let phi = match stat {
                Stat::Lambda1 | Stat::Bias => Functional::lambda1(),
                Stat::Gap => Functional::gap(),
                Stat::Top2 => Functional::top2(),
            };
            let trunc = bootstrap_world(&data, eps, estimator.as_ref())?;
            let run = run_bootstrap(&trunc, data.n(), b, &phi, seed)?;
            let summary = run.summary(&[0.05, 0.5, 0.95])?;
            for (j, c) in summary.columns.iter().enumerate() {
                println!("{c:<10} mean {:.6} sd {:.6}", summary.mean[j], summary.sd[j]);
            }
            match stat {
                Stat::Bias => {
                    let bias = bias_from_run(&run)?;
                    println!("bias       {:.6}", bias.bias);
                    println!("lambda1~   {:.6}", bias.lambda1_tilde);
                }
                Stat::Top2 => {
                    let s = normalized_samples(&run)?;
                    println!(
                        "L* mean    {:.6} sd {:.6}",
                        edgegap::stats::mean(&s.l),
                        edgegap::stats::sd(&s.l)
                    );
                    println!(
                        "G* mean    {:.6} sd {:.6}",
                        edgegap::stats::mean(&s.g),
                        edgegap::stats::sd(&s.g)
                    );
                }
                _ => {}
            }
            if let Some(stem) = out {
                run.write_files(stem, &[0.05, 0.5, 0.95])?;
            }
        }
        Command::Simulate {
            scenario,
            reps,
            seed,
            ref out,
            truth_reps,
            outer,
            b,
        } => {
            fs::create_dir_all(out)?;
            let seed = cfg.pick(seed, "seed", 1)?;
            let est = QuestOptions::default();
            match scenario {
                ScenarioName::Table1 => {
                    let reps = cfg.pick(reps, "reps", 800)?;
                    let table = load_table(tw_cfg(None, None)?)?;
                    let rows = table_runner(&table1_entries(reps, seed), &table, &est)?;
                    write_table_csv(&rows, fs::File::create(out.join("table1.csv"))?)?;
                }
                ScenarioName::Spiked | ScenarioName::Decaying | ScenarioName::Figure1 => {
                    let reps = cfg.pick(reps, "reps", 200)?;
                    let table = load_table(tw_cfg(None, None)?)?;
                    let panels = figure1_panels(reps, seed);
                    let chosen: Vec<_> = match scenario {
                        ScenarioName::Spiked => panels.into_iter().take(1).collect(),
                        ScenarioName::Decaying => panels.into_iter().skip(2).collect(),
                        _ => panels,
                    };
                    for s in chosen {
                        let curve = power_curve(&s, &figure1_grid(), &table, &est)?;
                        write_curve(out, &curve)?;
                    }
                }
                ScenarioName::BootstrapTables => {
                    let def = BootstrapEvalSettings::default();
                    let settings = BootstrapEvalSettings {
                        truth_reps: cfg.pick(truth_reps.or(reps), "truth_reps", def.truth_reps)?,
                        outer: cfg.pick(outer, "outer", def.outer)?,
                        b: cfg.pick(b, "b", def.b)?,
                    };
                    let mut rows = Vec::new();
                    for s in bootstrap_table_scenarios(seed) {
                        rows.extend(bootstrap_eval(&s, &settings, &est)?);
                    }
                    write_bootstrap_csv(&rows, fs::File::create(out.join("bootstrap_tables.csv"))?)?;
                    let bias = bias_table_scenarios(seed)
                        .iter()
                        .map(|s| bias_eval(s, &settings, &est))
                        .collect::<Result<Vec<_>>>()?;
                    write_bias_csv(&bias, fs::File::create(out.join("bias_table.csv"))?)?;
                }
            }
        }
        Command::Returns {
            ref prices,
            stride,
            ref out,
            ref missing,
        } => {
            let stride = cfg.pick(stride, "stride", 1)?;
            let policy: MissingPolicy = cfg.pick(missing.clone(), "missing", "columns".into())?.parse()?;
            let (cols, r) = returns_from_csv(prices, stride, policy)?;
            let mut buf = Vec::new();
            write_matrix_csv(&cols, &r, &mut buf)?;
            write_atomic(out, &buf)?;
            println!("wrote {} return rows for {} columns", r.nrows(), r.ncols());
        }
    }
    Ok(())
}

fn cache_dir(cfg: &Resolver, flag: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p);
    }
    if let Ok(p) = std::env::var(CACHE_ENV) {
        if !p.is_empty() {
            return Ok(PathBuf::from(p));
        }
    }
    if let Some(p) = cfg.file.raw("cache_dir") {
        return Ok(PathBuf::from(p));
    }
    let base = std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| Path::new(&h).join(".cache")))
        .ok_or_else(|| Error::Cache(format!("no cache directory: set --cache-dir or {CACHE_ENV}")))?;
    Ok(base.join("edgegap"))
}

fn load_input(cfg: &Resolver, input: &InputArgs) -> Result<DataMatrix> {
    if !input.input.is_file() {
        return Err(Error::Input(format!(
            "input file {} does not exist",
            input.input.display()
        )));
    }
    let policy: MissingPolicy = cfg.pick(input.missing.clone(), "missing", "rows".into())?.parse()?;
    let (data, clean) = ingest_csv(&input.input, policy)?;
    if clean.dropped > 0 {
        eprintln!("warning: dropped {} incomplete entries", clean.dropped);
    }
    Ok(if cfg.flag(input.demean, "demean")? {
        data.demeaned()
    } else {
        data
    })
}

fn estimator_for(input: &InputArgs, p: usize) -> Result<Box<dyn SpectrumEstimator>> {
    Ok(match &input.spectrum {
        Some(path) => {
            let ext = ExternalSpectrum::from_csv(path)?;
            if ext.values.len() != p {
                return Err(Error::Dimension(format!(
                    "spectrum file has {} values for p = {p}",
                    ext.values.len()
                )));
            }
            Box::new(ext)
        }
        None => Box::new(QuestOptions::default()),
    })
}

fn write_curve(dir: &Path, curve: &PowerCurve) -> Result<()> {
    let stem = dir.join(format!("curve_{}", curve.base.label));
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    write_atomic(&stem.with_extension("csv"), &buf)?;
    write_atomic(&stem.with_extension("svg"), curve.to_svg().as_bytes())?;
    Ok(())
}
