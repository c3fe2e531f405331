use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use argraph::armodel::{random_latent_inverse, random_sparse_inverse, simulate, GroundTruth};
use argraph::baseline::{
    default_latent_grid, default_sparse_grid, run_grid, write_score_table, FixedOptions, GridSpec,
};
use argraph::ebayes::{run_latent_eb, run_sparse_eb, EBConfig, EstimateResult};
use argraph::evalx::{evaluate, Thresholds};
use argraph::montecarlo::{run_montecarlo, write_outputs, ExperimentConfig};
use argraph::tsdata::{covariance_lags, load_timeseries, CsvOptions};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "argraph", version, about = "Sparse and latent-variable AR graphical model estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sparse,
    Latent,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random ground-truth model and write it as JSON.
    GenModel {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        /// Rank of the low-rank part; 0 draws a purely sparse model.
        #[arg(long, default_value_t = 0)]
        rank: usize,
        #[arg(long, default_value_t = 0.1)]
        margin: f64,
        #[arg(long)]
        seed: u64,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a sample path from a model file and write it as CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the reweighted estimator on a time series CSV.
    Estimate {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        order: usize,
        /// Subtract the sample mean before computing covariance lags.
        #[arg(long)]
        demean: bool,
        /// Outer-loop configuration JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write the per-iteration trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment and write trials.csv, summary.json and traces.jsonl.
    Montecarlo {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(argraph::montecarlo::PRESETS))]
        preset: Option<String>,
        /// Experiment configuration JSON; applied on top of the preset when both are given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score an estimate against a ground-truth model.
    Metrics {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        coherence: f64,
        #[arg(long, default_value_t = 0.1)]
        singular: f64,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fixed-weight grid estimator ranked by BIC.
    Baseline {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        order: usize,
        /// Subtract the sample mean before computing covariance lags.
        #[arg(long)]
        demean: bool,
        /// Grid points (sparse mode).
        #[arg(long, default_value_t = 9)]
        points: usize,
        /// Points per axis (latent mode).
        #[arg(long, default_value_t = 4)]
        side: usize,
        /// Ground truth used to fill the error column of the score table.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run the derived-oracle self checks.
    Selftest,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn sample_lags(input: &Path, order: usize, demean: bool) -> anyhow::Result<(argraph::MatrixPoly, f64)> {
    let mut y =
        load_timeseries(input, CsvOptions::default()).with_context(|| format!("loading {}", input.display()))?;
    if demean {
        y = y.demeaned();
    }
    let rhat = covariance_lags(&y, order)?;
    Ok((rhat, (y.len() - order) as f64))
}

fn run(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::GenModel { m, n, density, rank, margin, seed, out } => {
            let g = if rank == 0 {
                random_sparse_inverse(m, n, density, margin, seed)?
            } else {
                random_latent_inverse(m, n, density, rank, margin, seed)?
            };
            write_json(&g, out.as_deref())?;
        }
        Command::Simulate { model, samples, seed, burnin, out } => {
            let g: GroundTruth = read_json(&model)?;
            let y = simulate(&g.ar, samples, seed, burnin)?;
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = std::io::BufWriter::new(file);
            y.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Estimate { mode, input, order, demean, config, out, trace } => {
            let cfg: EBConfig = match config {
                Some(p) => read_json(&p)?,
                None => EBConfig::default(),
            };
            let (rhat, nn) = sample_lags(&input, order, demean)?;
            let (est, tr) = match mode {
                Mode::Sparse => run_sparse_eb(&rhat, nn, &cfg)?,
                Mode::Latent => run_latent_eb(&rhat, nn, &cfg)?,
            };
            log::info!("stopped after {} iterations: {:?}", est.iterations, est.stop_reason);
            write_json(&est, Some(&out))?;
            if let Some(p) = trace {
                let f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                tr.write_jsonl(std::io::BufWriter::new(f))?;
            }
        }
        Command::Montecarlo { preset, config, trials, seed, workers, out_dir } => {
            let mut cfg = match &preset {
                Some(p) => ExperimentConfig::preset(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(p) = config {
                let base = serde_json::to_value(&cfg)?;
                let overlay: serde_json::Value = read_json(&p)?;
                cfg = serde_json::from_value(merge(base, overlay))?;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            if out_dir.is_some() {
                cfg.output_dir = out_dir;
            }
            let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let out = run_montecarlo(&cfg)?;
            write_outputs(&out, &dir)?;
            for s in &out.summary.estimators {
                let med = |b: Option<argraph::montecarlo::BoxStats>| {
                    b.map_or("-".to_string(), |b| format!("{:.4}", b.median))
                };
                println!(
                    "{:<6} completed {:>4}  failed {:>3}  median e {}  median e_SP {}  mean C {}",
                    s.estimator,
                    s.completed,
                    s.failures,
                    med(s.e),
                    med(s.e_sp),
                    s.mean_c.map_or("-".to_string(), |c| format!("{c:.4}")),
                );
            }
            if let Some(c) = out.summary.true_mean_c {
                println!("true mean C {c:.4}");
            }
        }
        Command::Metrics { estimate, model, coherence, singular, out } => {
            let est: EstimateResult = read_json(&estimate)?;
            let g: GroundTruth = read_json(&model)?;
            if est.sigma.m() != g.m() || est.sigma.n() != g.n() {
                bail!(
                    "estimate has (m, n) = ({}, {}) but the model has ({}, {})",
                    est.sigma.m(),
                    est.sigma.n(),
                    g.m(),
                    g.n()
                );
            }
            let th = Thresholds { coherence, singular, ..Thresholds::default() };
            write_json(&evaluate(&est, &g, &th)?, out.as_deref())?;
        }
        Command::Baseline { mode, input, order, demean, points, side, model, out, table } => {
            let (rhat, nn) = sample_lags(&input, order, demean)?;
            let truth: Option<GroundTruth> = model.as_deref().map(read_json).transpose()?;
            let opts = FixedOptions::default();
            let spec: GridSpec = match mode {
                Mode::Sparse => default_sparse_grid(&rhat, nn, points, &opts)?,
                Mode::Latent => default_latent_grid(&rhat, nn, side, &opts)?,
            };
            let res = run_grid(&rhat, nn, &spec, &opts, truth.as_ref())?;
            write_json(&res.estimate, Some(&out))?;
            if let Some(p) = table {
                let f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                write_score_table(&res.table, f)?;
            }
        }
        Command::Selftest => {
            let checks = argraph::oracles::selftest();
            let mut failed = 0;
            for c in &checks {
                println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", checks.len());
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Recursive object merge: fields present in `overlay` replace those in `base`.
fn merge(base: serde_json::Value, overlay: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match (base, overlay) {
        (Value::Object(mut b), Value::Object(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, o) => o,
    }
}
