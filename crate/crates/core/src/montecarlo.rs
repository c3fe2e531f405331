//! Monte Carlo experiment driver: generate a model per trial, simulate data,
//! run the requested estimators and score them against the truth.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::armodel::{random_latent_inverse, random_sparse_inverse, simulate, GroundTruth};
use crate::baseline::{default_latent_grid, gamma_max, log_grid, run_grid, FixedOptions, GridSpec, SPARSE_GRID_SPAN};
use crate::ebayes::{run_latent_eb, run_sparse_eb, EBConfig, EBTrace, EstimateResult};
use crate::evalx::{evaluate, true_complexity, Thresholds};
use crate::tsdata::covariance_lags;
use crate::{Error, Result};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "ARGRAPH_WORKERS";
/// Bumped whenever the per-trial CSV columns change.
pub const TRIALS_CSV_VERSION: u32 = 1;
pub const TRIALS_HEADER: [&str; 13] = [
    "trial",
    "estimator",
    "status",
    "e",
    "e_sp",
    "e_sl",
    "c",
    "true_c",
    "rank_hat",
    "iterations",
    "gap",
    "wall_time_s",
    "reason",
];
pub const PRESETS: [&str; 6] =
    ["paper-sparse-n1", "paper-sparse-n2", "paper-latent-r2", "paper-latent-r5", "desk-sparse", "desk-latent"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sparse,
    Latent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// Empirical Bayes reweighting.
    #[serde(rename = "RW")]
    Rw,
    /// Sparse grid of 9 uniform weights ranked by BIC.
    #[serde(rename = "TD9")]
    Td9,
    /// Sparse grid of 17 uniform weights ranked by BIC.
    #[serde(rename = "TD17")]
    Td17,
    /// Latent grid of `(γ_S, γ_L)` pairs ranked by BIC.
    #[serde(rename = "fixed")]
    Fixed,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Rw => "RW",
            Estimator::Td9 => "TD9",
            Estimator::Td17 => "TD17",
            Estimator::Fixed => "fixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Estimator::Rw, Estimator::Td9, Estimator::Td17, Estimator::Fixed]
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub trials: usize,
    pub density: f64,
    pub r: usize,
    /// Lower bound on the smallest eigenvalue of the generated `Σ − Λ` on the unit circle.
    pub margin: f64,
    pub estimators: Vec<Estimator>,
    pub eb: EBConfig,
    pub thresholds: Thresholds,
    /// Points per axis of the latent baseline grid.
    pub latent_grid_side: usize,
    pub fixed: FixedOptions,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Sparse,
            m: 10,
            n: 1,
            big_n: 500,
            trials: 20,
            density: 0.1,
            r: 0,
            margin: 0.1,
            estimators: vec![Estimator::Rw, Estimator::Td9, Estimator::Td17],
            eb: EBConfig::default(),
            thresholds: Thresholds::default(),
            latent_grid_side: 4,
            fixed: FixedOptions::default(),
            seed: 2024,
            output_dir: None,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let sparse = Self::default();
        let latent = Self {
            mode: Mode::Latent,
            n: 2,
            big_n: 1000,
            r: 2,
            estimators: vec![Estimator::Rw, Estimator::Fixed],
            ..Self::default()
        };
        let cfg = match name {
            "paper-sparse-n1" => Self { m: 30, trials: 200, ..sparse },
            "paper-sparse-n2" => Self { m: 30, n: 2, trials: 200, ..sparse },
            "paper-latent-r2" => Self { m: 30, trials: 200, ..latent },
            "paper-latent-r5" => Self { m: 30, r: 5, trials: 200, ..latent },
            "desk-sparse" => sparse,
            "desk-latent" => Self { trials: 10, ..latent },
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown preset {name:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.m == 0 || self.big_n <= self.n + 1 {
            return Err(Error::InvalidArgument(format!(
                "need m ≥ 1 and N > n + 1, got m = {}, n = {}, N = {}",
                self.m, self.n, self.big_n
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators requested".into()));
        }
        for e in &self.estimators {
            let ok = match self.mode {
                Mode::Sparse => *e != Estimator::Fixed,
                Mode::Latent => matches!(e, Estimator::Rw | Estimator::Fixed),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "estimator {} is not available in {:?} mode",
                    e.name(),
                    self.mode
                )));
            }
        }
        if self.mode == Mode::Latent && (self.r == 0 || self.r > self.m) {
            return Err(Error::InvalidArgument(format!("latent rank must be in 1..=m, got {}", self.r)));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be positive".into()));
        }
        self.eb.validate()
    }

    /// Worker count: the environment variable wins over the config field.
    pub fn resolved_workers(&self) -> Option<usize> {
        std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&w| w > 0).or(self.workers)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream addressed by `path` under `master`. Depends only on
/// its arguments, so trials can run in any order.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// One CSV row: a single estimator on a single trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub estimator: String,
    pub ok: bool,
    pub e: Option<f64>,
    pub e_sp: Option<f64>,
    pub e_sl: Option<f64>,
    pub c: Option<f64>,
    pub true_c: Option<f64>,
    pub rank_hat: Option<usize>,
    pub iterations: Option<usize>,
    pub gap: Option<f64>,
    pub wall_time_s: f64,
    pub reason: String,
}

impl TrialRow {
    fn failed(trial: usize, estimator: Estimator, true_c: Option<f64>, wall: f64, err: &Error) -> Self {
        Self {
            trial,
            estimator: estimator.name().into(),
            ok: false,
            e: None,
            e_sp: None,
            e_sl: None,
            c: None,
            true_c,
            rank_hat: None,
            iterations: None,
            gap: None,
            wall_time_s: wall,
            reason: describe(err),
        }
    }

    fn record(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let u = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        vec![
            self.trial.to_string(),
            self.estimator.clone(),
            if self.ok { "ok" } else { "failed" }.into(),
            f(self.e),
            f(self.e_sp),
            f(self.e_sl),
            f(self.c),
            f(self.true_c),
            u(self.rank_hat),
            u(self.iterations),
            f(self.gap),
            format!("{:.6}", self.wall_time_s),
            self.reason.clone(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("malformed trials row: {msg}"));
        if rec.len() != TRIALS_HEADER.len() {
            return Err(bad(format!("{} fields", rec.len())));
        }
        let f = |i: usize| -> Result<Option<f64>> {
            let s = &rec[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(format!("{s:?} is not a number")))
            }
        };
        let u = |i: usize| -> Result<Option<usize>> {
            let s = &rec[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(format!("{s:?} is not an integer")))
            }
        };
        Ok(Self {
            trial: u(0)?.ok_or_else(|| bad("missing trial".into()))?,
            estimator: rec[1].to_string(),
            ok: &rec[2] == "ok",
            e: f(3)?,
            e_sp: f(4)?,
            e_sl: f(5)?,
            c: f(6)?,
            true_c: f(7)?,
            rank_hat: u(8)?,
            iterations: u(9)?,
            gap: f(10)?,
            wall_time_s: f(11)?.unwrap_or(0.0),
            reason: rec[12].to_string(),
        })
    }
}

/// Writes rows (in the given order) under the fixed header.
pub fn write_trials_csv<W: Write>(rows: &[TrialRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIALS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.record()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: std::io::Read>(input: R) -> Result<Vec<TrialRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRIALS_HEADER.iter().copied()) {
        return Err(Error::InvalidArgument("unexpected trials CSV header".into()));
    }
    rd.records().map(|r| r.map_err(csv_err).and_then(|rec| TrialRow::from_record(&rec))).collect()
}

/// The error and its causes on one line.
fn describe(err: &Error) -> String {
    let mut text = err.to_string();
    let mut cur: Option<&dyn std::error::Error> = std::error::Error::source(err);
    while let Some(e) = cur {
        text.push_str(": ");
        text.push_str(&e.to_string());
        cur = e.source();
    }
    text
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Boxplot statistics with whiskers at the most extreme points within
/// 1.5 IQR of the quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    /// `None` for an empty sample; non-finite values are dropped.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        Some(Self {
            count: v.len(),
            median: quantile(&v, 0.5),
            q1,
            q3,
            whisker_low: *v.iter().find(|&&x| x >= lo_fence).expect("q1 lies within its fence"),
            whisker_high: *v.iter().rev().find(|&&x| x <= hi_fence).expect("q3 lies within its fence"),
            min: v[0],
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub completed: usize,
    pub failures: usize,
    pub e: Option<BoxStats>,
    pub e_sp: Option<BoxStats>,
    pub e_sl: Option<BoxStats>,
    pub rank_hat: Option<BoxStats>,
    pub mean_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub csv_version: u32,
    pub config: Option<ExperimentConfig>,
    pub trials: usize,
    pub failures: usize,
    /// Mean complexity of the generating models.
    pub true_mean_c: Option<f64>,
    pub estimators: Vec<EstimatorSummary>,
}

impl Summary {
    pub fn estimator(&self, name: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == name)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Summary statistics from trial rows alone.
pub fn summarize(rows: &[TrialRow], config: Option<&ExperimentConfig>) -> Summary {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.estimator) {
            names.push(r.estimator.clone());
        }
    }
    let mut trial_c: Vec<(usize, f64)> = rows.iter().filter_map(|r| r.true_c.map(|c| (r.trial, c))).collect();
    trial_c.sort_by_key(|&(t, _)| t);
    trial_c.dedup_by_key(|&mut (t, _)| t);
    let true_cs: Vec<f64> = trial_c.into_iter().map(|(_, c)| c).collect();
    let mut trial_ids: Vec<usize> = rows.iter().map(|r| r.trial).collect();
    trial_ids.sort_unstable();
    trial_ids.dedup();

    let estimators = names
        .into_iter()
        .map(|name| {
            let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.estimator == name).collect();
            let ok: Vec<&TrialRow> = mine.iter().copied().filter(|r| r.ok).collect();
            let col = |f: &dyn Fn(&TrialRow) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let cs = col(&|r| r.c);
            EstimatorSummary {
                completed: ok.len(),
                failures: mine.len() - ok.len(),
                e: BoxStats::from_values(&col(&|r| r.e)),
                e_sp: BoxStats::from_values(&col(&|r| r.e_sp)),
                e_sl: BoxStats::from_values(&col(&|r| r.e_sl)),
                rank_hat: BoxStats::from_values(&col(&|r| r.rank_hat.map(|k| k as f64))),
                mean_c: mean(&cs),
                estimator: name,
            }
        })
        .collect();
    Summary {
        version: env!("CARGO_PKG_VERSION").into(),
        csv_version: TRIALS_CSV_VERSION,
        config: config.cloned(),
        trials: trial_ids.len(),
        failures: rows.iter().filter(|r| !r.ok).count(),
        true_mean_c: mean(&true_cs),
        estimators,
    }
}

/// EB trace of one RW run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial: usize,
    pub trace: EBTrace,
}

#[derive(Debug, Clone)]
pub struct MonteCarloOutput {
    /// Rows in (trial, estimator) order.
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
    pub traces: Vec<TrialTrace>,
}

/// Model for trial `t`.
pub fn trial_model(cfg: &ExperimentConfig, trial: usize) -> Result<GroundTruth> {
    let seed = derive_seed(cfg.seed, &[trial as u64, 0]);
    match cfg.mode {
        Mode::Sparse => random_sparse_inverse(cfg.m, cfg.n, cfg.density, cfg.margin, seed),
        Mode::Latent => random_latent_inverse(cfg.m, cfg.n, cfg.density, cfg.r, cfg.margin, seed),
    }
}

struct TrialOutput {
    rows: Vec<TrialRow>,
    trace: Option<EBTrace>,
}

fn run_estimator(
    cfg: &ExperimentConfig,
    est: Estimator,
    rhat: &crate::polyalg::MatrixPoly,
    nn: f64,
    gmax: &mut Option<f64>,
) -> Result<(EstimateResult, usize, Option<EBTrace>)> {
    let sparse_grid = |points: usize, gmax: &mut Option<f64>| -> Result<GridSpec> {
        let g = match *gmax {
            Some(g) => g,
            None => {
                let g = gamma_max(rhat, nn, &cfg.thresholds, &cfg.fixed.sparse)?;
                *gmax = Some(g);
                g
            }
        };
        Ok(GridSpec { thresholds: cfg.thresholds, ..GridSpec::sparse(log_grid(g * SPARSE_GRID_SPAN, g, points)) })
    };
    let spec = match est {
        Estimator::Rw => {
            let (res, trace) = match cfg.mode {
                Mode::Sparse => run_sparse_eb(rhat, nn, &cfg.eb)?,
                Mode::Latent => run_latent_eb(rhat, nn, &cfg.eb)?,
            };
            let it = res.iterations;
            return Ok((res, it, Some(trace)));
        }
        Estimator::Td9 => sparse_grid(9, gmax)?,
        Estimator::Td17 => sparse_grid(17, gmax)?,
        Estimator::Fixed => {
            GridSpec { thresholds: cfg.thresholds, ..default_latent_grid(rhat, nn, cfg.latent_grid_side, &cfg.fixed)? }
        }
    };
    let out = run_grid(rhat, nn, &spec, &cfg.fixed, None)?;
    Ok((out.estimate, spec.len(), None))
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> TrialOutput {
    let t0 = Instant::now();
    let setup = trial_model(cfg, trial).and_then(|g| {
        let y = simulate(&g.ar, cfg.big_n, derive_seed(cfg.seed, &[trial as u64, 1]), None)?;
        let rhat = covariance_lags(&y, cfg.n)?;
        Ok((g, rhat))
    });
    let (truth, rhat) = match setup {
        Ok(v) => v,
        Err(err) => {
            let wall = t0.elapsed().as_secs_f64();
            log::warn!("trial {trial}: setup failed: {err}");
            let rows = cfg.estimators.iter().map(|&e| TrialRow::failed(trial, e, None, wall, &err)).collect();
            return TrialOutput { rows, trace: None };
        }
    };
    let true_c = Some(true_complexity(&truth));
    let nn = (cfg.big_n - cfg.n) as f64;
    let mut gmax = None;
    let mut trace = None;
    let mut rows = Vec::with_capacity(cfg.estimators.len());
    for &est in &cfg.estimators {
        let t = Instant::now();
        let outcome = run_estimator(cfg, est, &rhat, nn, &mut gmax)
            .and_then(|(res, iters, tr)| Ok((evaluate(&res, &truth, &cfg.thresholds)?, res.gap, iters, tr)));
        let wall = t.elapsed().as_secs_f64();
        match outcome {
            Ok((rep, gap, iterations, tr)) => {
                if tr.is_some() {
                    trace = tr;
                }
                rows.push(TrialRow {
                    trial,
                    estimator: est.name().into(),
                    ok: true,
                    e: Some(rep.e),
                    e_sp: Some(rep.e_sp),
                    e_sl: rep.e_sl,
                    c: Some(rep.c),
                    true_c,
                    rank_hat: Some(rep.rank_hat),
                    iterations: Some(iterations),
                    gap: Some(gap),
                    wall_time_s: wall,
                    reason: String::new(),
                });
            }
            Err(err) => {
                log::warn!("trial {trial}: {} failed: {err}", est.name());
                rows.push(TrialRow::failed(trial, est, true_c, wall, &err));
            }
        }
    }
    log::info!("trial {trial} done in {:.2}s", t0.elapsed().as_secs_f64());
    TrialOutput { rows, trace }
}

/// Runs every trial (concurrently, up to the resolved worker count) and
/// summarizes. Results do not depend on the worker count.
pub fn run_montecarlo(cfg: &ExperimentConfig) -> Result<MonteCarloOutput> {
    use rayon::prelude::*;
    cfg.validate()?;
    let work = || -> Vec<TrialOutput> { (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect() };
    let outputs = match cfg.resolved_workers() {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {w} workers: {e}")))?
            .install(work),
        None => work(),
    };
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (trial, out) in outputs.into_iter().enumerate() {
        rows.extend(out.rows);
        if let Some(trace) = out.trace {
            traces.push(TrialTrace { trial, trace });
        }
    }
    let summary = summarize(&rows, Some(cfg));
    Ok(MonteCarloOutput { rows, summary, traces })
}

/// Writes `trials.csv`, `summary.json` and `traces.jsonl` into `dir`.
pub fn write_outputs(out: &MonteCarloOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trials_csv(&out.rows, fs::File::create(dir.join("trials.csv"))?)?;
    let mut f = fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &out.summary)?;
    writeln!(f)?;
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("traces.jsonl"))?);
    for t in &out.traces {
        serde_json::to_writer(&mut f, t)?;
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_documented_constants() {
        for name in PRESETS {
            ExperimentConfig::preset(name).unwrap().validate().unwrap();
        }
        let p = ExperimentConfig::preset("paper-sparse-n2").unwrap();
        assert_eq!((p.m, p.n, p.big_n, p.trials, p.density), (30, 2, 500, 200, 0.1));
        assert_eq!(p.eb.eps_s, 1e-3);
        assert_eq!((p.eb.eps_stop, p.eb.l_max), (1e-4, 50));
        assert_eq!((p.thresholds.coherence, p.thresholds.singular), (0.1, 0.1));
        let p = ExperimentConfig::preset("paper-latent-r5").unwrap();
        assert_eq!((p.m, p.n, p.big_n, p.r, p.eb.alpha, p.eb.eps_l), (30, 2, 1000, 5, 0.1, 1e-3));
        let d = ExperimentConfig::preset("desk-sparse").unwrap();
        assert_eq!((d.m, d.n, d.big_n, d.trials), (10, 1, 500, 20));
        let d = ExperimentConfig::preset("desk-latent").unwrap();
        assert_eq!((d.m, d.r, d.big_n, d.trials), (10, 2, 1000, 10));
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let ok = ExperimentConfig::default();
        assert!(ExperimentConfig { trials: 0, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { estimators: vec![Estimator::Fixed], ..ok.clone() }.validate().is_err());
        let lat = ExperimentConfig::preset("desk-latent").unwrap();
        assert!(ExperimentConfig { estimators: vec![Estimator::Td9], ..lat.clone() }.validate().is_err());
        assert!(ExperimentConfig { r: 0, ..lat }.validate().is_err());
    }

    #[test]
    fn config_json_defaults_fill_missing_fields() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"mode":"latent","N":800,"estimators":["RW","fixed"]}"#).unwrap();
        assert_eq!(cfg.mode, Mode::Latent);
        assert_eq!(cfg.big_n, 800);
        assert_eq!(cfg.m, 10);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for t in 0..2000u64 {
            for s in 0..2u64 {
                assert!(seen.insert(derive_seed(7, &[t, s])));
            }
        }
        assert_ne!(derive_seed(7, &[1, 0]), derive_seed(8, &[1, 0]));
        assert_eq!(derive_seed(7, &[3, 1]), derive_seed(7, &[3, 1]));
    }

    #[test]
    fn box_stats_by_hand() {
        let s = BoxStats::from_values(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((s.median, s.q1, s.q3), (3.0, 2.0, 4.0));
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 4.0));
        assert_eq!((s.min, s.max, s.count), (1.0, 100.0, 5));
        assert!(BoxStats::from_values(&[]).is_none());
        assert_eq!(BoxStats::from_values(&[2.5]).unwrap().median, 2.5);
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in [Estimator::Rw, Estimator::Td9, Estimator::Td17, Estimator::Fixed] {
            assert_eq!(Estimator::parse(e.name()), Some(e));
            let js = serde_json::to_string(&e).unwrap();
            assert_eq!(js, format!("\"{}\"", e.name()));
        }
    }

    #[test]
    fn single_trial_all_estimators_and_csv_round_trip() {
        let cfg = ExperimentConfig { m: 4, big_n: 300, trials: 1, workers: Some(1), ..Default::default() };
        let out = run_montecarlo(&cfg).unwrap();
        assert_eq!(out.rows.len(), 3);
        assert!(out.rows.iter().all(|r| r.ok), "{:?}", out.rows);
        assert_eq!(out.traces.len(), 1);
        let mut buf = Vec::new();
        write_trials_csv(&out.rows, &mut buf).unwrap();
        let back = read_trials_csv(buf.as_slice()).unwrap();
        let again = summarize(&back, Some(&cfg));
        assert_eq!(again, out.summary);
    }
}
