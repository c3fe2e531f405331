//! Reweighting outer loops driven by generalized maximum likelihood updates
//! of the prior hyperparameters.
//!
//! Each pass solves a weighted convex problem and re-estimates the weights
//! from the solution. The pass is a majorization-minimization step for a
//! log-sum (and, in the latent case, log-det) penalized likelihood, so that
//! objective never increases along the trace.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::latentdual::latent_primal_value;
use crate::latentdual::{solve_latent_dual_from, AdmmState, LatentOptions};
use crate::linalg::{inverse_pd, logdet_pd, symmetrize};
use crate::polyalg::{adjoint_d, group_maxnorm_unchecked, toeplitz, BlockSym, MatrixPoly};
use crate::sparsedual::{solve_sparse_dual_from, sparse_primal_value, unpenalized_optimum, SolverOptions, WeightSet};
use crate::{Error, Result};

/// Which weight update to apply after each solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `γ = (2n+1)/(q+ε)` off the diagonal, `(n+1)/(q+ε)` on it, and
    /// `Q = ((m+1)/2)(L_0 + ε I)⁻¹`.
    #[default]
    Gml,
    /// `γ = 1/(q+ε)` and `Q = (L_0 + ε I)⁻¹`.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EBConfig {
    pub eps_s: f64,
    pub eps_l: f64,
    pub eps_stop: f64,
    pub l_max: usize,
    pub alpha: f64,
    pub rule: WeightRule,
    /// Measure the step change relative to the previous iterate's norm.
    pub relative_change: bool,
    pub warm_start: bool,
    pub sparse: SolverOptions,
    pub latent: LatentOptions,
}

/// Inner sparse tolerance used by the outer loop. The descent safeguard
/// compares surrogate values scaled by `(N−n)/2`, so a loose inner solve
/// ends the loop early.
pub const INNER_TOL_PG: f64 = 1e-11;

impl Default for EBConfig {
    fn default() -> Self {
        Self {
            eps_s: 1e-3,
            eps_l: 1e-3,
            eps_stop: 1e-4,
            l_max: 50,
            alpha: 0.1,
            rule: WeightRule::Gml,
            relative_change: false,
            warm_start: true,
            sparse: SolverOptions { tol_pg: INNER_TOL_PG, ..SolverOptions::default() },
            latent: LatentOptions::default(),
        }
    }
}

impl EBConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_s > 0.0 && self.eps_l > 0.0) {
            return Err(Error::InvalidArgument("eps_S and eps_L must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.l_max == 0 {
            return Err(Error::InvalidArgument("l_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Symmetric weight table from the group max-norms of `S`.
pub fn update_gamma(s: &MatrixPoly, eps_s: f64) -> DMatrix<f64> {
    update_gamma_with(s, eps_s, WeightRule::Gml)
}

pub fn update_gamma_with(s: &MatrixPoly, eps_s: f64, rule: WeightRule) -> DMatrix<f64> {
    let (m, n) = (s.m(), s.n() as f64);
    let mut g = DMatrix::zeros(m, m);
    for j in 0..m {
        for h in 0..=j {
            let num = match rule {
                WeightRule::Gml if j == h => n + 1.0,
                WeightRule::Gml => 2.0 * n + 1.0,
                WeightRule::Plain => 1.0,
            };
            let v = num / (group_maxnorm_unchecked(s, j, h) + eps_s);
            g[(j, h)] = v;
            g[(h, j)] = v;
        }
    }
    g
}

/// `Q = ((m+1)/2)(L_0 + ε_L I)⁻¹`.
pub fn update_q(l0: &DMatrix<f64>, eps_l: f64) -> DMatrix<f64> {
    update_q_with(l0, eps_l, WeightRule::Gml)
}

pub fn update_q_with(l0: &DMatrix<f64>, eps_l: f64, rule: WeightRule) -> DMatrix<f64> {
    let m = l0.nrows();
    let shifted = symmetrize(l0) + DMatrix::identity(m, m) * eps_l;
    let inv = inverse_pd(&shifted).unwrap_or_else(|| {
        // L_0 slightly indefinite from round-off: clip before inverting
        let clipped = crate::latentdual::psd_project(&symmetrize(l0)) + DMatrix::identity(m, m) * eps_l;
        inverse_pd(&clipped).expect("clipped matrix is positive definite")
    });
    let factor = match rule {
        WeightRule::Gml => (m as f64 + 1.0) / 2.0,
        WeightRule::Plain => 1.0,
    };
    symmetrize(&(inv * factor))
}

/// Penalized negative log-likelihood majorized by each reweighted solve:
///
/// `Σ_{j>h} (2n+1) log(q_{jh} + ε_S) + Σ_j (n+1) log(q_{jj} + ε_S)
///  [+ ((m+1)/2) log|D_0(H) + ε_L I|] + ((N−n)/2)(−log|X₀₀| + ⟨T(R̂), X⟩)`
///
/// with `q` evaluated on `D(X + H)`.
pub fn mm_objective(x: &BlockSym, h: Option<&BlockSym>, rhat: &MatrixPoly, cfg: &EBConfig, nn: f64) -> Result<f64> {
    let (m, n) = (x.m(), x.n() as f64);
    let sigma = match h {
        Some(h) => adjoint_d(&(x + h)),
        None => adjoint_d(x),
    };
    let mut pen = 0.0;
    for j in 0..m {
        for hh in 0..=j {
            let coef = match cfg.rule {
                WeightRule::Gml if j == hh => n + 1.0,
                WeightRule::Gml => 2.0 * n + 1.0,
                WeightRule::Plain => 1.0,
            };
            pen += coef * (group_maxnorm_unchecked(&sigma, j, hh) + cfg.eps_s).ln();
        }
    }
    if let Some(h) = h {
        let l0 = adjoint_d(h).block(0).clone() + DMatrix::identity(m, m) * cfg.eps_l;
        let coef = match cfg.rule {
            WeightRule::Gml => (m as f64 + 1.0) / 2.0,
            WeightRule::Plain => 1.0,
        };
        let ld = logdet_pd(&symmetrize(&l0)).ok_or_else(|| Error::NotPositiveDefinite("D_0(H) + ε_L I".into()))?;
        pen += coef * ld;
    }
    Ok(pen + 0.5 * nn * likelihood(x, rhat)?)
}

/// Scaled negative log-likelihood `−log|X₀₀| + ⟨T(R̂), X⟩`.
pub fn likelihood(x: &BlockSym, rhat: &MatrixPoly) -> Result<f64> {
    let x00 = x.block(0, 0).into_owned();
    let ld = logdet_pd(&x00).ok_or_else(|| Error::NotPositiveDefinite("leading block of X".into()))?;
    Ok(-ld + toeplitz(rhat).dot(x))
}

/// One outer iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EBRecord {
    pub iteration: usize,
    #[serde(with = "crate::linalg::rows")]
    pub gammas: DMatrix<f64>,
    #[serde(rename = "Q", with = "crate::linalg::opt_rows")]
    pub q: Option<DMatrix<f64>>,
    pub mm_objective: f64,
    pub step_change: f64,
    pub dual_value: f64,
    pub primal_value: f64,
    pub gap: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EBTrace {
    /// MM objective at the initial point.
    pub initial_objective: f64,
    pub records: Vec<EBRecord>,
}

impl EBTrace {
    /// Writes one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective).chain(self.records.iter().map(|r| r.mm_objective)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Step change fell below `eps_stop`.
    Converged,
    MaxIterations,
    /// The inner solve did not decrease the surrogate; the previous iterate is kept.
    NoDescent,
}

/// Final estimate of an outer loop or a fixed-weight solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateResult {
    /// Coefficients of `Σ̂`.
    #[serde(rename = "S")]
    pub sigma: MatrixPoly,
    /// Coefficients of `Λ̂` (latent estimates only).
    #[serde(rename = "L")]
    pub lambda: Option<MatrixPoly>,
    /// Coefficients of `Φ̂⁻¹ = Σ̂ − Λ̂`.
    pub inverse_spectrum: MatrixPoly,
    #[serde(rename = "X")]
    pub x: BlockSym,
    #[serde(rename = "H")]
    pub h: Option<BlockSym>,
    #[serde(with = "crate::linalg::rows")]
    pub gammas: DMatrix<f64>,
    #[serde(rename = "Q", with = "crate::linalg::opt_rows")]
    pub q: Option<DMatrix<f64>>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub gap: f64,
    pub dual_value: f64,
    pub inner_converged: bool,
}

impl EstimateResult {
    pub(crate) fn from_parts(
        x: BlockSym,
        h: Option<BlockSym>,
        w: &WeightSet,
        iterations: usize,
        stop_reason: StopReason,
        (gap, dual_value, inner_converged): (f64, f64, bool),
    ) -> Self {
        let (sigma, lambda) = match &h {
            Some(h) => (adjoint_d(&(&x + h)), Some(adjoint_d(h))),
            None => (adjoint_d(&x), None),
        };
        Self {
            inverse_spectrum: adjoint_d(&x),
            sigma,
            lambda,
            x,
            h,
            gammas: w.gammas().clone(),
            q: w.q().cloned(),
            iterations,
            stop_reason,
            gap,
            dual_value,
            inner_converged,
        }
    }
}

fn change(new: &BlockSym, old: &BlockSym, relative: bool) -> f64 {
    let d = (new.matrix() - old.matrix()).norm();
    if relative {
        d / old.matrix().norm().max(f64::MIN_POSITIVE)
    } else {
        d
    }
}

fn outer_err(iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Outer { iteration, source: Box::new(e) }
}

/// Sparse reweighting loop started from the order-`n` Yule–Walker fit.
pub fn run_sparse_eb(rhat: &MatrixPoly, nn: f64, cfg: &EBConfig) -> Result<(EstimateResult, EBTrace)> {
    cfg.validate()?;
    let xb = unpenalized_optimum(rhat).map_err(|_| Error::NotPositiveDefinite("T(R̂)".into()))?;
    let mut w = WeightSet::new(update_gamma_with(&adjoint_d(&xb), cfg.eps_s, cfg.rule), None, nn)?;
    let mut x_prev = xb;
    let mut trace = EBTrace { initial_objective: mm_objective(&x_prev, None, rhat, cfg, nn)?, records: vec![] };
    let mut warm: Option<MatrixPoly> = None;
    let mut last = (f64::NAN, f64::NAN, false);
    let mut stop = StopReason::MaxIterations;
    let mut final_w = w.clone();

    for l in 1..=cfg.l_max {
        let sol = solve_sparse_dual_from(rhat, &w, &cfg.sparse, warm.as_ref()).map_err(outer_err(l))?;
        let surrogate_prev = sparse_primal_value(&x_prev, rhat, &w).map_err(outer_err(l))?;
        if sol.primal_value > surrogate_prev {
            log::debug!(
                "outer iteration {l}: surrogate {:.12e} above previous {:.12e}, stopping",
                sol.primal_value,
                surrogate_prev
            );
            stop = StopReason::NoDescent;
            break;
        }
        let step = change(&sol.x, &x_prev, cfg.relative_change);
        let objective = mm_objective(&sol.x, None, rhat, cfg, nn).map_err(outer_err(l))?;
        trace.records.push(EBRecord {
            iteration: l,
            gammas: w.gammas().clone(),
            q: None,
            mm_objective: objective,
            step_change: step,
            dual_value: sol.dual_value,
            primal_value: sol.primal_value,
            gap: sol.gap,
            inner_iterations: sol.iterations,
            inner_converged: sol.converged,
        });
        last = (sol.gap, sol.dual_value, sol.converged);
        final_w = w.clone();
        if cfg.warm_start {
            warm = Some(sol.z.clone());
        }
        x_prev = sol.x;
        if step < cfg.eps_stop {
            stop = StopReason::Converged;
            break;
        }
        w = WeightSet::new(update_gamma_with(&adjoint_d(&x_prev), cfg.eps_s, cfg.rule), None, nn)?;
    }
    let iterations = trace.records.len();
    Ok((EstimateResult::from_parts(x_prev, None, &final_w, iterations, stop, last), trace))
}

/// Latent reweighting loop started from `X = X_B`, `H = α X_B`, i.e.
/// `Ŝ = (1+α) D(X_B)` and `L̂_0 = α D_0(X_B)`.
pub fn run_latent_eb(rhat: &MatrixPoly, nn: f64, cfg: &EBConfig) -> Result<(EstimateResult, EBTrace)> {
    cfg.validate()?;
    let xb = unpenalized_optimum(rhat).map_err(|_| Error::NotPositiveDefinite("T(R̂)".into()))?;
    let weights_from = |x: &BlockSym, h: &BlockSym| -> Result<WeightSet> {
        let gam = update_gamma_with(&adjoint_d(&(x + h)), cfg.eps_s, cfg.rule);
        let q = update_q_with(adjoint_d(h).block(0), cfg.eps_l, cfg.rule);
        WeightSet::new(gam, Some(q), nn)
    };
    let mut h_prev = xb.scale(cfg.alpha);
    let mut x_prev = xb;
    let mut w = weights_from(&x_prev, &h_prev)?;
    let mut trace =
        EBTrace { initial_objective: mm_objective(&x_prev, Some(&h_prev), rhat, cfg, nn)?, records: vec![] };
    let mut warm: Option<AdmmState> = None;
    let mut last = (f64::NAN, f64::NAN, false);
    let mut stop = StopReason::MaxIterations;
    let mut final_w = w.clone();

    for l in 1..=cfg.l_max {
        let sol = solve_latent_dual_from(rhat, &w, &cfg.latent, warm.as_ref()).map_err(outer_err(l))?;
        let surrogate_prev = latent_primal_value(&x_prev, &h_prev, rhat, &w).map_err(outer_err(l))?;
        if sol.primal_value > surrogate_prev {
            log::debug!(
                "outer iteration {l}: surrogate {:.12e} above previous {:.12e}, stopping",
                sol.primal_value,
                surrogate_prev
            );
            stop = StopReason::NoDescent;
            break;
        }
        let step = change(&sol.x, &x_prev, cfg.relative_change) + change(&sol.h, &h_prev, cfg.relative_change);
        let objective = mm_objective(&sol.x, Some(&sol.h), rhat, cfg, nn).map_err(outer_err(l))?;
        trace.records.push(EBRecord {
            iteration: l,
            gammas: w.gammas().clone(),
            q: w.q().cloned(),
            mm_objective: objective,
            step_change: step,
            dual_value: sol.dual_value,
            primal_value: sol.primal_value,
            gap: sol.gap,
            inner_iterations: sol.admm_iterations,
            inner_converged: sol.converged,
        });
        last = (sol.gap, sol.dual_value, sol.converged);
        final_w = w.clone();
        if cfg.warm_start {
            warm = sol.state.clone();
        }
        x_prev = sol.x;
        h_prev = sol.h;
        if step < cfg.eps_stop {
            stop = StopReason::Converged;
            break;
        }
        w = weights_from(&x_prev, &h_prev)?;
    }
    let iterations = trace.records.len();
    Ok((EstimateResult::from_parts(x_prev, Some(h_prev), &final_w, iterations, stop, last), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armodel::{exact_lags, random_latent_inverse, random_sparse_inverse, simulate};
    use crate::oracles::golden_section;
    use crate::tsdata::covariance_lags;

    fn sample_rhat(m: usize, n: usize, big_n: usize, seed: u64) -> MatrixPoly {
        let g = random_sparse_inverse(m, n, 0.3, 0.1, seed).unwrap();
        covariance_lags(&simulate(&g.ar, big_n, seed + 1, None).unwrap(), n).unwrap()
    }

    #[test]
    fn gamma_update_examples() {
        // n = 1: S_0 = diag(0.999, 1), S_1 = 0
        let s = MatrixPoly::new(vec![DMatrix::from_diagonal(&nalgebra::dvector![0.999, 1.0]), DMatrix::zeros(2, 2)])
            .unwrap();
        let g = update_gamma(&s, 1e-3);
        assert!((g[(1, 0)] - 3000.0).abs() < 1e-9);
        assert!((g[(0, 0)] - 2.0).abs() < 1e-12);
        let p = update_gamma_with(&s, 1e-3, WeightRule::Plain);
        assert!((p[(1, 0)] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_update_minimizes_its_one_dimensional_objective() {
        let s = sample_rhat(3, 2, 300, 4);
        let g = update_gamma(&s, 1e-3);
        for j in 0..3 {
            for h in 0..=j {
                let k = if j == h { 3.0 } else { 5.0 };
                let q = group_maxnorm_unchecked(&s, j, h) + 1e-3;
                let best = golden_section(|x: f64| x * q - k * x.ln(), 1e-8, 1e6, 1e-14);
                assert!((best - g[(j, h)]).abs() <= 1e-6 * best);
            }
        }
    }

    #[test]
    fn q_update_examples() {
        let q = update_q(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, 1.0, 0.0]), 1e-3);
        let want = [2.0 / 1.001, 2.0 / 1.001, 2000.0];
        for i in 0..3 {
            assert!((q[(i, i)] - want[i]).abs() <= 1e-9 * want[i]);
        }
        assert!((q.clone() - DMatrix::from_diagonal(&q.diagonal())).norm() == 0.0);
        let z = update_q(&DMatrix::zeros(4, 4), 1e-2);
        assert!((z - DMatrix::identity(4, 4) * (5.0 / (2.0 * 1e-2))).norm() < 1e-9);
    }

    #[test]
    fn q_update_minimizes_over_diagonal_matrices() {
        let d = [0.7, 0.05, 0.0, 2.5];
        let q = update_q(&DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&d)), 1e-3);
        for (i, &di) in d.iter().enumerate() {
            let shifted = di + 1e-3;
            let best = golden_section(|x: f64| x * shifted - 2.5 * x.ln(), 1e-8, 1e6, 1e-14);
            assert!((best - q[(i, i)]).abs() <= 1e-6 * best);
        }
    }

    #[test]
    fn mm_objective_examples() {
        let x = BlockSym::new(1, 0, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let rhat = MatrixPoly::scalar(&[1.0]);
        let cfg = EBConfig { eps_s: 1.0, ..EBConfig::default() };
        let v = mm_objective(&x, None, &rhat, &cfg, 2.0).unwrap();
        assert!((v - (2f64.ln() + 1.0)).abs() < 1e-14);

        let rhat = sample_rhat(3, 1, 400, 2);
        let x = crate::sparsedual::unpenalized_optimum(&rhat).unwrap();
        let cfg = EBConfig::default();
        let sparse = mm_objective(&x, None, &rhat, &cfg, 399.0).unwrap();
        let zero = BlockSym::zeros(3, 1);
        let latent = mm_objective(&x, Some(&zero), &rhat, &cfg, 399.0).unwrap();
        assert!((latent - sparse - 2.0 * 3.0 * cfg.eps_l.ln()).abs() < 1e-10);
    }

    #[test]
    fn config_validation() {
        assert!(EBConfig::default().validate().is_ok());
        assert!(EBConfig { eps_s: 0.0, ..EBConfig::default() }.validate().is_err());
        assert!(EBConfig { alpha: 1.0, ..EBConfig::default() }.validate().is_err());
        assert!(EBConfig { l_max: 0, ..EBConfig::default() }.validate().is_err());
    }

    #[test]
    fn sparse_trace_is_monotone_bounded_and_deterministic() {
        let rhat = sample_rhat(5, 1, 500, 9);
        let cfg = EBConfig::default();
        let (res, trace) = run_sparse_eb(&rhat, 499.0, &cfg).unwrap();
        assert!(trace.records.len() <= cfg.l_max && res.iterations == trace.records.len());
        for w in trace.objectives().windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{} -> {}", w[0], w[1]);
        }
        let (again, trace2) = run_sparse_eb(&rhat, 499.0, &cfg).unwrap();
        assert_eq!(again.x, res.x);
        assert_eq!(trace2.objectives(), trace.objectives());

        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), trace.records.len());
    }

    #[test]
    fn sparse_fixed_point_is_stable() {
        let rhat = sample_rhat(4, 1, 600, 12);
        let cfg = EBConfig::default();
        let (res, _) = run_sparse_eb(&rhat, 599.0, &cfg).unwrap();
        assert_eq!(res.stop_reason, StopReason::Converged);
        let w = WeightSet::new(update_gamma(&adjoint_d(&res.x), cfg.eps_s), None, 599.0).unwrap();
        let next = crate::sparsedual::solve_sparse_dual(&rhat, &w, &cfg.sparse).unwrap();
        assert!((next.x.matrix() - res.x.matrix()).norm() < cfg.eps_stop);
    }

    #[test]
    fn warm_and_cold_starts_agree() {
        let rhat = sample_rhat(4, 1, 500, 21);
        let warm = run_sparse_eb(&rhat, 499.0, &EBConfig::default()).unwrap().0;
        let cold = run_sparse_eb(&rhat, 499.0, &EBConfig { warm_start: false, ..EBConfig::default() }).unwrap().0;
        assert!((warm.x.matrix() - cold.x.matrix()).norm() <= 1e-5 * (1.0 + cold.x.matrix().norm()));
    }

    #[test]
    fn plain_rule_runs() {
        let rhat = sample_rhat(3, 1, 400, 5);
        let cfg = EBConfig { rule: WeightRule::Plain, l_max: 5, ..EBConfig::default() };
        let (res, trace) = run_sparse_eb(&rhat, 399.0, &cfg).unwrap();
        assert!(res.iterations <= 5 && !trace.records.is_empty());
    }

    #[test]
    fn latent_trace_is_monotone_and_outputs_are_consistent() {
        let g = random_latent_inverse(4, 1, 0.3, 1, 0.1, 3).unwrap();
        let rhat = MatrixPoly::new(exact_lags(&g, 1).unwrap()).unwrap();
        let cfg = EBConfig { l_max: 8, ..EBConfig::default() };
        let (res, trace) = run_latent_eb(&rhat, 999.0, &cfg).unwrap();
        assert!(trace.records.len() <= 8);
        for w in trace.objectives().windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{} -> {}", w[0], w[1]);
        }
        let lambda = res.lambda.as_ref().unwrap();
        let diff = res.sigma.axpy(-1.0, lambda).axpy(-1.0, &res.inverse_spectrum);
        assert!(diff.norm() < 1e-12);
        assert!(res.q.is_some());
    }

    #[test]
    fn failures_carry_the_outer_iteration() {
        let rhat = sample_rhat(3, 1, 400, 5);
        let cfg = EBConfig { sparse: SolverOptions { max_iter: 0, ..SolverOptions::default() }, ..EBConfig::default() };
        match run_sparse_eb(&rhat, 399.0, &cfg) {
            Err(Error::Outer { iteration, .. }) => assert_eq!(iteration, 1),
            Ok(_) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
