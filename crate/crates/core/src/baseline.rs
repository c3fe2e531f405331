//! Fixed-weight estimators traced over a regularization grid and ranked by
//! BIC, with complexity measured on thresholded partial coherence (and
//! thresholded singular values of the low-rank part).

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::armodel::GroundTruth;
use crate::ebayes::{likelihood, EstimateResult, StopReason};
use crate::evalx::{
    numerical_rank_poly, parameter_count, partial_coherence, rel_errors, support_count, thresholded_support, Thresholds,
};
use crate::latentdual::{solve_latent_dual, LatentOptions};
use crate::linalg::min_eig;
use crate::polyalg::{toeplitz, MatrixPoly};
use crate::sparsedual::{solve_sparse_dual, SolverOptions, WeightSet};
use crate::{Error, Result};

/// Ratio of the smallest to the largest grid value for sparse grids.
pub const SPARSE_GRID_SPAN: f64 = 1e-3;
/// Same ratio for the sparse weight of latent grids.
pub const LATENT_GRID_SPAN: f64 = 1e-2;
/// Diagonal weights are this fraction of the off-diagonal weight.
pub const DIAGONAL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedOptions {
    pub sparse: SolverOptions,
    pub latent: LatentOptions,
}

/// Regularization values to trace: either sparse weights alone or
/// `(γ_S, γ_L)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gammas: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
    pub thresholds: Thresholds,
}

impl GridSpec {
    pub fn sparse(gammas: Vec<f64>) -> Self {
        Self { gammas, pairs: Vec::new(), thresholds: Thresholds::default() }
    }

    pub fn latent(pairs: Vec<(f64, f64)>) -> Self {
        Self { gammas: Vec::new(), pairs, thresholds: Thresholds::default() }
    }

    pub fn len(&self) -> usize {
        self.gammas.len() + self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("empty regularization grid".into()));
        }
        let ok = self.gammas.iter().all(|&g| g > 0.0) && self.pairs.iter().all(|&(a, b)| a > 0.0 && b > 0.0);
        if !ok {
            return Err(Error::InvalidArgument("grid values must be positive".into()));
        }
        Ok(())
    }
}

/// `points` logarithmically spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

fn uniform_weights(m: usize, gamma: f64, nn: f64) -> Result<WeightSet> {
    let mut g = DMatrix::from_element(m, m, gamma);
    g.fill_diagonal(gamma * DIAGONAL_FLOOR);
    WeightSet::new(g, None, nn)
}

/// Solves with uniform off-diagonal weight `γ` (tiny diagonal weight) and,
/// for latent candidates, `Q = γ_L I`.
pub fn solve_fixed(
    rhat: &MatrixPoly,
    nn: f64,
    gamma: f64,
    gamma_l: Option<f64>,
    opts: &FixedOptions,
) -> Result<EstimateResult> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("γ must be positive, got {gamma}")));
    }
    let m = rhat.m();
    let w = uniform_weights(m, gamma, nn)?;
    match gamma_l {
        None => {
            let sol = solve_sparse_dual(rhat, &w, &opts.sparse)?;
            let stop = if sol.converged { StopReason::Converged } else { StopReason::MaxIterations };
            Ok(EstimateResult::from_parts(sol.x, None, &w, 1, stop, (sol.gap, sol.dual_value, sol.converged)))
        }
        Some(gl) => {
            let w = w.with_q(DMatrix::identity(m, m) * gl)?;
            let sol = solve_latent_dual(rhat, &w, &opts.latent)?;
            let stop = if sol.converged { StopReason::Converged } else { StopReason::MaxIterations };
            Ok(EstimateResult::from_parts(sol.x, Some(sol.h), &w, 1, stop, (sol.gap, sol.dual_value, sol.converged)))
        }
    }
}

/// One row of the score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub gamma: f64,
    pub gamma_l: Option<f64>,
    pub bic: f64,
    pub support_size: usize,
    pub rank: usize,
    /// Relative error against the generating model, when known.
    pub e: Option<f64>,
}

/// A grid point and its estimate.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub gamma: f64,
    pub gamma_l: Option<f64>,
    pub result: EstimateResult,
}

/// `(N−n)(−log|X̂₀₀| + ⟨T(R̂), X̂⟩) + k̂ log(N−n)` with `k̂` the parameter count
/// of the thresholded support and rank. Returns the index of the minimum and
/// the full table.
pub fn rank_by_bic(
    candidates: &[Candidate],
    rhat: &MatrixPoly,
    nn: f64,
    th: &Thresholds,
    truth: Option<&GroundTruth>,
) -> Result<(usize, Vec<ScoreRow>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to rank".into()));
    }
    let (m, n) = (rhat.m(), rhat.n());
    let mut rows = Vec::with_capacity(candidates.len());
    for c in candidates {
        let r = &c.result;
        let pc = partial_coherence(&r.sigma, None, th.gridsize)?;
        let support = thresholded_support(&pc, th.coherence).len();
        let rank = r.lambda.as_ref().map_or(0, |l| numerical_rank_poly(l, th.singular, th.gridsize));
        let k_hat = parameter_count(support_count(support, m), rank, m, n);
        let bic = nn * likelihood(&r.x, rhat)? + k_hat * nn.ln();
        let e = match truth {
            Some(t) => Some(rel_errors(&r.sigma, r.lambda.as_ref(), &t.s, t.l.as_ref())?.0),
            None => None,
        };
        rows.push(ScoreRow { gamma: c.gamma, gamma_l: c.gamma_l, bic, support_size: support, rank, e });
    }
    let best = rows.iter().enumerate().min_by(|a, b| a.1.bic.total_cmp(&b.1.bic)).map(|(i, _)| i).expect("nonempty");
    Ok((best, rows))
}

/// Smallest uniform `γ` whose sparse estimate has an empty thresholded
/// support, by geometric bracketing followed by bisection in `log γ`.
pub fn gamma_max(rhat: &MatrixPoly, nn: f64, th: &Thresholds, opts: &SolverOptions) -> Result<f64> {
    let empty = |g: f64| -> Result<bool> {
        let sol = solve_sparse_dual(rhat, &uniform_weights(rhat.m(), g, nn)?, opts)?;
        let pc = partial_coherence(&crate::polyalg::adjoint_d(&sol.x), None, th.gridsize)?;
        Ok(thresholded_support(&pc, th.coherence).is_empty())
    };
    if rhat.m() < 2 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    if empty(hi)? {
        lo = hi / 2.0;
        while empty(lo)? {
            hi = lo;
            lo /= 2.0;
            if lo < 1e-12 {
                return Ok(hi);
            }
        }
    } else {
        hi = 2.0;
        while !empty(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InvalidArgument("no regularization empties the support".into()));
            }
        }
    }
    while hi / lo > 1.01 {
        let mid = (lo * hi).sqrt();
        if empty(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `points` sparse weights spanning `[γ_max·10⁻³, γ_max]`.
pub fn default_sparse_grid(rhat: &MatrixPoly, nn: f64, points: usize, opts: &FixedOptions) -> Result<GridSpec> {
    let th = Thresholds::default();
    let gmax = gamma_max(rhat, nn, &th, &opts.sparse)?;
    Ok(GridSpec::sparse(log_grid(gmax * SPARSE_GRID_SPAN, gmax, points)))
}

/// `side × side` pairs: `γ_S` spanning `[γ_max·10⁻², γ_max]` and, for each
/// `γ_S`, `γ_L` spanning `[0.1, 1]·γ_L,max(γ_S)`, where above `γ_L,max` the
/// low-rank constraint is inactive at the sparse optimum.
pub fn default_latent_grid(rhat: &MatrixPoly, nn: f64, side: usize, opts: &FixedOptions) -> Result<GridSpec> {
    let th = Thresholds::default();
    let gmax = gamma_max(rhat, nn, &th, &opts.sparse)?;
    let c = 2.0 / nn;
    let mut pairs = Vec::with_capacity(side * side);
    for gs in log_grid(gmax * LATENT_GRID_SPAN, gmax, side) {
        let sol = solve_sparse_dual(rhat, &uniform_weights(rhat.m(), gs, nn)?, &opts.sparse)?;
        let lmin = min_eig(toeplitz(&sol.z).matrix());
        let gl_max = (-lmin / c).max(1e-6);
        for gl in log_grid(0.1 * gl_max, gl_max, side) {
            pairs.push((gs, gl));
        }
    }
    Ok(GridSpec::latent(pairs))
}

/// Outcome of a grid run.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub best: usize,
    pub table: Vec<ScoreRow>,
    pub estimate: EstimateResult,
}

/// Solves every grid point (concurrently) and keeps the BIC minimizer.
pub fn run_grid(
    rhat: &MatrixPoly,
    nn: f64,
    spec: &GridSpec,
    opts: &FixedOptions,
    truth: Option<&GroundTruth>,
) -> Result<BaselineOutcome> {
    spec.validate()?;
    let points: Vec<(f64, Option<f64>)> =
        spec.gammas.iter().map(|&g| (g, None)).chain(spec.pairs.iter().map(|&(g, l)| (g, Some(l)))).collect();
    let candidates = points
        .par_iter()
        .map(|&(g, gl)| solve_fixed(rhat, nn, g, gl, opts).map(|result| Candidate { gamma: g, gamma_l: gl, result }))
        .collect::<Result<Vec<_>>>()?;
    let (best, table) = rank_by_bic(&candidates, rhat, nn, &spec.thresholds, truth)?;
    let estimate = candidates.into_iter().nth(best).expect("index from ranking").result;
    Ok(BaselineOutcome { best, table, estimate })
}

/// Writes the score table as CSV.
pub fn write_score_table<W: Write>(rows: &[ScoreRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma", "gamma_l", "bic", "support_size", "rank", "e"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.gamma.to_string(),
            r.gamma_l.map_or(String::new(), |v| v.to_string()),
            r.bic.to_string(),
            r.support_size.to_string(),
            r.rank.to_string(),
            r.e.map_or(String::new(), |v| v.to_string()),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armodel::{exact_lags, random_sparse_inverse, simulate};
    use crate::polyalg::{adjoint_d, group_maxnorm};
    use crate::tsdata::covariance_lags;

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1.0, 4);
        assert!((g[0] - 1e-3).abs() < 1e-15 && (g[3] - 1.0).abs() < 1e-15);
        assert!((g[1] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn doubling_gamma_never_grows_a_group() {
        let g = random_sparse_inverse(3, 1, 0.7, 0.2, 5).unwrap();
        let y = simulate(&g.ar, 400, 6, None).unwrap();
        let rhat = covariance_lags(&y, 1).unwrap();
        let opts = FixedOptions::default();
        let mut prev: Option<MatrixPoly> = None;
        for gamma in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let s = solve_fixed(&rhat, 399.0, gamma, None, &opts).unwrap().sigma;
            if let Some(p) = &prev {
                for j in 0..3 {
                    for h in 0..j {
                        let (now, before) = (group_maxnorm(&s, j, h).unwrap(), group_maxnorm(p, j, h).unwrap());
                        assert!(now <= before + 1e-7, "({j},{h}) grew from {before} to {now}");
                    }
                }
            }
            prev = Some(s);
        }
    }

    #[test]
    fn single_candidate_and_sparser_tie_break() {
        let g = random_sparse_inverse(3, 1, 0.5, 0.2, 1).unwrap();
        let rhat = MatrixPoly::new(exact_lags(&g, 1).unwrap()).unwrap();
        let est = solve_fixed(&rhat, 100.0, 1.0, None, &FixedOptions::default()).unwrap();
        let one = [Candidate { gamma: 1.0, gamma_l: None, result: est.clone() }];
        assert_eq!(rank_by_bic(&one, &rhat, 100.0, &Thresholds::default(), None).unwrap().0, 0);

        // same likelihood, but the second copy has its support inflated
        let mut dense = est.clone();
        let mut blocks = dense.sigma.clone().into_blocks();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    blocks[0][(a, b)] += 0.3;
                }
            }
        }
        dense.sigma = MatrixPoly::new(blocks).unwrap();
        let two = [
            Candidate { gamma: 1.0, gamma_l: None, result: dense },
            Candidate { gamma: 1.0, gamma_l: None, result: est },
        ];
        let (best, rows) = rank_by_bic(&two, &rhat, 100.0, &Thresholds::default(), None).unwrap();
        assert!(rows[0].support_size > rows[1].support_size);
        assert_eq!(best, 1);
    }

    #[test]
    fn bic_likelihood_matches_solver_objective() {
        let g = random_sparse_inverse(3, 1, 0.5, 0.2, 2).unwrap();
        let rhat = MatrixPoly::new(exact_lags(&g, 1).unwrap()).unwrap();
        let w = uniform_weights(3, 0.7, 50.0).unwrap();
        let sol = solve_sparse_dual(&rhat, &w, &SolverOptions::default()).unwrap();
        let l = likelihood(&sol.x, &rhat).unwrap();
        assert!((l + w.penalty(&adjoint_d(&sol.x)) - sol.primal_value).abs() < 1e-9);
    }

    #[test]
    fn gamma_max_empties_the_support() {
        let g = random_sparse_inverse(4, 1, 0.5, 0.2, 3).unwrap();
        let y = simulate(&g.ar, 500, 4, None).unwrap();
        let rhat = covariance_lags(&y, 1).unwrap();
        let th = Thresholds::default();
        let opts = SolverOptions::default();
        let gm = gamma_max(&rhat, 499.0, &th, &opts).unwrap();
        let est = solve_fixed(&rhat, 499.0, gm, None, &FixedOptions::default()).unwrap();
        let pc = partial_coherence(&est.sigma, None, th.gridsize).unwrap();
        assert!(thresholded_support(&pc, th.coherence).is_empty());
        let est = solve_fixed(&rhat, 499.0, gm / 1.05, None, &FixedOptions::default()).unwrap();
        let pc = partial_coherence(&est.sigma, None, th.gridsize).unwrap();
        assert!(!thresholded_support(&pc, th.coherence).is_empty());
    }

    #[test]
    fn score_table_csv() {
        let rows = vec![ScoreRow { gamma: 1.0, gamma_l: Some(0.5), bic: 3.0, support_size: 2, rank: 1, e: None }];
        let mut buf = Vec::new();
        write_score_table(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("gamma,gamma_l,bic,support_size,rank,e\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
