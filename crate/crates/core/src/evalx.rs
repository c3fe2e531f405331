//! Estimation metrics: relative errors, partial-coherence support recovery,
//! numerical rank of the low-rank part and model complexity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::armodel::GroundTruth;
use crate::ebayes::EstimateResult;
use crate::polyalg::{
    adjoint_d, eval_poly, half_grid, hermitian_cholesky, hermitian_eigenvalues, BlockSym, MatrixPoly, DEFAULT_GRID,
};
use crate::{Error, Result};

/// Below this aggregated magnitude a low-rank term counts as zero.
const RANK_ZERO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Partial coherence above which a pair is an edge.
    pub coherence: f64,
    /// Normalized singular value above which a direction counts toward the rank.
    pub singular: f64,
    pub gridsize: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { coherence: 0.1, singular: 0.1, gridsize: DEFAULT_GRID }
    }
}

/// `e = ‖(Ŝ−L̂) − (S−L)‖² / ‖S−L‖²` and, when either low-rank term is given,
/// `e_SL = (‖Ŝ−S‖² + ‖L̂−L‖²) / ‖S−L‖²`.
pub fn rel_errors(
    s_hat: &MatrixPoly,
    l_hat: Option<&MatrixPoly>,
    s_true: &MatrixPoly,
    l_true: Option<&MatrixPoly>,
) -> Result<(f64, Option<f64>)> {
    if (s_hat.m(), s_hat.n()) != (s_true.m(), s_true.n()) {
        return Err(Error::Dimension("estimate and truth differ in (m, n)".into()));
    }
    let zero = MatrixPoly::zeros(s_true.m(), s_true.n());
    let lh = l_hat.unwrap_or(&zero);
    let lt = l_true.unwrap_or(&zero);
    let phi_true = s_true - lt;
    let denom = phi_true.norm_sq();
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument("true inverse spectrum is zero".into()));
    }
    let e = (&(s_hat - lh) - &phi_true).norm_sq() / denom;
    let e_sl = if l_hat.is_some() || l_true.is_some() {
        Some(((s_hat - s_true).norm_sq() + (lh - lt).norm_sq()) / denom)
    } else {
        None
    };
    Ok((e, e_sl))
}

/// `max_θ |G_{jh}(θ)| / √(G_{jj}(θ) G_{hh}(θ))` with `G = Σ̂ − Λ̂`; unit diagonal.
pub fn partial_coherence(s_hat: &MatrixPoly, l_hat: Option<&MatrixPoly>, gridsize: usize) -> Result<DMatrix<f64>> {
    let g = match l_hat {
        Some(l) => s_hat - l,
        None => s_hat.clone(),
    };
    let m = g.m();
    let mut pc = DMatrix::identity(m, m);
    for theta in half_grid(gridsize.max(2 * (g.n() + 1))) {
        let val = eval_poly(&g, theta);
        if hermitian_cholesky(val.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(format!("inverse spectrum at θ = {theta:.6}")));
        }
        for j in 0..m {
            for h in 0..j {
                let c = val[(j, h)].norm() / (val[(j, j)].re * val[(h, h)].re).sqrt();
                if c > pc[(j, h)] {
                    pc[(j, h)] = c;
                    pc[(h, j)] = c;
                }
            }
        }
    }
    Ok(pc)
}

/// Pairs `(j, h)`, `j > h`, whose coherence exceeds `threshold`.
pub fn thresholded_support(pc: &DMatrix<f64>, threshold: f64) -> Vec<(usize, usize)> {
    let m = pc.nrows();
    (0..m).flat_map(|j| (0..j).map(move |h| (j, h))).filter(|&(j, h)| pc[(j, h)] > threshold).collect()
}

/// Fraction of misplaced pairs (false positives plus false negatives) and
/// the estimated support.
pub fn support_error(pc: &DMatrix<f64>, true_support: &[(usize, usize)], threshold: f64) -> (f64, Vec<(usize, usize)>) {
    let m = pc.nrows();
    let support_hat = thresholded_support(pc, threshold);
    let total = m * m.saturating_sub(1) / 2;
    if total == 0 {
        return (0.0, support_hat);
    }
    let norm = |&(j, h): &(usize, usize)| (j.max(h), j.min(h));
    let truth: std::collections::BTreeSet<_> = true_support.iter().map(norm).collect();
    let est: std::collections::BTreeSet<_> = support_hat.iter().copied().collect();
    let misplaced = truth.symmetric_difference(&est).count();
    (misplaced as f64 / total as f64, support_hat)
}

/// Numerical rank of `Λ(e^{iθ})`: each ordered singular value is aggregated
/// by its maximum over the grid, and values above `threshold` times the
/// largest one are counted. Zero when `Λ` vanishes.
pub fn numerical_rank_poly(l: &MatrixPoly, threshold: f64, gridsize: usize) -> usize {
    let m = l.m();
    let mut agg = vec![0.0f64; m];
    for theta in half_grid(gridsize.max(2 * (l.n() + 1))) {
        let mut sv: Vec<f64> = hermitian_eigenvalues(&eval_poly(l, theta)).into_iter().map(f64::abs).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        for (a, v) in agg.iter_mut().zip(sv) {
            *a = a.max(v);
        }
    }
    let top = agg.first().copied().unwrap_or(0.0);
    if !(top > RANK_ZERO) {
        return 0;
    }
    1 + agg[1..].iter().filter(|&&v| v > threshold * top).count()
}

/// [`numerical_rank_poly`] of `Λ = Δ H Δ*`.
pub fn numerical_rank(h: &BlockSym, threshold: f64) -> usize {
    numerical_rank_poly(&adjoint_d(h), threshold, DEFAULT_GRID)
}

/// `C = ((s+m)/2 + s·n + r·m(n+1)) / (m(m+1)/2 + m²n)`, with `s` counting
/// both triangles and the diagonal of the common support.
pub fn complexity_c(s_count: usize, rank: usize, m: usize, n: usize) -> f64 {
    parameter_count(s_count, rank, m, n) / (m * (m + 1) / 2 + m * m * n) as f64
}

/// Numerator of [`complexity_c`].
pub fn parameter_count(s_count: usize, rank: usize, m: usize, n: usize) -> f64 {
    (s_count + m) as f64 / 2.0 + (s_count * n) as f64 + (rank * m * (n + 1)) as f64
}

/// Support size in the [`complexity_c`] convention for a pair list.
pub fn support_count(pairs: usize, m: usize) -> usize {
    2 * pairs + m
}

/// Complexity of a generated model.
pub fn true_complexity(g: &GroundTruth) -> f64 {
    complexity_c(g.support_count(), g.r, g.m(), g.n())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub e: f64,
    pub e_sl: Option<f64>,
    pub e_sp: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub support_hat: Vec<[usize; 2]>,
    pub rank_hat: usize,
    pub thresholds: Thresholds,
}

/// Scores an estimate against the model that generated the data. Support is
/// read from the partial coherence of `Σ̂` and rank from `Λ̂`.
pub fn evaluate(est: &EstimateResult, truth: &GroundTruth, th: &Thresholds) -> Result<MetricReport> {
    let (e, e_sl) = rel_errors(&est.sigma, est.lambda.as_ref(), &truth.s, truth.l.as_ref())?;
    let pc = partial_coherence(&est.sigma, None, th.gridsize)?;
    let (e_sp, support_hat) = support_error(&pc, &truth.support, th.coherence);
    let rank_hat = est.lambda.as_ref().map_or(0, |l| numerical_rank_poly(l, th.singular, th.gridsize));
    let (m, n) = (truth.m(), truth.n());
    Ok(MetricReport {
        e,
        e_sl,
        e_sp,
        c: complexity_c(support_count(support_hat.len(), m), rank_hat, m, n),
        support_hat: support_hat.into_iter().map(|(j, h)| [j, h]).collect(),
        rank_hat,
        thresholds: *th,
    })
}
