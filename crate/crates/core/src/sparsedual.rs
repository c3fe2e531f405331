//! Weighted sparse estimation through its dual.
//!
//! For fixed `Z` the dual variable `W` is eliminated exactly by the block
//! Schur complement of `T(R̂ + Z)`, leaving the smooth concave objective
//! `log|W| + m` over a product of weighted-ℓ1 balls, one per index pair. It
//! is maximized by projected gradient ascent.
//!
//! Coordinates: `Z_0` is symmetric, so an off-diagonal pair contributes one
//! free coordinate `(Z_0)_{jh}` (appearing twice in `Z_0`) plus `(Z_k)_{jh}`
//! and `(Z_k)_{hj}` for `k ≥ 1`. Projections are Euclidean in these free
//! coordinates and the ascent direction is the gradient with respect to them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{chol_logdet, inverse_pd, symmetrize};
use crate::polyalg::{adjoint_d, block_schur, group_maxnorm_unchecked, toeplitz, BlockSym, MatrixPoly};
use crate::{Error, Result};

/// Per-pair penalty weights `γ_{jh}`, the optional low-rank weight `Q` and
/// the effective sample count `N − n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightRepr", into = "WeightRepr")]
pub struct WeightSet {
    gammas: DMatrix<f64>,
    q: Option<DMatrix<f64>>,
    nn: f64,
}

#[derive(Serialize, Deserialize)]
struct WeightRepr {
    #[serde(with = "crate::linalg::rows")]
    gammas: DMatrix<f64>,
    #[serde(rename = "Q", with = "crate::linalg::opt_rows", default)]
    q: Option<DMatrix<f64>>,
    #[serde(rename = "Nn")]
    nn: f64,
}

impl TryFrom<WeightRepr> for WeightSet {
    type Error = Error;

    fn try_from(r: WeightRepr) -> Result<Self> {
        WeightSet::new(r.gammas, r.q, r.nn)
    }
}

impl From<WeightSet> for WeightRepr {
    fn from(w: WeightSet) -> Self {
        WeightRepr { gammas: w.gammas, q: w.q, nn: w.nn }
    }
}

impl WeightSet {
    /// Only the lower triangle of `gammas` is read; it is mirrored.
    pub fn new(gammas: DMatrix<f64>, q: Option<DMatrix<f64>>, nn: f64) -> Result<Self> {
        let m = gammas.nrows();
        if gammas.ncols() != m {
            return Err(Error::Dimension("γ table must be square".into()));
        }
        if !(nn > 0.0) {
            return Err(Error::InvalidArgument(format!("N − n must be positive, got {nn}")));
        }
        let mut g = gammas;
        for j in 0..m {
            for h in 0..=j {
                let v = g[(j, h)];
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("γ[{j},{h}] = {v} must be positive")));
                }
                g[(h, j)] = v;
            }
        }
        let q = match q {
            Some(q) => {
                if q.shape() != (m, m) {
                    return Err(Error::Dimension("Q must be m×m".into()));
                }
                let q = symmetrize(&q);
                if chol_logdet(&q).is_none() {
                    return Err(Error::NotPositiveDefinite("Q".into()));
                }
                Some(q)
            }
            None => None,
        };
        Ok(Self { gammas: g, q, nn })
    }

    pub fn uniform(m: usize, gamma: f64, nn: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(m, m, gamma), None, nn)
    }

    pub fn with_q(self, q: DMatrix<f64>) -> Result<Self> {
        Self::new(self.gammas, Some(q), self.nn)
    }

    pub fn m(&self) -> usize {
        self.gammas.nrows()
    }

    pub fn nn(&self) -> f64 {
        self.nn
    }

    pub fn gammas(&self) -> &DMatrix<f64> {
        &self.gammas
    }

    pub fn gamma(&self, j: usize, h: usize) -> f64 {
        self.gammas[(j, h)]
    }

    pub fn q(&self) -> Option<&DMatrix<f64>> {
        self.q.as_ref()
    }

    /// The constant `2/(N − n)` multiplying every penalty.
    pub fn scale(&self) -> f64 {
        2.0 / self.nn
    }

    /// Dual budget `2γ_{jh}/(N − n)` of the pair `(j, h)`.
    pub fn budget(&self, j: usize, h: usize) -> f64 {
        self.scale() * self.gammas[(j, h)]
    }

    /// `(2/(N − n)) Σ_{j≥h} γ_{jh} q_{jh}(S)`.
    pub fn penalty(&self, s: &MatrixPoly) -> f64 {
        let m = self.m();
        let mut acc = 0.0;
        for j in 0..m {
            for h in 0..=j {
                acc += self.gammas[(j, h)] * group_maxnorm_unchecked(s, j, h);
            }
        }
        self.scale() * acc
    }
}

/// Options of the projected-gradient solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol_pg: f64,
    pub max_iter: usize,
    pub backtrack_factor: f64,
    /// Relative objective change treated as stagnation.
    pub tol_rel: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_pg: 1e-7, max_iter: 5000, backtrack_factor: 0.5, tol_rel: 1e-10, verbose: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseSolution {
    #[serde(rename = "X")]
    pub x: BlockSym,
    #[serde(rename = "Z")]
    pub z: MatrixPoly,
    #[serde(rename = "W", with = "crate::linalg::rows")]
    pub w: DMatrix<f64>,
    pub dual_value: f64,
    pub primal_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Dual objective `log|W| + m`, its gradient `D(X)` and the primal point
/// `X = a W⁻¹ aᵀ` at `Z`. Fails with [`Error::Infeasible`] when the Schur
/// complement of `T(R̂ + Z)` is not positive definite.
pub fn dual_objective_grad(z: &MatrixPoly, rhat: &MatrixPoly) -> Result<(f64, MatrixPoly, BlockSym)> {
    let e = evaluate(z, rhat)?;
    Ok((e.value, e.grad, e.x))
}

pub(crate) struct DualPoint {
    pub value: f64,
    pub grad: MatrixPoly,
    pub x: BlockSym,
    pub w: DMatrix<f64>,
}

pub(crate) fn evaluate(z: &MatrixPoly, rhat: &MatrixPoly) -> Result<DualPoint> {
    let m = rhat.m();
    let b = toeplitz(&(rhat + z));
    let (w, a) = block_schur(&b)?;
    let (chol, logdet) =
        chol_logdet(&w).ok_or_else(|| Error::Infeasible("Schur complement is not positive definite".into()))?;
    let winv = symmetrize(&chol.inverse());
    let x = BlockSym::from_sym_unchecked(m, rhat.n(), symmetrize(&(&a * winv * a.transpose())));
    Ok(DualPoint { value: logdet + m as f64, grad: adjoint_d(&x), x, w })
}

/// `S` with `Σ(e^{iθ}) = Δ X Δ*`, i.e. `D(X)`.
pub fn recover_sigma(x: &BlockSym) -> MatrixPoly {
    adjoint_d(x)
}

/// Euclidean projection of `v` onto `{z : Σ w_i |z_i| ≤ radius}` (`w_i > 0`).
/// Returns `v` itself when it is already feasible.
pub fn project_weighted_l1(v: &[f64], weights: &[f64], radius: f64) -> Vec<f64> {
    debug_assert_eq!(v.len(), weights.len());
    let load: f64 = v.iter().zip(weights).map(|(x, w)| w * x.abs()).sum();
    if load <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    // z_i = sign(v_i)·max(|v_i| − λ w_i, 0); coordinates enter the support in
    // decreasing order of |v_i| / w_i.
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| (v[b].abs() / weights[b]).total_cmp(&(v[a].abs() / weights[a])));
    let (mut num, mut den) = (-radius, 0.0);
    let mut lambda = 0.0;
    for &i in &order {
        let n2 = num + weights[i] * v[i].abs();
        let d2 = den + weights[i] * weights[i];
        let cand = n2 / d2;
        if v[i].abs() / weights[i] > cand {
            num = n2;
            den = d2;
            lambda = cand;
        } else {
            break;
        }
    }
    v.iter().zip(weights).map(|(x, w)| x.signum() * (x.abs() - lambda * w).max(0.0)).collect()
}

/// Free coordinates of the pair `(j, h)`, `j ≥ h`, as `(block, row, col)`
/// together with their ℓ1 weights.
fn group_coords(n: usize, j: usize, h: usize) -> Vec<(usize, usize, usize, f64)> {
    if j == h {
        return (0..=n).map(|k| (k, j, j, 1.0)).collect();
    }
    let mut c = Vec::with_capacity(2 * n + 1);
    c.push((0, j, h, 2.0));
    for k in 1..=n {
        c.push((k, j, h, 1.0));
        c.push((k, h, j, 1.0));
    }
    c
}

/// Weighted ℓ1 load `Σ_k |(Z_k)_{jh}| + |(Z_k)_{hj}|` of a pair (for `j = h`,
/// `Σ_k |(Z_k)_{jj}|`).
pub fn group_load(z: &MatrixPoly, j: usize, h: usize) -> f64 {
    group_coords(z.n(), j, h).into_iter().map(|(k, a, b, w)| w * z.block(k)[(a, b)].abs()).sum()
}

/// Projects every pair group of `Z` onto its ball of radius `2γ_{jh}/(N − n)`.
pub fn project_group_ball(z: &MatrixPoly, w: &WeightSet) -> MatrixPoly {
    let (m, n) = (z.m(), z.n());
    let mut out = z.clone();
    for j in 0..m {
        for h in 0..=j {
            let coords = group_coords(n, j, h);
            let v: Vec<f64> = coords.iter().map(|&(k, a, b, _)| z.block(k)[(a, b)]).collect();
            let wts: Vec<f64> = coords.iter().map(|c| c.3).collect();
            let radius = w.budget(j, h);
            let load: f64 = v.iter().zip(&wts).map(|(x, w)| w * x.abs()).sum();
            if load <= radius {
                continue;
            }
            let p = project_weighted_l1(&v, &wts, radius);
            for (&(k, a, b, _), val) in coords.iter().zip(p) {
                out.block_mut(k)[(a, b)] = val;
                if k == 0 {
                    out.block_mut(0)[(b, a)] = val;
                }
            }
        }
    }
    out
}

/// Gradient with respect to the free coordinates: off-diagonal entries of
/// block 0 count twice.
pub(crate) fn free_gradient(g: &MatrixPoly) -> MatrixPoly {
    let mut out = g.clone();
    let b0 = out.block_mut(0);
    let m = b0.nrows();
    for a in 0..m {
        for b in 0..m {
            if a != b {
                b0[(a, b)] *= 2.0;
            }
        }
    }
    out
}

/// Inner product in free coordinates.
pub(crate) fn free_dot(a: &MatrixPoly, b: &MatrixPoly) -> f64 {
    let b0 = a.block(0).dot(b.block(0));
    let diag: f64 = a.block(0).diagonal().dot(&b.block(0).diagonal());
    let rest: f64 = (1..=a.n()).map(|k| a.block(k).dot(b.block(k))).sum();
    0.5 * (b0 + diag) + rest
}

pub(crate) fn free_norm(a: &MatrixPoly) -> f64 {
    free_dot(a, a).max(0.0).sqrt()
}

/// Outcome of [`projected_ascent`].
pub(crate) struct Ascent {
    pub z: MatrixPoly,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e12;
const STAGNATION_RUN: usize = 50;

/// Maximizes a smooth concave `f` over the pair balls by projected gradient
/// with Barzilai–Borwein trial steps and Armijo backtracking. `eval` returns
/// `(f, ∇f)` with the Frobenius gradient, or an error outside the domain.
/// `z0` must lie in the domain and inside the balls.
pub(crate) fn projected_ascent<F>(
    z0: MatrixPoly,
    w: &WeightSet,
    opts: &SolverOptions,
    tol_pg: f64,
    mut eval: F,
) -> Result<Ascent>
where
    F: FnMut(&MatrixPoly) -> Result<(f64, MatrixPoly)>,
{
    let mut z = z0;
    let (mut f, mut g) = eval(&z)?;
    let mut step = initial_step(&z, &g, &mut eval);
    let mut stagnant = 0;
    for it in 0..opts.max_iter {
        let gt = free_gradient(&g);
        let pg_norm = free_norm(&(&project_group_ball(&(&z + &gt), w) - &z));
        if opts.verbose {
            log::info!("ascent iter {it}: f = {f:.12e}, pg = {pg_norm:.3e}, step = {step:.3e}");
        }
        if pg_norm <= tol_pg {
            return Ok(Ascent { z, iterations: it, converged: true });
        }
        let mut t = step;
        let accepted = loop {
            let cand = project_group_ball(&z.axpy(t, &gt), w);
            let d = &cand - &z;
            let slope = d.dot(&g);
            if let Ok((fc, gc)) = eval(&cand) {
                if fc >= f + ARMIJO * slope && fc.is_finite() {
                    break Some((cand, d, fc, gc));
                }
            }
            t *= opts.backtrack_factor;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some((cand, d, fc, gc)) = accepted else {
            log::debug!("line search stalled at iteration {it}, pg = {pg_norm:.3e}");
            return Ok(Ascent { z, iterations: it, converged: false });
        };
        let sy = d.dot(&(&gc - &g));
        let ss = free_dot(&d, &d);
        step = if sy < 0.0 && ss > 0.0 { (ss / -sy).clamp(MIN_STEP, MAX_STEP) } else { (2.0 * t).min(MAX_STEP) };
        let rel = (fc - f).abs() / (1.0 + f.abs());
        z = cand;
        f = fc;
        g = gc;
        if rel <= opts.tol_rel {
            stagnant += 1;
            if stagnant >= STAGNATION_RUN {
                return Ok(Ascent { z, iterations: it + 1, converged: true });
            }
        } else {
            stagnant = 0;
        }
    }
    Ok(Ascent { z, iterations: opts.max_iter, converged: false })
}

/// Inverse curvature along the gradient from two power-iteration sweeps with
/// finite-difference Hessian-vector products; `1` if the probe leaves the
/// domain.
fn initial_step<F>(z: &MatrixPoly, g: &MatrixPoly, eval: &mut F) -> f64
where
    F: FnMut(&MatrixPoly) -> Result<(f64, MatrixPoly)>,
{
    const EPS: f64 = 1e-6;
    let mut v = free_gradient(g);
    let mut lambda = 0.0;
    for _ in 0..2 {
        let norm = free_norm(&v);
        if !(norm > 0.0) {
            return 1.0;
        }
        v = v.scale(1.0 / norm);
        let plus = eval(&z.axpy(EPS, &v));
        let minus = eval(&z.axpy(-EPS, &v));
        let (Ok((_, gp)), Ok((_, gm))) = (plus, minus) else {
            return 1.0;
        };
        let hv = free_gradient(&(&gp - &gm)).scale(0.5 / EPS);
        lambda = free_norm(&hv);
        v = hv;
    }
    if lambda > 0.0 && lambda.is_finite() {
        (1.0 / lambda).clamp(MIN_STEP, MAX_STEP)
    } else {
        1.0
    }
}

/// Solves the weighted sparse problem from `Z = 0`.
pub fn solve_sparse_dual(rhat: &MatrixPoly, w: &WeightSet, opts: &SolverOptions) -> Result<SparseSolution> {
    solve_sparse_dual_from(rhat, w, opts, None)
}

/// As [`solve_sparse_dual`], starting from `warm` (projected onto the balls)
/// when it is feasible and from `Z = 0` otherwise.
pub fn solve_sparse_dual_from(
    rhat: &MatrixPoly,
    w: &WeightSet,
    opts: &SolverOptions,
    warm: Option<&MatrixPoly>,
) -> Result<SparseSolution> {
    let (m, n) = (rhat.m(), rhat.n());
    if w.m() != m {
        return Err(Error::Dimension(format!("weights are {}×{}, lags are {m}×{m}", w.m(), w.m())));
    }
    if evaluate(&MatrixPoly::zeros(m, n), rhat).is_err() {
        return Err(Error::NotPositiveDefinite("T(R̂)".into()));
    }
    let start = warm
        .filter(|z| z.m() == m && z.n() == n)
        .map(|z| project_group_ball(z, w))
        .filter(|z| evaluate(z, rhat).is_ok())
        .unwrap_or_else(|| MatrixPoly::zeros(m, n));
    let ascent = projected_ascent(start, w, opts, opts.tol_pg, |z| evaluate(z, rhat).map(|p| (p.value, p.grad)))?;
    finish_sparse(rhat, w, ascent)
}

fn finish_sparse(rhat: &MatrixPoly, w: &WeightSet, ascent: Ascent) -> Result<SparseSolution> {
    let p = evaluate(&ascent.z, rhat)?;
    let primal_value = sparse_primal_value(&p.x, rhat, w)?;
    Ok(SparseSolution {
        x: p.x,
        z: ascent.z,
        w: p.w,
        dual_value: p.value,
        primal_value,
        gap: primal_value - p.value,
        iterations: ascent.iterations,
        converged: ascent.converged,
    })
}

/// `−log|X₀₀| + ⟨T(R̂), X⟩ + (2/(N − n)) Σ γ_{jh} q_{jh}(D(X))`.
pub fn sparse_primal_value(x: &BlockSym, rhat: &MatrixPoly, w: &WeightSet) -> Result<f64> {
    let x00 = x.block(0, 0).into_owned();
    let logdet =
        crate::linalg::logdet_pd(&x00).ok_or_else(|| Error::NotPositiveDefinite("leading block of X".into()))?;
    Ok(-logdet + toeplitz(rhat).dot(x) + w.penalty(&adjoint_d(x)))
}

/// `X = a R_e⁻¹ aᵀ` of the Yule–Walker fit on `R̂`: the unpenalized optimum.
pub fn unpenalized_optimum(rhat: &MatrixPoly) -> Result<BlockSym> {
    let (w, a) = block_schur(&toeplitz(rhat))?;
    let winv = inverse_pd(&w).ok_or_else(|| Error::NotPositiveDefinite("Schur complement of T(R̂)".into()))?;
    Ok(BlockSym::from_sym_unchecked(rhat.m(), rhat.n(), symmetrize(&(&a * winv * a.transpose()))))
}
