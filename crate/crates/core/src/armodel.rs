//! Ground-truth models, their exact covariance lags, order-`n` Yule–Walker
//! fits and exact AR simulation.
//!
//! Lags are obtained by integrating `Φ = (Σ − Λ)⁻¹` on a fine uniform grid.
//! Because `Φ⁻¹` is a degree-`n` pseudo-polynomial, the process is exactly
//! AR(n) and Yule–Walker on those lags returns the generating model, so no
//! spectral factorization is needed.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{chol_logdet, inverse_pd, symmetrize};
use crate::polyalg::{
    adjoint_d, block_schur, eval_poly, grid_min_eig, half_grid, hermitian_cholesky, hermitian_eigenvalues, matrix_rows,
    toeplitz, BlockSym, MatrixPoly, DEFAULT_GRID,
};
use crate::tsdata::TimeSeries;
use crate::{Error, Result};

/// Grid used to integrate the spectrum into lags.
pub const LAG_GRID: usize = 4096;
/// Half-width of the uniform law used for nonzero generator coefficients.
pub const COEFF_SCALE: f64 = 0.3;
/// Geometric growth of the diagonal loading.
pub const LOADING_GROWTH: f64 = 1.5;
/// Extra spectral room reserved in `Σ` before the low-rank part is subtracted.
pub const LATENT_HEADROOM: f64 = 1.0;
const MAX_BURNIN: usize = 5000;

/// `y(t) = −Σ_k A_k y(t−k) + e(t)`, `e ~ N(0, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ARModel {
    m: usize,
    #[serde(rename = "A", with = "crate::linalg::rows_list")]
    a: Vec<DMatrix<f64>>,
    #[serde(rename = "R", with = "crate::linalg::rows")]
    r: DMatrix<f64>,
}

impl ARModel {
    pub fn new(a: Vec<DMatrix<f64>>, r: DMatrix<f64>) -> Result<Self> {
        let m = r.nrows();
        if r.ncols() != m || a.iter().any(|ak| ak.shape() != (m, m)) {
            return Err(Error::Dimension("AR blocks and R must all be m×m".into()));
        }
        let r = symmetrize(&r);
        if chol_logdet(&r).is_none() {
            return Err(Error::NotPositiveDefinite("innovation covariance R".into()));
        }
        Ok(Self { m, a, r })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn coefficients(&self) -> &[DMatrix<f64>] {
        &self.a
    }

    pub fn innovation_cov(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Companion matrix of `y(t) = Σ (−A_k) y(t−k)`.
    pub fn companion(&self) -> DMatrix<f64> {
        let (m, n) = (self.m, self.n());
        let mut c = DMatrix::zeros(m * n, m * n);
        for (k, ak) in self.a.iter().enumerate() {
            c.view_mut((0, k * m), (m, m)).copy_from(&(-ak));
        }
        for k in 1..n {
            c.view_mut((k * m, (k - 1) * m), (m, m)).fill_with_identity();
        }
        c
    }

    pub fn spectral_radius(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        self.companion().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// `a = [I; A_1ᵀ; …; A_nᵀ]`.
    pub fn predictor_stack(&self) -> DMatrix<f64> {
        let (m, n) = (self.m, self.n());
        let mut a = DMatrix::zeros(m * (n + 1), m);
        a.view_mut((0, 0), (m, m)).fill_with_identity();
        for (k, ak) in self.a.iter().enumerate() {
            a.view_mut(((k + 1) * m, 0), (m, m)).copy_from(&ak.transpose());
        }
        a
    }

    /// `X = a R⁻¹ aᵀ`, so that `Φ⁻¹ = Δ X Δ*`.
    pub fn inverse_spectrum_factor(&self) -> BlockSym {
        let a = self.predictor_stack();
        let rinv = inverse_pd(&self.r).expect("R is positive definite by construction");
        BlockSym::from_sym_unchecked(self.m, self.n(), symmetrize(&(&a * rinv * a.transpose())))
    }

    /// Default burn-in `10·n·⌈1/(1−ρ)⌉`, capped at 5000.
    pub fn default_burnin(&self) -> usize {
        let rho = self.spectral_radius();
        if self.n() == 0 {
            return 0;
        }
        if rho >= 1.0 {
            return MAX_BURNIN;
        }
        let mix = (1.0 / (1.0 - rho)).ceil();
        ((10 * self.n()) as f64 * mix).min(MAX_BURNIN as f64) as usize
    }
}

/// Generated model with known inverse spectrum `Σ − Λ`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub s: MatrixPoly,
    pub l: Option<MatrixPoly>,
    pub h: Option<BlockSym>,
    /// Unordered pairs `(j, h)`, `j > h`, zero-based.
    pub support: Vec<(usize, usize)>,
    pub r: usize,
    pub ar: ARModel,
}

#[derive(Serialize, Deserialize)]
struct TruthRepr {
    #[serde(rename = "S")]
    s: MatrixPoly,
    #[serde(rename = "L")]
    l: Option<MatrixPoly>,
    #[serde(rename = "H")]
    h: Option<Vec<Vec<f64>>>,
    support: Vec<[usize; 2]>,
    r: usize,
    #[serde(default)]
    pair_count: usize,
}

impl Serialize for GroundTruth {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        TruthRepr {
            s: self.s.clone(),
            l: self.l.clone(),
            h: self.h.as_ref().map(|h| matrix_rows(h.matrix())),
            support: self.support.iter().map(|&(j, h)| [j, h]).collect(),
            r: self.r,
            pair_count: self.support.len(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GroundTruth {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let t = TruthRepr::deserialize(de)?;
        let (m, n) = (t.s.m(), t.s.n());
        let h = match t.h {
            Some(rows) => {
                let size = m * (n + 1);
                if rows.len() != size || rows.iter().any(|r| r.len() != size) {
                    return Err(serde::de::Error::custom("H has the wrong size"));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                Some(
                    BlockSym::new(m, n, DMatrix::from_row_slice(size, size, &flat))
                        .map_err(serde::de::Error::custom)?,
                )
            }
            None => None,
        };
        let support = t.support.into_iter().map(|[j, h]| (j.max(h), j.min(h))).collect();
        GroundTruth::from_parts(t.s, t.l, h, support, t.r).map_err(serde::de::Error::custom)
    }
}

impl GroundTruth {
    /// Assembles a model and derives its AR representation.
    pub fn from_parts(
        s: MatrixPoly,
        l: Option<MatrixPoly>,
        h: Option<BlockSym>,
        support: Vec<(usize, usize)>,
        r: usize,
    ) -> Result<Self> {
        let inv = Self::inverse_of(&s, l.as_ref());
        let lags = lags_of_inverse(&inv, inv.n(), LAG_GRID)?;
        let ar = yule_walker(&lags)?;
        Ok(Self { s, l, h, support, r, ar })
    }

    fn inverse_of(s: &MatrixPoly, l: Option<&MatrixPoly>) -> MatrixPoly {
        match l {
            Some(l) => s - l,
            None => s.clone(),
        }
    }

    pub fn m(&self) -> usize {
        self.s.m()
    }

    pub fn n(&self) -> usize {
        self.s.n()
    }

    /// Coefficients of `Φ⁻¹ = Σ − Λ`.
    pub fn inverse_spectrum(&self) -> MatrixPoly {
        Self::inverse_of(&self.s, self.l.as_ref())
    }

    /// Number of nonzero entries of the common support of `Σ` counting both
    /// triangles and the diagonal.
    pub fn support_count(&self) -> usize {
        2 * self.support.len() + self.m()
    }
}

/// Number of unordered pairs requested for a given density.
pub fn pair_count(m: usize, density: f64) -> usize {
    let total = m * (m.saturating_sub(1)) / 2;
    ((density * total as f64).ceil() as usize).min(total)
}

fn sparse_coefficients(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    density: f64,
) -> (Vec<DMatrix<f64>>, Vec<(usize, usize)>) {
    let all: Vec<(usize, usize)> = (0..m).flat_map(|j| (0..j).map(move |h| (j, h))).collect();
    let count = pair_count(m, density);
    let mut support: Vec<(usize, usize)> = sample_indices(rng, all.len(), count).into_iter().map(|i| all[i]).collect();
    support.sort_unstable();

    let mut blocks = vec![DMatrix::zeros(m, m); n + 1];
    blocks[0].fill_with_identity();
    for blk in blocks.iter_mut().skip(1) {
        for a in 0..m {
            blk[(a, a)] = rng.random_range(-1.0..1.0) * COEFF_SCALE;
        }
    }
    for &(j, h) in &support {
        let v = rng.random_range(-1.0..1.0) * COEFF_SCALE;
        blocks[0][(j, h)] = v;
        blocks[0][(h, j)] = v;
        for blk in blocks.iter_mut().skip(1) {
            blk[(j, h)] = rng.random_range(-1.0..1.0) * COEFF_SCALE;
            blk[(h, j)] = rng.random_range(-1.0..1.0) * COEFF_SCALE;
        }
    }
    (blocks, support)
}

/// Adds `δ·I` to `S_0`, `δ` growing geometrically from a tenth of the mean
/// absolute diagonal, until `grid_min_eig(S) ≥ target`.
fn load_diagonal(blocks: Vec<DMatrix<f64>>, target: f64) -> MatrixPoly {
    let s = MatrixPoly::new(blocks).expect("generator blocks are well-formed");
    let base = grid_min_eig(&s, DEFAULT_GRID);
    if base >= target {
        return s;
    }
    let m = s.m();
    let mean_diag = s.block(0).diagonal().abs().mean();
    let mut delta = 0.1 * mean_diag.max(f64::MIN_POSITIVE);
    // loading shifts every eigenvalue by δ, so skip the steps known to fall short
    while base + delta < target {
        delta *= LOADING_GROWTH;
    }
    loop {
        let mut b = s.clone().into_blocks();
        b[0] += DMatrix::<f64>::identity(m, m) * delta;
        let loaded = MatrixPoly::new(b).expect("shape preserved");
        if grid_min_eig(&loaded, DEFAULT_GRID) >= target {
            return loaded;
        }
        delta *= LOADING_GROWTH;
    }
}

/// Random sparse `Σ` with `⌈density·m(m−1)/2⌉` off-diagonal pairs.
pub fn random_sparse_inverse(m: usize, n: usize, density: f64, margin: f64, seed: u64) -> Result<GroundTruth> {
    check_generator_args(density, margin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (blocks, support) = sparse_coefficients(&mut rng, m, n, density);
    let s = load_diagonal(blocks, margin);
    GroundTruth::from_parts(s, None, None, support, 0)
}

/// Random sparse `Σ` minus a rank-`r` `Λ = Δ H Δ*`, `H = β F Fᵀ`.
pub fn random_latent_inverse(
    m: usize,
    n: usize,
    density: f64,
    r: usize,
    margin: f64,
    seed: u64,
) -> Result<GroundTruth> {
    check_generator_args(density, margin)?;
    if r == 0 || r >= m {
        return Err(Error::InvalidArgument(format!("latent rank must satisfy 1 ≤ r < m, got {r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (blocks, support) = sparse_coefficients(&mut rng, m, n, density);
    let s = load_diagonal(blocks, margin + LATENT_HEADROOM);

    let size = m * (n + 1);
    let f = DMatrix::from_fn(size, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let hf = symmetrize(&(&f * f.transpose()));
    let lf = adjoint_d(&BlockSym::from_sym_unchecked(m, n, hf.clone()));

    let spectral_max = |p: &MatrixPoly| -grid_min_eig(&p.scale(-1.0), DEFAULT_GRID);
    let beta_max = spectral_max(&s) / spectral_max(&lf);
    let feasible = |beta: f64| grid_min_eig(&s.axpy(-beta, &lf), DEFAULT_GRID) >= margin;
    let beta = if feasible(beta_max) {
        beta_max
    } else {
        let (mut lo, mut hi) = match largest_feasible_beta(&s, &lf, margin) {
            Some(b) if b < beta_max => (b * (1.0 - BETA_BRACKET), b),
            _ => (0.0, beta_max),
        };
        if feasible(hi) {
            lo = hi;
        } else if !feasible(lo) {
            lo = 0.0;
        }
        while hi - lo > f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let h = BlockSym::from_sym_unchecked(m, n, hf * beta);
    let l = adjoint_d(&h);
    GroundTruth::from_parts(s, Some(l), Some(h), support, r)
}

/// Relative width of the bisection bracket around the per-frequency bound.
const BETA_BRACKET: f64 = 1e-9;

/// `min_θ 1/λ_max(C⁻¹ L(θ) C⁻*)` with `C Cᴴ = S(θ) − margin·I`: the largest
/// `β` keeping `S − βL ⪰ margin` on the grid, given `L ⪰ 0` there.
fn largest_feasible_beta(s: &MatrixPoly, l: &MatrixPoly, margin: f64) -> Option<f64> {
    let m = s.m();
    let shift = DMatrix::<Complex64>::identity(m, m) * Complex64::new(margin, 0.0);
    let mut best = f64::INFINITY;
    for t in half_grid(DEFAULT_GRID.max(2 * (s.n() + 1))) {
        let chol = hermitian_cholesky(eval_poly(s, t) - &shift)?;
        let lt = eval_poly(l, t);
        let y = chol.l_dirty().solve_lower_triangular(&lt)?;
        let w = chol.l_dirty().solve_lower_triangular(&y.adjoint())?;
        let top = *hermitian_eigenvalues(&w).last()?;
        if top > 0.0 {
            best = best.min(1.0 / top);
        }
    }
    best.is_finite().then_some(best)
}

fn check_generator_args(density: f64, margin: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density {density} outside [0, 1]")));
    }
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    Ok(())
}

/// Lags `R_0 … R_count` of the process whose inverse spectrum is `Σ − Λ`.
pub fn exact_lags(g: &GroundTruth, count: usize) -> Result<Vec<DMatrix<f64>>> {
    lags_of_inverse(&g.inverse_spectrum(), count, LAG_GRID)
}

/// `R_k = ∫ e^{ikθ} Φ(e^{iθ})` with `Φ = (Σ(e^{iθ}))⁻¹`, by the trapezoid rule
/// on a uniform grid of `gridsize` (even) points.
pub fn lags_of_inverse(inv: &MatrixPoly, count: usize, gridsize: usize) -> Result<Vec<DMatrix<f64>>> {
    let m = inv.m();
    let gridsize = gridsize.max(2 * (count + 1)) & !1;
    let half = gridsize / 2;
    let mut lags = vec![DMatrix::<f64>::zeros(m, m); count + 1];
    for g in 0..=half {
        let theta = 2.0 * PI * g as f64 / gridsize as f64;
        let sigma = eval_poly(inv, theta);
        let chol = hermitian_cholesky(sigma)
            .ok_or_else(|| Error::NotPositiveDefinite(format!("inverse spectrum at θ = {theta:.6}")))?;
        let phi = chol.inverse();
        let weight = if g == 0 || g == half { 1.0 } else { 2.0 };
        for (k, lag) in lags.iter_mut().enumerate() {
            let ph = Complex64::from_polar(weight, k as f64 * theta);
            for a in 0..m {
                for b in 0..m {
                    lag[(a, b)] += (ph * phi[(a, b)]).re;
                }
            }
        }
    }
    for lag in lags.iter_mut() {
        *lag /= gridsize as f64;
    }
    lags[0] = symmetrize(&lags[0]);
    Ok(lags)
}

/// Order-`n` Yule–Walker fit from lags `R_0 … R_n`: the block Schur
/// complement of `T(R)` is the innovation covariance and the predictor stack
/// gives `A_k`.
pub fn yule_walker(lags: &[DMatrix<f64>]) -> Result<ARModel> {
    let r = MatrixPoly::new(lags.to_vec())?;
    yule_walker_poly(&r)
}

pub fn yule_walker_poly(r: &MatrixPoly) -> Result<ARModel> {
    let (m, n) = (r.m(), r.n());
    let (w, a) =
        block_schur(&toeplitz(r)).map_err(|_| Error::NotPositiveDefinite("Toeplitz matrix of the lags".into()))?;
    if chol_logdet(&w).is_none() {
        return Err(Error::NotPositiveDefinite("Toeplitz matrix of the lags".into()));
    }
    let coeffs = (1..=n).map(|k| a.view((k * m, 0), (m, m)).transpose()).collect();
    ARModel::new(coeffs, w)
}

/// Simulates `N` samples after `burnin` discarded steps from a zero state.
pub fn simulate(model: &ARModel, big_n: usize, seed: u64, burnin: Option<usize>) -> Result<TimeSeries> {
    let rho = model.spectral_radius();
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let burnin = burnin.unwrap_or_else(|| model.default_burnin());
    let (m, n) = (model.m(), model.n());
    let chol_l = Cholesky::new(model.innovation_cov().clone())
        .ok_or_else(|| Error::NotPositiveDefinite("innovation covariance".into()))?
        .l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = burnin + big_n;
    // ring buffer of the last n states, most recent first
    let mut history: Vec<DVector<f64>> = vec![DVector::zeros(m); n];
    let mut out = DMatrix::zeros(big_n, m);
    for t in 0..total {
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut y = &chol_l * z;
        for (ak, past) in model.coefficients().iter().zip(&history) {
            y -= ak * past;
        }
        if n > 0 {
            history.rotate_right(1);
            history[0] = y.clone();
        }
        if t >= burnin {
            out.set_row(t - burnin, &y.transpose());
        }
    }
    TimeSeries::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsdata::covariance_lags;

    #[test]
    fn white_spectrum_lags() {
        let g = GroundTruth::from_parts(MatrixPoly::identity(3, 2), None, None, vec![], 0).unwrap();
        let lags = exact_lags(&g, 3).unwrap();
        assert!((&lags[0] - DMatrix::identity(3, 3)).amax() < 1e-10);
        for lag in &lags[1..] {
            assert!(lag.amax() < 1e-10);
        }
    }

    #[test]
    fn scalar_closed_form_lag() {
        // ∫ dθ/2π (2 + cos θ)⁻¹ = 1/√(a² − b²) with a = 2, b = 1
        assert!(lags_of_inverse(&MatrixPoly::scalar(&[1.0, 3.0]), 1, 64).is_err());
        let lags = lags_of_inverse(&MatrixPoly::scalar(&[2.0, 1.0]), 1, LAG_GRID).unwrap();
        assert!((lags[0][(0, 0)] - 1.0 / 3f64.sqrt()).abs() < 1e-8);
        // R_1 = −(2 − √3)/√3 from the geometric series of the AR(1) factor
        let want = -(2.0 - 3f64.sqrt()) / 3f64.sqrt();
        assert!((lags[1][(0, 0)] - want).abs() < 1e-8);
    }

    #[test]
    fn yule_walker_examples() {
        let ar = yule_walker(&[DMatrix::identity(2, 2), DMatrix::zeros(2, 2)]).unwrap();
        assert_eq!(ar.coefficients()[0], DMatrix::zeros(2, 2));
        assert_eq!(ar.innovation_cov(), &DMatrix::identity(2, 2));

        let ar = yule_walker(&[DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.5)]).unwrap();
        assert!((ar.coefficients()[0][(0, 0)] + 0.5).abs() < 1e-15);
        assert!((ar.innovation_cov()[(0, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn yule_walker_rejects_singular() {
        let r = [DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0)];
        assert!(yule_walker(&r).is_err());
    }

    #[test]
    fn yule_walker_residual_on_exact_lags() {
        let g = random_sparse_inverse(4, 2, 0.3, 0.1, 3).unwrap();
        let lags = exact_lags(&g, 4).unwrap();
        let lag = |k: i64| -> DMatrix<f64> {
            if k >= 0 {
                lags[k as usize].clone()
            } else {
                lags[(-k) as usize].transpose()
            }
        };
        // E[e(t) y(t−k)ᵀ] = 0 for k ≥ 1: R_k + Σ_j A_j R_{k−j} = 0
        for k in 1..=4i64 {
            let mut res = lag(k);
            for (j, aj) in g.ar.coefficients().iter().enumerate() {
                res += aj * lag(k - (j as i64 + 1));
            }
            assert!(res.amax() < 1e-6, "k = {k}: {}", res.amax());
        }
    }

    #[test]
    fn yule_walker_recovers_sigma() {
        for seed in 0..3 {
            let g = random_sparse_inverse(5, 2, 0.2, 0.1, seed).unwrap();
            let x = g.ar.inverse_spectrum_factor();
            let s_hat = adjoint_d(&x);
            let err = (&s_hat - &g.s).norm() / g.s.norm();
            assert!(err < 1e-5, "relative error {err}");
        }
    }

    #[test]
    fn sparse_generator_contract() {
        let g = random_sparse_inverse(6, 1, 0.0, 0.1, 1).unwrap();
        assert!(g.support.is_empty());
        for blk in g.s.blocks() {
            for a in 0..6 {
                for b in 0..6 {
                    if a != b {
                        assert_eq!(blk[(a, b)], 0.0);
                    }
                }
            }
        }
        let g1 = random_sparse_inverse(8, 2, 0.3, 0.2, 42).unwrap();
        let g2 = random_sparse_inverse(8, 2, 0.3, 0.2, 42).unwrap();
        assert_eq!(g1.s, g2.s);
        assert_eq!(g1.support, g2.support);
        assert_eq!(g1.ar, g2.ar);
        assert!(grid_min_eig(&g1.s, DEFAULT_GRID) >= 0.2);
        assert_eq!(g1.support.len(), pair_count(8, 0.3));
        // off-support pairs are exactly zero in every block
        for j in 0..8 {
            for h in 0..j {
                if !g1.support.contains(&(j, h)) {
                    for blk in g1.s.blocks() {
                        assert_eq!(blk[(j, h)], 0.0);
                        assert_eq!(blk[(h, j)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn latent_generator_contract() {
        let g = random_latent_inverse(6, 1, 0.2, 2, 0.1, 5).unwrap();
        let h = g.h.as_ref().unwrap();
        let ev = crate::linalg::sym_eigenvalues(h.matrix());
        assert_eq!(ev.iter().filter(|&&v| v > 1e-10).count(), 2);
        assert!(grid_min_eig(&g.inverse_spectrum(), DEFAULT_GRID) >= 0.1 - 1e-12);
        assert!(grid_min_eig(g.l.as_ref().unwrap(), DEFAULT_GRID) >= -1e-10);
        assert!(random_latent_inverse(4, 1, 0.2, 4, 0.1, 5).is_err());
    }

    #[test]
    fn ground_truth_json_round_trip() {
        let g = random_latent_inverse(4, 1, 0.5, 1, 0.1, 8).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: GroundTruth = serde_json::from_str(&s).unwrap();
        assert_eq!(back.s, g.s);
        assert_eq!(back.l, g.l);
        assert_eq!(back.support, g.support);
        assert_eq!(back.r, 1);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v["H"].is_array());
        assert_eq!(v["pair_count"], g.support.len());
    }

    #[test]
    fn simulate_is_deterministic_and_white_when_a_is_zero() {
        let model = ARModel::new(vec![DMatrix::zeros(2, 2)], DMatrix::identity(2, 2)).unwrap();
        let a = simulate(&model, 20_000, 3, None).unwrap();
        let b = simulate(&model, 20_000, 3, None).unwrap();
        assert_eq!(a, b);
        let r = covariance_lags(&a, 0).unwrap();
        assert!((r.block(0) - DMatrix::identity(2, 2)).amax() < 0.05);
    }

    #[test]
    fn ar1_autocorrelation() {
        let model = ARModel::new(vec![DMatrix::from_element(1, 1, -0.9)], DMatrix::identity(1, 1)).unwrap();
        let y = simulate(&model, 100_000, 17, None).unwrap();
        let r = covariance_lags(&y, 1).unwrap();
        let rho1 = r.block(1)[(0, 0)] / r.block(0)[(0, 0)];
        assert!((rho1 - 0.9).abs() < 0.02, "lag-1 autocorrelation {rho1}");
    }

    #[test]
    fn unstable_model_is_rejected() {
        let model = ARModel::new(vec![DMatrix::from_element(1, 1, -1.1)], DMatrix::identity(1, 1)).unwrap();
        assert!(matches!(simulate(&model, 10, 0, None), Err(Error::Unstable(_))));
    }

    #[test]
    fn generated_models_are_stable() {
        for seed in 0..5 {
            let g = random_sparse_inverse(6, 2, 0.2, 0.1, seed).unwrap();
            assert!(g.ar.is_stable());
            assert!(g.ar.default_burnin() <= 5000);
        }
    }
}
