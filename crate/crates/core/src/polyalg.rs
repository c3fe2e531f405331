//! Matrix pseudo-polynomials `Y = [Y_0, …, Y_n]` and the operators that tie
//! them to symmetric `m(n+1)`-dimensional block matrices.
//!
//! A polynomial `S` represents the Hermitian function on the unit circle
//!
//! ```text
//! Σ(e^{iθ}) = S_0 + ½ Σ_{k=1..n} (S_k e^{−ikθ} + S_kᵀ e^{ikθ})
//! ```
//!
//! and every such function can be written as `Δ X Δ*` with
//! `Δ = [I, e^{iθ}I, …, e^{inθ}I]` and `X` symmetric; then `S = D(X)`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::{Cholesky, DMatrix, DMatrixView, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{asymmetry, chol_logdet, symmetrize};
use crate::{Error, Result};

/// Default number of angles used for spectral positivity checks.
pub const DEFAULT_GRID: usize = 512;

const ASYMMETRY_WARN: f64 = 1e-8;

/// Coefficient list `[Y_0, …, Y_n]` of `m×m` blocks, `Y_0` symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct MatrixPoly {
    m: usize,
    blocks: Vec<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    m: usize,
    n: usize,
    blocks: Vec<Vec<f64>>,
}

impl TryFrom<PolyRepr> for MatrixPoly {
    type Error = Error;

    fn try_from(r: PolyRepr) -> Result<Self> {
        if r.blocks.len() != r.n + 1 {
            return Err(Error::Dimension(format!("expected {} blocks, found {}", r.n + 1, r.blocks.len())));
        }
        let mut blocks = Vec::with_capacity(r.n + 1);
        for (k, b) in r.blocks.iter().enumerate() {
            if b.len() != r.m * r.m {
                return Err(Error::Dimension(format!("block {k} has {} entries, expected {}", b.len(), r.m * r.m)));
            }
            blocks.push(DMatrix::from_row_slice(r.m, r.m, b));
        }
        MatrixPoly::new(blocks)
    }
}

impl From<MatrixPoly> for PolyRepr {
    fn from(p: MatrixPoly) -> Self {
        let blocks = p.blocks.iter().map(|b| b.transpose().iter().copied().collect()).collect();
        PolyRepr { m: p.m, n: p.n(), blocks }
    }
}

impl MatrixPoly {
    /// Builds a polynomial from its blocks. `Y_0` is symmetrized; an
    /// asymmetry above `1e-8` (relative) is logged.
    pub fn new(mut blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::Dimension("a polynomial needs at least Y_0".into()))?;
        let m = first.nrows();
        if m == 0 {
            return Err(Error::Dimension("block dimension must be positive".into()));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.nrows() != m || b.ncols() != m {
                return Err(Error::Dimension(format!("block {k} is {}x{}, expected {m}x{m}", b.nrows(), b.ncols())));
            }
        }
        let asym = asymmetry(&blocks[0]);
        if asym > ASYMMETRY_WARN {
            log::warn!("Y_0 asymmetry {asym:.3e} removed by symmetrization");
        }
        blocks[0] = symmetrize(&blocks[0]);
        Ok(Self { m, blocks })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self { m, blocks: vec![DMatrix::zeros(m, m); n + 1] }
    }

    /// `[I, 0, …, 0]`.
    pub fn identity(m: usize, n: usize) -> Self {
        let mut p = Self::zeros(m, n);
        p.blocks[0] = DMatrix::identity(m, m);
        p
    }

    /// Scalar (`m = 1`) polynomial from its coefficients.
    pub fn scalar(coeffs: &[f64]) -> Self {
        Self { m: 1, blocks: coeffs.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block(&self, k: usize) -> &DMatrix<f64> {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// Mutable access to a block; callers must keep `Y_0` symmetric.
    pub(crate) fn block_mut(&mut self, k: usize) -> &mut DMatrix<f64> {
        &mut self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<DMatrix<f64>> {
        self.blocks
    }

    /// `⟨Y, Z⟩ = tr(Y Zᵀ)` summed over blocks.
    pub fn dot(&self, other: &MatrixPoly) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> MatrixPoly {
        MatrixPoly { m: self.m, blocks: self.blocks.iter().map(|b| b * s).collect() }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &MatrixPoly) -> MatrixPoly {
        MatrixPoly { m: self.m, blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_same_shape(&self, other: &MatrixPoly) {
        assert!(
            self.m == other.m && self.blocks.len() == other.blocks.len(),
            "shape mismatch: ({}, {}) vs ({}, {})",
            self.m,
            self.n(),
            other.m,
            other.n()
        );
    }
}

impl Add for &MatrixPoly {
    type Output = MatrixPoly;

    fn add(self, rhs: &MatrixPoly) -> MatrixPoly {
        self.check_same_shape(rhs);
        self.axpy(1.0, rhs)
    }
}

impl Sub for &MatrixPoly {
    type Output = MatrixPoly;

    fn sub(self, rhs: &MatrixPoly) -> MatrixPoly {
        self.check_same_shape(rhs);
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &MatrixPoly {
    type Output = MatrixPoly;

    fn mul(self, s: f64) -> MatrixPoly {
        self.scale(s)
    }
}

/// Symmetric `m(n+1) × m(n+1)` matrix viewed as an `(n+1)×(n+1)` grid of
/// `m×m` blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockRepr", into = "BlockRepr")]
pub struct BlockSym {
    m: usize,
    n: usize,
    mat: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct BlockRepr {
    m: usize,
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<BlockRepr> for BlockSym {
    type Error = Error;

    fn try_from(r: BlockRepr) -> Result<Self> {
        let size = r.m * (r.n + 1);
        if r.rows.len() != size || r.rows.iter().any(|row| row.len() != size) {
            return Err(Error::Dimension(format!("block matrix must be {size}x{size}")));
        }
        let flat: Vec<f64> = r.rows.into_iter().flatten().collect();
        BlockSym::new(r.m, r.n, DMatrix::from_row_slice(size, size, &flat))
    }
}

impl From<BlockSym> for BlockRepr {
    fn from(b: BlockSym) -> Self {
        BlockRepr { m: b.m, n: b.n, rows: matrix_rows(&b.mat) }
    }
}

pub(crate) fn matrix_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Alias kept for the operator's name: `T(Y)` is a block-Toeplitz instance of [`BlockSym`].
pub type BlockToeplitz = BlockSym;

impl BlockSym {
    /// Wraps a square matrix of size `m(n+1)`, symmetrizing it.
    pub fn new(m: usize, n: usize, mat: DMatrix<f64>) -> Result<Self> {
        let size = m * (n + 1);
        if mat.nrows() != size || mat.ncols() != size {
            return Err(Error::Dimension(format!("expected {size}x{size}, got {}x{}", mat.nrows(), mat.ncols())));
        }
        let asym = asymmetry(&mat);
        if asym > ASYMMETRY_WARN {
            log::warn!("block matrix asymmetry {asym:.3e} removed by symmetrization");
        }
        Ok(Self { m, n, mat: symmetrize(&mat) })
    }

    pub(crate) fn from_sym_unchecked(m: usize, n: usize, mat: DMatrix<f64>) -> Self {
        debug_assert_eq!(mat.nrows(), m * (n + 1));
        Self { m, n, mat }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        let size = m * (n + 1);
        Self::from_sym_unchecked(m, n, DMatrix::zeros(size, size))
    }

    pub fn identity(m: usize, n: usize) -> Self {
        let size = m * (n + 1);
        Self::from_sym_unchecked(m, n, DMatrix::identity(size, size))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.m * (self.n + 1)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Block in position `(h, j)`.
    pub fn block(&self, h: usize, j: usize) -> DMatrixView<'_, f64> {
        let m = self.m;
        self.mat.view((h * m, j * m), (m, m))
    }

    pub fn dot(&self, other: &BlockSym) -> f64 {
        self.mat.dot(&other.mat)
    }

    pub fn scale(&self, s: f64) -> BlockSym {
        Self::from_sym_unchecked(self.m, self.n, &self.mat * s)
    }
}

impl Add for &BlockSym {
    type Output = BlockSym;

    fn add(self, rhs: &BlockSym) -> BlockSym {
        BlockSym::from_sym_unchecked(self.m, self.n, &self.mat + &rhs.mat)
    }
}

impl Sub for &BlockSym {
    type Output = BlockSym;

    fn sub(self, rhs: &BlockSym) -> BlockSym {
        BlockSym::from_sym_unchecked(self.m, self.n, &self.mat - &rhs.mat)
    }
}

/// The Toeplitz operator `T`: block `(h, j)` is `Y_{j−h}` for `j ≥ h` and
/// `Y_{h−j}ᵀ` otherwise.
pub fn toeplitz(y: &MatrixPoly) -> BlockSym {
    let (m, n) = (y.m(), y.n());
    let size = m * (n + 1);
    let mut t = DMatrix::zeros(size, size);
    for h in 0..=n {
        for j in 0..=n {
            let blk = if j >= h { y.block(j - h).clone() } else { y.block(h - j).transpose() };
            t.view_mut((h * m, j * m), (m, m)).copy_from(&blk);
        }
    }
    BlockSym::from_sym_unchecked(m, n, t)
}

/// Adjoint `D` of [`toeplitz`]: `D_0 = Σ_h X_hh`, `D_k = 2 Σ_h X_{h,h+k}`.
pub fn adjoint_d(x: &BlockSym) -> MatrixPoly {
    adjoint_d_raw(x.m(), x.n(), x.matrix())
}

/// [`adjoint_d`] on a raw (assumed symmetric) matrix of size `m(n+1)`.
pub fn adjoint_d_raw(m: usize, n: usize, x: &DMatrix<f64>) -> MatrixPoly {
    let mut blocks = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut acc = DMatrix::zeros(m, m);
        for h in 0..=(n - k) {
            acc += x.view((h * m, (h + k) * m), (m, m));
        }
        if k > 0 {
            acc *= 2.0;
        }
        blocks.push(acc);
    }
    blocks[0] = symmetrize(&blocks[0]);
    MatrixPoly { m, blocks }
}

/// `Σ(e^{iθ}) = S_0 + ½ Σ_k (S_k e^{−ikθ} + S_kᵀ e^{ikθ})`.
///
/// Only the upper triangle is accumulated; the lower triangle is filled by
/// conjugation and the diagonal is real, so the result is Hermitian exactly.
pub fn eval_poly(s: &MatrixPoly, theta: f64) -> DMatrix<Complex64> {
    let m = s.m();
    let phases: Vec<Complex64> = (1..=s.n()).map(|k| Complex64::from_polar(0.5, -(k as f64) * theta)).collect();
    let mut out = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for a in 0..m {
        for b in a..m {
            let mut v = Complex64::new(s.block(0)[(a, b)], 0.0);
            for (k, ph) in phases.iter().enumerate() {
                let sk = s.block(k + 1);
                v += ph * sk[(a, b)] + ph.conj() * sk[(b, a)];
            }
            if a == b {
                v.im = 0.0;
            }
            out[(a, b)] = v;
            out[(b, a)] = v.conj();
        }
    }
    out
}

/// `q_jh(S)`: largest absolute coefficient among `(S_0)_{jh}`, `(S_k)_{jh}` and
/// `(S_k)_{hj}`, `k ≥ 1`. Indices are zero-based with `h ≤ j`.
pub fn group_maxnorm(s: &MatrixPoly, j: usize, h: usize) -> Result<f64> {
    let m = s.m();
    if j >= m || h > j {
        return Err(Error::Index { j, h, m });
    }
    Ok(group_maxnorm_unchecked(s, j, h))
}

pub(crate) fn group_maxnorm_unchecked(s: &MatrixPoly, j: usize, h: usize) -> f64 {
    let mut q = s.block(0)[(j, h)].abs();
    for blk in &s.blocks[1..] {
        q = q.max(blk[(j, h)].abs()).max(blk[(h, j)].abs());
    }
    q
}

/// Uniform grid of `size` angles in `(−π, π]`, containing `0` (and `π` when
/// `size` is even).
pub fn spectral_grid(size: usize) -> Vec<f64> {
    (0..size)
        .map(|g| {
            let t = 2.0 * PI * g as f64 / size as f64;
            if t > PI {
                t - 2.0 * PI
            } else {
                t
            }
        })
        .collect()
}

/// The nonnegative half of [`spectral_grid`]; evaluations at `−θ` are complex
/// conjugates, so spectra and moduli need only this half.
pub fn half_grid(size: usize) -> Vec<f64> {
    spectral_grid(size).into_iter().filter(|&t| t >= 0.0).collect()
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Cholesky factorization of a Hermitian matrix, `None` unless it is
/// positive definite. The complex factorization does not reject negative
/// pivots by itself (their square roots are imaginary), so the diagonal of
/// the factor is checked.
pub fn hermitian_cholesky(a: DMatrix<Complex64>) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(a)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(chol)
}

/// Minimum eigenvalue of `Σ(e^{iθ})` over a uniform grid of `gridsize` angles.
pub fn grid_min_eig(s: &MatrixPoly, gridsize: usize) -> f64 {
    let gridsize = gridsize.max(2 * (s.n() + 1));
    half_grid(gridsize).into_iter().map(|t| hermitian_eigenvalues(&eval_poly(s, t))[0]).fold(f64::INFINITY, f64::min)
}

/// Samples of a Hermitian function on a uniform grid.
#[derive(Debug, Clone)]
pub struct SpectrumSamples {
    pub grid: Vec<f64>,
    pub values: Vec<DMatrix<Complex64>>,
}

impl SpectrumSamples {
    pub fn of(s: &MatrixPoly, gridsize: usize) -> Self {
        let grid = spectral_grid(gridsize);
        let values = grid.iter().map(|&t| eval_poly(s, t)).collect();
        Self { grid, values }
    }

    /// Only the angles in `[0, π]`.
    pub fn half(s: &MatrixPoly, gridsize: usize) -> Self {
        let grid = half_grid(gridsize);
        let values = grid.iter().map(|&t| eval_poly(s, t)).collect();
        Self { grid, values }
    }
}

/// Schur complement of the leading block: `W = B₀₀ − B₀₁B₁₁⁻¹B₁₀` and the
/// predictor stack `a = [I; −B₁₁⁻¹B₁₀]`, so that `B·a = [W; 0]`.
pub fn block_schur(b: &BlockSym) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (m, n) = (b.m(), b.n());
    if n == 0 {
        return Ok((b.matrix().clone(), DMatrix::identity(m, m)));
    }
    let size = b.size();
    let mat = b.matrix();
    let b11 = mat.view((m, m), (size - m, size - m)).into_owned();
    let b10 = mat.view((m, 0), (size - m, m)).into_owned();
    let (chol, _) =
        chol_logdet(&b11).ok_or_else(|| Error::Infeasible("trailing block B11 is not positive definite".into()))?;
    let sol = chol.solve(&b10);
    let w = symmetrize(&(mat.view((0, 0), (m, m)) - b10.transpose() * &sol));
    let mut a = DMatrix::zeros(size, m);
    a.view_mut((0, 0), (m, m)).fill_with_identity();
    a.view_mut((m, 0), (size - m, m)).copy_from(&(-sol));
    Ok((w, a))
}
