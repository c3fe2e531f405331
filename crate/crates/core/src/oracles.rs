//! Brute-force reference computations that share no code with the solvers,
//! used to cross-check them in tests and in the `selftest` command.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::armodel::{exact_lags, random_sparse_inverse};
use crate::ebayes::{update_gamma, update_q};
use crate::polyalg::{group_maxnorm, MatrixPoly};
use crate::sparsedual::{dual_objective_grad, project_weighted_l1, solve_sparse_dual, SolverOptions, WeightSet};

/// Euclidean projection onto `{x : Σ wᵢ|xᵢ| ≤ radius}` by enumerating every
/// candidate support. Exponential in `v.len()`; meant for groups of a few
/// entries.
pub fn brute_force_l1_projection(v: &[f64], w: &[f64], radius: f64) -> Vec<f64> {
    let k = v.len();
    let load: f64 = v.iter().zip(w).map(|(x, wi)| wi * x.abs()).sum();
    if load <= radius {
        return v.to_vec();
    }
    let mut best = vec![0.0; k];
    let mut best_obj: f64 = v.iter().map(|x| 0.5 * x * x).sum();
    for mask in 1u32..(1 << k) {
        let active: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let sw2: f64 = active.iter().map(|&i| w[i] * w[i]).sum();
        if sw2 == 0.0 {
            continue;
        }
        let lambda = (active.iter().map(|&i| w[i] * v[i].abs()).sum::<f64>() - radius) / sw2;
        if lambda < 0.0 || active.iter().any(|&i| v[i].abs() - lambda * w[i] < 0.0) {
            continue;
        }
        let mut x = vec![0.0; k];
        for &i in &active {
            x[i] = v[i].signum() * (v[i].abs() - lambda * w[i]);
        }
        // weightless coordinates are free
        for i in 0..k {
            if w[i] == 0.0 {
                x[i] = v[i];
            }
        }
        let obj: f64 = x.iter().zip(v).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        if obj < best_obj {
            best_obj = obj;
            best = x;
        }
    }
    best
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + step;
            let up = f(&p);
            p[i] = x[i] - step;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Minimizer of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while (hi - lo) > tol * (1.0 + lo.abs() + hi.abs()) {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// `∫_{[0,∞)ⁿ} exp(−γ max xᵢ) dx` by nested adaptive quadrature, truncated
/// where the integrand is below `e⁻⁶⁰`.
pub fn orthant_integral(n: usize, gamma: f64, tol: f64) -> f64 {
    let upper = 60.0 / gamma;
    // g(d, c) = ∫_{[0,R]^d} exp(−γ max(c, x₁, …, x_d)) dx
    fn g(d: usize, c: f64, gamma: f64, upper: f64, tol: f64) -> f64 {
        if d == 0 {
            return (-gamma * c).exp();
        }
        // the integrand is flat below c: split there
        let inner = |x: f64| g(d - 1, c.max(x), gamma, upper, tol);
        let flat = c.min(upper) * g(d - 1, c, gamma, upper, tol);
        flat + adaptive_simpson(&inner, c.min(upper), upper, tol)
    }
    g(n, 0.0, gamma, upper, tol)
}

/// Relative accuracy requested from the orthant quadrature.
pub const QUADRATURE_TOL: f64 = 1e-6;

/// `(γ⁻ⁿ, nⁿγ⁻ⁿ)`.
pub fn orthant_bounds(n: usize, gamma: f64) -> (f64, f64) {
    let lo = gamma.powi(-(n as i32));
    (lo, (n as f64).powi(n as i32) * lo)
}

/// Maximum-likelihood limit `T⁻¹E (EᵀT⁻¹E)⁻¹ EᵀT⁻¹` with `T = T(R̂)` and `E`
/// the first block column selector, by plain LU.
pub fn unpenalized_x(rhat: &MatrixPoly) -> Option<DMatrix<f64>> {
    let (m, n) = (rhat.m(), rhat.n());
    let size = m * (n + 1);
    let mut t = DMatrix::zeros(size, size);
    for h in 0..=n {
        for j in 0..=n {
            let blk = if j >= h { rhat.block(j - h).clone() } else { rhat.block(h - j).transpose() };
            t.view_mut((h * m, j * m), (m, m)).copy_from(&blk);
        }
    }
    let tinv = t.lu().try_inverse()?;
    let col = tinv.columns(0, m).into_owned();
    let p = col.rows(0, m).into_owned().lu().try_inverse()?;
    Some(&col * p * col.transpose())
}

/// Result of one self-check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, err: f64, tol: f64) -> Check {
    Check { name, passed: err <= tol, detail: format!("error {err:.3e} (tolerance {tol:.0e})") }
}

/// Free coordinates of a polynomial: lower triangle of block 0, then every
/// entry of the higher blocks.
pub fn free_coords(m: usize, n: usize) -> Vec<(usize, usize, usize)> {
    let mut c = Vec::new();
    for a in 0..m {
        for b in 0..=a {
            c.push((0, a, b));
        }
    }
    for k in 1..=n {
        for a in 0..m {
            for b in 0..m {
                c.push((k, a, b));
            }
        }
    }
    c
}

/// Polynomial with the given free coordinates (block 0 mirrored).
pub fn from_free(m: usize, n: usize, x: &[f64]) -> MatrixPoly {
    let mut blocks = vec![DMatrix::zeros(m, m); n + 1];
    for (&(k, a, b), &v) in free_coords(m, n).iter().zip(x) {
        blocks[k][(a, b)] = v;
        if k == 0 {
            blocks[k][(b, a)] = v;
        }
    }
    MatrixPoly::new(blocks).expect("symmetric by construction")
}

/// Derivative along each free coordinate given a Frobenius gradient.
pub fn to_free_gradient(g: &MatrixPoly) -> Vec<f64> {
    free_coords(g.m(), g.n())
        .into_iter()
        .map(|(k, a, b)| if k == 0 && a != b { g.block(0)[(a, b)] + g.block(0)[(b, a)] } else { g.block(k)[(a, b)] })
        .collect()
}

fn random_rhat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> MatrixPoly {
    let g = random_sparse_inverse(m, n, 0.6, 0.2, rng.random()).expect("valid generator arguments");
    MatrixPoly::new(exact_lags(&g, n).expect("stable model")).expect("symmetric lag 0")
}

/// Quick versions of the derived-oracle checks.
pub fn selftest() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut out = Vec::new();

    // scalar problem with closed-form optimum 1/(1 + 2γ/(N−n))
    let rhat = MatrixPoly::scalar(&[1.0]);
    let sol = WeightSet::uniform(1, 1.0, 100.0).and_then(|w| solve_sparse_dual(&rhat, &w, &SolverOptions::default()));
    out.push(match sol {
        Ok(s) => check("scalar analytic optimum", (s.x.matrix()[(0, 0)] - 1.0 / 1.02).abs().max(s.gap), 1e-6),
        Err(e) => Check { name: "scalar analytic optimum", passed: false, detail: e.to_string() },
    });

    // vanishing weights reach the unpenalized optimum
    let rhat = random_rhat(&mut rng, 3, 1);
    let err = WeightSet::uniform(3, 1e-12, 100.0)
        .and_then(|w| solve_sparse_dual(&rhat, &w, &SolverOptions::default()))
        .ok()
        .zip(unpenalized_x(&rhat))
        .map_or(f64::INFINITY, |(s, x)| (s.x.matrix() - &x).norm() / x.norm());
    out.push(check("unregularized limit", err, 1e-6));

    // analytic dual gradient against central differences
    let (m, n) = (3, 1);
    let rhat = random_rhat(&mut rng, m, n);
    let z0: Vec<f64> = (0..free_coords(m, n).len()).map(|_| rng.random_range(-0.02..0.02)).collect();
    let f = |x: &[f64]| dual_objective_grad(&from_free(m, n, x), &rhat).map_or(f64::NAN, |r| r.0);
    let fd = central_difference(f, &z0, 1e-5);
    let err = dual_objective_grad(&from_free(m, n, &z0), &rhat).map_or(f64::INFINITY, |(_, g, _)| {
        let an = to_free_gradient(&g);
        let num: f64 = an.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        num / an.iter().map(|a| a * a).sum::<f64>().sqrt()
    });
    out.push(check("dual gradient", err, 1e-5));

    // weighted-ℓ1 projection against enumeration
    let mut err: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(1..=5);
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        let r = rng.random_range(0.0..2.0);
        let (a, b) = (project_weighted_l1(&v, &w, r), brute_force_l1_projection(&v, &w, r));
        err = err.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    out.push(check("weighted l1 projection", err, 1e-8));

    // weight updates against one-dimensional minimization
    let s = MatrixPoly::new(vec![
        DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]),
        DMatrix::from_row_slice(2, 2, &[0.1, -0.4, 0.2, 0.0]),
    ])
    .expect("symmetric");
    let gam = update_gamma(&s, 1e-3);
    let mut err: f64 = 0.0;
    for (j, h, k) in [(0, 0, 2.0), (1, 1, 2.0), (1, 0, 3.0)] {
        let q = group_maxnorm(&s, j, h).expect("in range") + 1e-3;
        let g = golden_section(|g: f64| g * q - k * g.ln(), 1e-6, 1e5, 1e-13);
        err = err.max((g - gam[(j, h)]).abs() / g);
    }
    let l0 = DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.0, 0.1]);
    let qm = update_q(&l0, 1e-3);
    for i in 0..2 {
        let d = l0[(i, i)] + 1e-3;
        let q = golden_section(|q: f64| q * d - 1.5 * q.ln(), 1e-6, 1e5, 1e-13);
        err = err.max((q - qm[(i, i)]).abs() / q);
    }
    out.push(check("weight updates", err, 1e-6));

    // orthant integral bounds; at n = 1 they coincide, so allow the
    // quadrature tolerance
    let mut worst: f64 = f64::NEG_INFINITY;
    for n in [1usize, 2] {
        for gamma in [0.5, 1.0, 2.0] {
            let (lo, hi) = orthant_bounds(n, gamma);
            let i = orthant_integral(n, gamma, QUADRATURE_TOL * lo);
            worst = worst.max(((lo - i).max(i - hi)) / lo);
        }
    }
    out.push(Check {
        name: "orthant integral bounds",
        passed: worst <= QUADRATURE_TOL,
        detail: format!("largest relative bound violation {worst:.3e} (tolerance {QUADRATURE_TOL:.0e})"),
    });

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn orthant_integral_closed_form() {
        // the integral equals n!/γⁿ
        assert!((orthant_integral(1, 2.0, 1e-10) - 0.5).abs() < 1e-8);
        assert!((orthant_integral(2, 1.0, 1e-10) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        assert!((golden_section(|x| (x - 1.3).powi(2), -5.0, 5.0, 1e-12) - 1.3).abs() < 1e-8);
    }

    #[test]
    fn brute_projection_examples() {
        assert_eq!(brute_force_l1_projection(&[0.1, -0.1], &[1.0, 1.0], 1.0), vec![0.1, -0.1]);
        let x = brute_force_l1_projection(&[3.0, -1.0], &[1.0, 1.0], 1.0);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }
}
