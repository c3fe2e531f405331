use argraph::ebayes::update_gamma;
use argraph::latentdual::psd_project;
use argraph::linalg::{max_eig, min_eig};
use argraph::montecarlo::{derive_seed, BoxStats};
use argraph::oracles::brute_force_l1_projection;
use argraph::polyalg::{adjoint_d, eval_poly, group_maxnorm, toeplitz, BlockSym};
use argraph::sparsedual::{group_load, project_group_ball, project_weighted_l1, WeightSet};
use argraph::tsdata::{covariance_lags, TimeSeries};
use argraph::MatrixPoly;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn poly(m: usize, n: usize) -> impl Strategy<Value = MatrixPoly> {
    prop::collection::vec(-1.0f64..1.0, m * m * (n + 1)).prop_map(move |v| {
        let mut blocks: Vec<DMatrix<f64>> = v.chunks(m * m).map(|c| DMatrix::from_column_slice(m, m, c)).collect();
        blocks[0] = (&blocks[0] + blocks[0].transpose()) * 0.5;
        MatrixPoly::new(blocks).unwrap()
    })
}

fn sym(size: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, size * size).prop_map(move |v| {
        let a = DMatrix::from_column_slice(size, size, &v);
        (&a + a.transpose()) * 0.5
    })
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..5, 0usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toeplitz_and_its_adjoint_are_adjoint(
        (y, x) in dims().prop_flat_map(|(m, n)| (poly(m, n), sym(m * (n + 1)).prop_map(move |x| BlockSym::new(m, n, x).unwrap())))
    ) {
        let lhs = toeplitz(&y).dot(&x);
        let rhs = y.dot(&adjoint_d(&x));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn toeplitz_blocks_follow_the_lag_pattern(y in poly(3, 2)) {
        let t = toeplitz(&y);
        let mat = t.matrix();
        prop_assert!((mat - mat.transpose()).norm() == 0.0);
        for h in 0..=2 {
            for j in h..=2 {
                prop_assert_eq!(t.block(h, j).into_owned(), y.block(j - h).clone());
            }
        }
    }

    #[test]
    fn spectrum_is_hermitian_and_real_coefficient_symmetric(y in poly(3, 2), theta in -3.2f64..3.2) {
        let a = eval_poly(&y, theta);
        prop_assert!((&a - a.adjoint()).norm() < 1e-12);
        let b = eval_poly(&y, -theta);
        prop_assert!((a - b.conjugate()).norm() < 1e-12);
    }

    #[test]
    fn weighted_l1_projection_matches_enumeration(
        v in prop::collection::vec(-3.0f64..3.0, 1..=5),
        wseed in prop::collection::vec(0.1f64..3.0, 5),
        radius in 0.0f64..3.0,
    ) {
        let w = &wseed[..v.len()];
        let p = project_weighted_l1(&v, w, radius);
        let load: f64 = p.iter().zip(w).map(|(x, wi)| wi * x.abs()).sum();
        prop_assert!(load <= radius + 1e-9);
        let oracle = brute_force_l1_projection(&v, w, radius);
        for (a, b) in p.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-8, "{:?} vs {:?}", p, oracle);
        }
        let again = project_weighted_l1(&p, w, radius);
        for (a, b) in again.iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn group_ball_projection_is_feasible_and_idempotent(
        z in poly(3, 1).prop_map(|z| z.scale(2.0)),
        g in prop::collection::vec(0.1f64..5.0, 9),
    ) {
        let mut gam = DMatrix::from_column_slice(3, 3, &g);
        gam = (&gam + gam.transpose()) * 0.5;
        let w = WeightSet::new(gam, None, 20.0).unwrap();
        let p = project_group_ball(&z, &w);
        prop_assert!(p.blocks()[0] == p.blocks()[0].transpose());
        for j in 0..3 {
            for h in 0..=j {
                prop_assert!(group_load(&p, j, h) <= w.budget(j, h) * (1.0 + 1e-12) + 1e-12);
            }
        }
        let again = project_group_ball(&p, &w);
        prop_assert!((again.axpy(-1.0, &p)).norm() <= 1e-12);
    }

    #[test]
    fn psd_projection_properties(a in sym(5)) {
        let p = psd_project(&a);
        prop_assert!(min_eig(&p) >= -1e-12);
        prop_assert!((psd_project(&p) - &p).norm() <= 1e-12);
        // the residual is negative semidefinite and orthogonal to the projection
        let r = &a - &p;
        prop_assert!(max_eig(&r) <= 1e-12);
        prop_assert!(r.dot(&p).abs() <= 1e-10);
    }

    #[test]
    fn covariance_lags_match_a_double_loop(
        (m, n) in (1usize..4, 0usize..3),
        raw in prop::collection::vec(-2.0f64..2.0, 150),
        len in 4usize..=50,
    ) {
        let len = len.max(n + 2);
        let need = len * m;
        prop_assume!(raw.len() >= need);
        let samples = DMatrix::from_row_slice(len, m, &raw[..need]);
        let y = TimeSeries::new(samples.clone()).unwrap();
        let r = covariance_lags(&y, n).unwrap();
        for k in 0..=n {
            for a in 0..m {
                for b in 0..m {
                    let mut s = 0.0;
                    for t in 0..len - k {
                        s += samples[(t + k, a)] * samples[(t, b)];
                    }
                    let want = if k == 0 {
                        let mut s2 = 0.0;
                        for t in 0..len {
                            s2 += samples[(t, b)] * samples[(t, a)];
                        }
                        0.5 * (s + s2)
                    } else {
                        s
                    } / (len - n) as f64;
                    prop_assert!((r.block(k)[(a, b)] - want).abs() <= 1e-12 * (1.0 + want.abs()));
                }
            }
        }
        let neg = covariance_lags(&TimeSeries::new(-samples).unwrap(), n).unwrap();
        prop_assert_eq!(neg, r);
    }

    #[test]
    fn gamma_update_is_symmetric_positive_and_bounded(s in poly(4, 2), eps in 1e-4f64..1e-1) {
        let g = update_gamma(&s, eps);
        prop_assert!((&g - g.transpose()).norm() == 0.0);
        for j in 0..4 {
            for h in 0..=j {
                let k = if j == h { 3.0 } else { 5.0 };
                let q = group_maxnorm(&s, j, h).unwrap();
                prop_assert!(g[(j, h)] > 0.0 && g[(j, h)] <= k / eps);
                prop_assert!((g[(j, h)] * (q + eps) - k).abs() <= 1e-12 * k);
            }
        }
    }

    #[test]
    fn box_stats_are_ordered(v in prop::collection::vec(-100.0f64..100.0, 1..60)) {
        let b = BoxStats::from_values(&v).unwrap();
        prop_assert!(b.min <= b.whisker_low && b.whisker_low <= b.q1);
        prop_assert!(b.q1 <= b.median && b.median <= b.q3);
        prop_assert!(b.q3 <= b.whisker_high && b.whisker_high <= b.max);
        let iqr = b.q3 - b.q1;
        prop_assert!(b.whisker_low >= b.q1 - 1.5 * iqr && b.whisker_high <= b.q3 + 1.5 * iqr);
    }

    #[test]
    fn derived_seeds_ignore_evaluation_order(master in any::<u64>(), trials in 1u64..200) {
        let forward: Vec<u64> = (0..trials).map(|t| derive_seed(master, &[t, 0])).collect();
        let mut backward: Vec<u64> = (0..trials).rev().map(|t| derive_seed(master, &[t, 0])).collect();
        backward.reverse();
        prop_assert_eq!(&forward, &backward);
        let mut uniq = forward.clone();
        uniq.sort_unstable();
        uniq.dedup();
        prop_assert_eq!(uniq.len(), forward.len());
    }
}
