//! Small seeded Monte Carlo studies whose expected outcome is known from the
//! generating model.

use argraph::armodel::{random_sparse_inverse, simulate, GroundTruth};
use argraph::baseline::{default_sparse_grid, run_grid, solve_fixed, FixedOptions};
use argraph::ebayes::{run_latent_eb, run_sparse_eb, EBConfig};
use argraph::evalx::{evaluate, Thresholds};
use argraph::montecarlo::{run_montecarlo, ExperimentConfig};
use argraph::tsdata::covariance_lags;
use argraph::MatrixPoly;

fn sample(g: &GroundTruth, samples: usize, seed: u64) -> (MatrixPoly, f64) {
    let y = simulate(&g.ar, samples, seed, None).unwrap();
    let n = g.n();
    (covariance_lags(&y, n).unwrap(), (samples - n) as f64)
}

#[test]
fn diagonal_model_yields_an_empty_graph() {
    let th = Thresholds::default();
    let mut empty = 0;
    for seed in 0..20u64 {
        let g = random_sparse_inverse(5, 1, 0.0, 0.1, seed).unwrap();
        assert!(g.support.is_empty());
        let (rhat, nn) = sample(&g, 2000, 1000 + seed);
        let (est, _) = run_sparse_eb(&rhat, nn, &EBConfig::default()).unwrap();
        empty += usize::from(evaluate(&est, &g, &th).unwrap().support_hat.is_empty());
    }
    assert!(empty >= 18, "empty support in only {empty} of 20 trials");
}

#[test]
fn purely_sparse_model_yields_no_latent_rank() {
    let th = Thresholds::default();
    let mut zero = 0;
    for seed in 0..20u64 {
        let g = random_sparse_inverse(10, 1, 0.1, 0.1, seed).unwrap();
        let (rhat, nn) = sample(&g, 2000, 2000 + seed);
        let (est, _) = run_latent_eb(&rhat, nn, &EBConfig::default()).unwrap();
        zero += usize::from(evaluate(&est, &g, &th).unwrap().rank_hat == 0);
    }
    assert!(zero >= 16, "rank 0 in only {zero} of 20 trials");
}

#[test]
fn bic_selection_beats_the_worst_grid_point() {
    let th = Thresholds::default();
    let opts = FixedOptions::default();
    let mut ok = 0;
    for seed in 0..20u64 {
        let g = random_sparse_inverse(5, 1, 0.3, 0.1, 300 + seed).unwrap();
        let (rhat, nn) = sample(&g, 1000, 3000 + seed);
        let spec = default_sparse_grid(&rhat, nn, 9, &opts).unwrap();
        let chosen = run_grid(&rhat, nn, &spec, &opts, Some(&g)).unwrap();
        let selected = evaluate(&chosen.estimate, &g, &th).unwrap().e_sp;
        let worst = spec
            .gammas
            .iter()
            .map(|&gamma| {
                let est = solve_fixed(&rhat, nn, gamma, None, &opts).unwrap();
                evaluate(&est, &g, &th).unwrap().e_sp
            })
            .fold(f64::NEG_INFINITY, f64::max);
        ok += usize::from(selected <= worst);
    }
    assert!(ok >= 19, "selection no worse than the worst grid point in only {ok} of 20 trials");
}

#[test]
fn desk_sparse_medians_are_in_range() {
    let out = run_montecarlo(&ExperimentConfig::preset("desk-sparse").unwrap()).unwrap();
    assert_eq!(out.summary.failures, 0);
    for s in &out.summary.estimators {
        let e = s.e.expect("completed trials").median;
        assert!(e > 0.0 && e < 5.0, "{}: median e {e}", s.estimator);
        assert!(s.e_sp.expect("completed trials").median.is_finite());
    }
}
