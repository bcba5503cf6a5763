mod common;

use common::{lasso_objective, reference_dataset, subgradient_lasso_best_objective};
use ispw_core::{
    cv_select_lambda, ispw_weights, km_estimate, selection_pattern, tian_fit, weighted_lasso_fit,
    IspwWeightVector, LassoConfig, Link, LossScale, RestrictedDataset,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn weights_for(ds: &RestrictedDataset) -> IspwWeightVector {
    let km = km_estimate(ds).unwrap();
    ispw_weights(ds, &km).unwrap()
}

/// Convention that reproduces the published example fits: standardized
/// covariates, unpenalized intercept, half-weight-sum loss.
fn reproduction_config(lambda: f64) -> LassoConfig {
    LassoConfig {
        lambda,
        link: Link::Log,
        penalize_intercept: false,
        standardize: true,
        loss_scale: LossScale::HalfWeightSum,
        tol: 1e-12,
        ..LassoConfig::default()
    }
}

#[test]
fn reference_fit_lambda_010() {
    let ds = reference_dataset();
    let w = weights_for(&ds);
    let fit = weighted_lasso_fit(&ds, &w, &reproduction_config(0.10)).unwrap();
    assert!(fit.converged);
    let expected = [4.91, 0.0, -0.02, 0.71];
    for (b, e) in fit.beta.iter().zip(expected) {
        assert!((b - e).abs() < 0.05, "got {:?}", fit.beta);
    }
    assert_eq!(fit.beta[1], 0.0, "treatment coefficient must be exactly zero");
    let names: Vec<String> = common::REFERENCE_NAMES.iter().map(|s| s.to_string()).collect();
    assert_eq!(selection_pattern(&fit, &names), vec!["intercept", "age", "sex"]);
}

#[test]
fn reference_fit_lambda_005() {
    let ds = reference_dataset();
    let w = weights_for(&ds);
    let fit = weighted_lasso_fit(&ds, &w, &reproduction_config(0.05)).unwrap();
    let expected = [5.36, 0.0, -0.03, 0.87];
    for (b, e) in fit.beta.iter().zip(expected) {
        assert!((b - e).abs() < 0.05, "got {:?}", fit.beta);
    }
}

#[test]
fn reference_unpenalized_fit_keeps_all_names() {
    let ds = reference_dataset();
    let w = weights_for(&ds);
    let fit = tian_fit(&ds, &w, Link::Log).unwrap();
    let names: Vec<String> = common::REFERENCE_NAMES.iter().map(|s| s.to_string()).collect();
    assert_eq!(selection_pattern(&fit, &names).len(), 4);
}

#[test]
fn unpenalized_fit_satisfies_orthogonality_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let ds = common::random_dataset(&mut rng, 30, 3, 0.2);
        let w = weights_for(&ds);
        let fit = tian_fit(&ds, &w, Link::Log).unwrap();
        let q = ds.q();
        // residual orthogonality sum_i w_i (z_i - x_i' beta) x_i = 0
        let mut moments = vec![0.0; q];
        for (i, r) in ds.records().iter().enumerate() {
            let eta: f64 = r.covariates.iter().zip(&fit.beta).map(|(x, b)| x * b).sum();
            let res = r.time.ln() - eta;
            for j in 0..q {
                moments[j] += w[i] * res * r.covariates[j];
            }
        }
        for m in &moments {
            assert!(m.abs() < 1e-8, "orthogonality violated: {m}");
        }

        // brute-force normal equations via Gaussian elimination
        let mut a = vec![vec![0.0; q + 1]; q];
        for (i, r) in ds.records().iter().enumerate() {
            for j in 0..q {
                for k in 0..q {
                    a[j][k] += w[i] * r.covariates[j] * r.covariates[k];
                }
                a[j][q] += w[i] * r.covariates[j] * r.time.ln();
            }
        }
        for col in 0..q {
            let piv = (col..q).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap()).unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            for k in col..=q {
                a[col][k] /= d;
            }
            for row in 0..q {
                if row != col {
                    let f = a[row][col];
                    for k in col..=q {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
        for j in 0..q {
            assert!((fit.beta[j] - a[j][q]).abs() < 1e-7, "{} vs {}", fit.beta[j], a[j][q]);
        }
    }
}

#[test]
fn objective_nonincreasing_across_sweeps() {
    // rerunning with a growing sweep budget replays the same cyclic path, so
    // the recorded objectives must be monotone
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ds = common::random_dataset(&mut rng, 25, 3, 0.2);
    let w = weights_for(&ds);
    let mut prev = f64::INFINITY;
    for sweeps in 1..12 {
        let config = LassoConfig {
            lambda: 0.07,
            tol: 0.0,
            max_iter: sweeps,
            ..LassoConfig::default()
        };
        let fit = weighted_lasso_fit(&ds, &w, &config).unwrap();
        assert!(fit.objective <= prev + 1e-12);
        prev = fit.objective;
    }
}

#[test]
fn fitted_objective_beats_zero_and_unpenalized_vectors() {
    let ds = reference_dataset();
    let w = weights_for(&ds);
    let config = LassoConfig { lambda: 0.1, tol: 1e-12, ..LassoConfig::default() };
    let fit = weighted_lasso_fit(&ds, &w, &config).unwrap();

    let z: Vec<f64> = ds.records().iter().map(|r| r.time.ln()).collect();
    let x: Vec<Vec<f64>> = ds.records().iter().map(|r| r.covariates.clone()).collect();
    let m = 2.0 / ds.n() as f64;
    let penalty = vec![1.0; 4];
    let at = |beta: &[f64]| lasso_objective(&z, &x, w.weights(), beta, 0.1, &penalty, m);
    assert!(fit.objective <= at(&[0.0; 4]) + 1e-12);
    let unpenalized = tian_fit(&ds, &w, Link::Log).unwrap();
    assert!(fit.objective <= at(&unpenalized.beta) + 1e-12);
}

#[test]
fn weight_and_lambda_scaling_invariance() {
    // scaling weights by c and lambda by c rescales the objective by c under
    // the subject-count loss, leaving the minimizer unchanged
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let ds = common::random_dataset(&mut rng, 20, 2, 0.25);
    let w = weights_for(&ds);
    let c = 3.7;
    let scaled = IspwWeightVector::from_weights(w.weights().iter().map(|v| c * v).collect());
    let base = LassoConfig { lambda: 0.08, tol: 1e-13, ..LassoConfig::default() };
    let fit1 = weighted_lasso_fit(&ds, &w, &base).unwrap();
    let fit2 = weighted_lasso_fit(
        &ds,
        &scaled,
        &LassoConfig { lambda: 0.08 * c, ..base.clone() },
    )
    .unwrap();
    for (a, b) in fit1.beta.iter().zip(&fit2.beta) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn subgradient_oracle_agrees_on_reference_fit() {
    let ds = reference_dataset();
    let w = weights_for(&ds);
    let config = LassoConfig { lambda: 0.1, tol: 1e-13, ..LassoConfig::default() };
    let fit = weighted_lasso_fit(&ds, &w, &config).unwrap();
    let z: Vec<f64> = ds.records().iter().map(|r| r.time.ln()).collect();
    let x: Vec<Vec<f64>> = ds.records().iter().map(|r| r.covariates.clone()).collect();
    let oracle = subgradient_lasso_best_objective(
        &z,
        &x,
        w.weights(),
        0.1,
        &[1.0; 4],
        2.0 / ds.n() as f64,
        400_000,
    );
    assert!(
        (fit.objective - oracle).abs() <= 1e-4,
        "coordinate descent {} vs subgradient oracle {}",
        fit.objective,
        oracle
    );
}

#[test]
fn cross_validation_matches_brute_force_leave_one_out() {
    // leave-one-out via the library must equal an independently coded loop
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ds = common::random_dataset(&mut rng, 24, 2, 0.25);
    let w = weights_for(&ds);
    let n_events = ds.n_events();
    let grid = vec![0.3, 0.1, 0.03];
    let config = LassoConfig {
        cv_folds: n_events,
        lambda_grid: grid.clone(),
        cv_seed: 123,
        tol: 1e-12,
        ..LassoConfig::default()
    };
    let cv = cv_select_lambda(&ds, &w, &config).unwrap();

    // brute force: for each event record, refit on the rest from scratch
    let mut totals = vec![0.0; grid.len()];
    for (held, r) in ds.records().iter().enumerate().filter(|(_, r)| r.event) {
        let rest: Vec<_> = ds
            .records()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held)
            .map(|(_, rec)| rec.clone())
            .collect();
        let sub = ispw_core::restrict(&rest, ds.tau(), ispw_core::TauEventRule::AsRecorded).unwrap();
        let km = km_estimate(&sub).unwrap();
        let wsub = ispw_weights(&sub, &km).unwrap();
        for (gi, &lambda) in grid.iter().enumerate() {
            let fit = weighted_lasso_fit(
                &sub,
                &wsub,
                &LassoConfig { lambda, tol: 1e-12, ..LassoConfig::default() },
            )
            .unwrap();
            let eta: f64 = r.covariates.iter().zip(&fit.beta).map(|(x, b)| x * b).sum();
            totals[gi] += (r.time.ln() - eta).powi(2) / km.eval(r.time);
        }
    }
    for (gi, total) in totals.iter().enumerate() {
        let mean = total / n_events as f64;
        assert!(
            (mean - cv.mean_cv_error[gi]).abs() < 1e-8,
            "grid point {gi}: {mean} vs {}",
            cv.mean_cv_error[gi]
        );
    }
    assert!(grid.contains(&cv.chosen_lambda));
}

#[test]
fn reference_cv_machinery_runs_and_chooses_from_grid() {
    let ds = reference_dataset();
    let w = weights_for(&ds);
    let config = LassoConfig {
        cv_folds: 3,
        lambda_grid: vec![0.4, 0.2, 0.1, 0.05, 0.025],
        cv_seed: 9,
        ..reproduction_config(0.1)
    };
    let cv = cv_select_lambda(&ds, &w, &config).unwrap();
    assert!(config.lambda_grid.contains(&cv.chosen_lambda));
    assert_eq!(cv.mean_cv_error.len(), 5);
    assert!(cv.mean_cv_error.iter().all(|e| e.is_finite()));
}

#[test]
fn top_of_lambda_path_is_the_null_model() {
    let ds = reference_dataset();
    let w = weights_for(&ds);
    let fit = weighted_lasso_fit(
        &ds,
        &w,
        &LassoConfig { lambda: 1000.0, tol: 1e-12, ..LassoConfig::default() },
    )
    .unwrap();
    assert_eq!(fit.selected().iter().filter(|s| **s).count(), 0);
}

#[test]
fn consistency_under_decaying_lambda() {
    // mean l2 error shrinks from n=200 to n=1000 with lambda_n = 0.1*(200/n)
    use ispw_core::{CalibratedScenario, ScenarioSpec};
    let reps = 100u64;
    let mut means = Vec::new();
    for n in [200usize, 1000] {
        let spec = ScenarioSpec::numbered(1, n, 2024).unwrap();
        let cal = CalibratedScenario::new(spec).unwrap();
        let lambda = 0.1 * 200.0 / n as f64;
        let mut total = 0.0;
        let mut count = 0usize;
        for rep in 0..reps {
            let Ok(ds4) = cal.replication(rep) else { continue };
            let records: Vec<_> = ds4
                .records()
                .iter()
                .map(|r| {
                    ispw_core::SurvivalRecord::new(
                        r.id.clone(),
                        r.time,
                        r.event,
                        r.covariates[..3].to_vec(),
                    )
                })
                .collect();
            let ds = ispw_core::restrict(&records, ds4.tau(), ispw_core::TauEventRule::AsRecorded)
                .unwrap();
            let Ok(km) = km_estimate(&ds) else { continue };
            let Ok(w) = ispw_weights(&ds, &km) else { continue };
            let Ok(fit) = weighted_lasso_fit(
                &ds,
                &w,
                &LassoConfig { lambda, ..reproduction_config(lambda) },
            ) else {
                continue;
            };
            total += fit
                .beta
                .iter()
                .zip([1.0, 1.0, 1.0])
                .map(|(b, t)| (b - t).powi(2))
                .sum::<f64>()
                .sqrt();
            count += 1;
        }
        assert!(count as f64 > 0.9 * reps as f64, "too many failed replications");
        means.push(total / count as f64);
    }
    assert!(
        means[1] < means[0],
        "mean error did not shrink: n=200 {} vs n=1000 {}",
        means[0],
        means[1]
    );
}
