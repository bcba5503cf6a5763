mod common;

use ispw_core::sim::{
    mse_table_csv, selection_table_csv, LassoTuning, Method, StudyConfig,
};
use ispw_core::{
    calibrate_censoring, run_mse_study, run_selection_study, tian_fit, CalibratedScenario,
    Link, ScenarioSpec,
};

#[test]
fn zero_noise_generator_is_deterministic_in_the_covariates() {
    let mut spec = ScenarioSpec::numbered(1, 300, 5).unwrap();
    spec.sigma = 0.0;
    spec.censor_rate_trt0 = 0.0;
    spec.censor_rate_trt1 = 0.0;
    spec.tau = spec.tau.min(30.0);
    let ds = ispw_core::generate_scenario(&spec).unwrap();
    for r in ds.records() {
        let trt = r.covariates[1];
        let x1 = r.covariates[2];
        let t = (1.0 + trt + x1).exp();
        assert_eq!(r.time, t.min(spec.tau), "time must equal the deterministic model");
        assert!(r.event);
    }
    assert_eq!(ds.n_censored(), 0);
}

#[test]
fn generated_censoring_proportion_matches_target_per_arm() {
    let spec = ScenarioSpec::numbered(1, 10_000, 99).unwrap();
    let ds = ispw_core::generate_scenario(&spec).unwrap();
    for arm in [0.0, 1.0] {
        let in_arm: Vec<_> =
            ds.records().iter().filter(|r| r.covariates[1] == arm).collect();
        let censored = in_arm.iter().filter(|r| !r.event).count();
        let prop = censored as f64 / in_arm.len() as f64;
        assert!(
            (prop - 0.1).abs() <= 0.02,
            "arm {arm}: censored proportion {prop}"
        );
    }
}

#[test]
fn calibration_achieves_target_on_an_independent_pilot() {
    use rand::{Rng, SeedableRng};
    let spec = ScenarioSpec::numbered(1, 100, 7).unwrap();
    let cal = calibrate_censoring(&spec).unwrap();
    let rate = cal.rate_trt0.unwrap();
    // fresh pilot with a different seed
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123_456);
    let mut hit = 0usize;
    let draws = 100_000;
    for _ in 0..draws {
        let x1: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) + 1.0;
        let eps: f64 = rng.sample(rand_distr::StandardNormal);
        let t = (1.0 + x1 + eps).exp();
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let c = -u.ln() / rate;
        if c < t {
            hit += 1;
        }
    }
    let achieved = hit as f64 / draws as f64;
    assert!((0.095..=0.105).contains(&achieved), "achieved {achieved}");
}

#[test]
fn calibration_rate_grows_with_target() {
    let spec = ScenarioSpec::numbered(2, 100, 7).unwrap();
    // arm 1 targets 0.3, arm 0 targets 0.1, same generating law up to beta1
    let cal = calibrate_censoring(&spec).unwrap();
    let mut spec_low = spec.clone();
    spec_low.censor_rate_trt1 = 0.1;
    let cal_low = calibrate_censoring(&spec_low).unwrap();
    assert!(cal.rate_trt1.unwrap() > cal_low.rate_trt1.unwrap());
}

#[test]
fn single_rep_zero_noise_recovers_exactly() {
    // sigma = 0 makes log-time exactly linear in the covariates, so any
    // weighting recovers the coefficients exactly. Censoring must leave the
    // largest observed time censored or the inverse weight degenerates, so
    // scan a few seeds and require exact recovery whenever the pipeline runs.
    let mut successes = 0usize;
    for seed in 0..20u64 {
        let mut spec = ScenarioSpec::numbered(1, 200, seed).unwrap();
        spec.sigma = 0.0;
        spec.censor_rate_trt0 = 0.4;
        spec.censor_rate_trt1 = 0.4;
        spec.tau = 1e9;
        let config = StudyConfig {
            methods: vec![Method::Tian],
            reps: 1,
            lasso_tuning: LassoTuning::Fixed(0.1),
            workers: None,
        };
        let Ok(results) = run_mse_study(&[spec], &config) else { continue };
        let row = &results[0].mse[0];
        assert!(
            row.beta0 < 1e-10 && row.beta1 < 1e-10 && row.beta2 < 1e-10,
            "seed {seed}: {row:?}"
        );
        successes += 1;
    }
    assert!(successes > 0, "no seed produced a finite-weight replication");
}

#[test]
fn doubling_reps_moves_mse_less_than_three_standard_errors() {
    let spec = ScenarioSpec::numbered(1, 150, 13).unwrap();
    let run = |reps: usize| {
        let config = StudyConfig {
            methods: vec![Method::Tian],
            reps,
            lasso_tuning: LassoTuning::Fixed(0.1),
            workers: None,
        };
        run_mse_study(&[spec.clone()], &config).unwrap()[0].clone()
    };
    let small = run(300);
    let big = run(600);

    // independent per-replication pass for the Monte Carlo standard error
    let cal = CalibratedScenario::new(spec).unwrap();
    let mut sq = Vec::new();
    for rep in 0..300u64 {
        let Ok(ds4) = cal.replication(rep) else { continue };
        let recs: Vec<_> = ds4
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
        let ds = ispw_core::restrict(&recs, ds4.tau(), ispw_core::TauEventRule::AsRecorded)
            .unwrap();
        let Ok(km) = ispw_core::km_estimate(&ds) else { continue };
        let Ok(w) = ispw_core::ispw_weights(&ds, &km) else { continue };
        let Ok(fit) = tian_fit(&ds, &w, Link::Log) else { continue };
        sq.push((fit.beta[0] - 1.0).powi(2));
    }
    let n = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / n;
    let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let se = (var / n).sqrt();
    assert!(
        (small.mse[0].beta0 - big.mse[0].beta0).abs() < 3.0 * se,
        "{} vs {} (se {se})",
        small.mse[0].beta0,
        big.mse[0].beta0
    );
}

#[test]
fn selection_percentages_sum_to_one_hundred() {
    let spec = ScenarioSpec::numbered(1, 150, 17).unwrap();
    let config = StudyConfig {
        methods: vec![Method::Lasso, Method::Likelihood],
        reps: 120,
        lasso_tuning: LassoTuning::Fixed(0.1),
        workers: None,
    };
    let res = &run_selection_study(&[spec], &config).unwrap()[0];
    for row in &res.selection {
        let total = row.c1 + row.c2 + row.c3 + row.c4.unwrap_or(0.0);
        assert!((total - 100.0).abs() < 1e-9, "{row:?}");
    }
}

#[test]
fn cross_validated_lasso_keeps_the_noise_covariate_more_often_than_fixed_lambda() {
    // cross-validation under-penalizes relative to lambda = 0.1, so the
    // noise covariate survives much more often
    for n in [200usize, 1000] {
        let spec = ScenarioSpec::numbered(1, n, 23).unwrap();
        let run = |tuning: LassoTuning| {
            let config = StudyConfig {
                methods: vec![Method::Lasso],
                reps: 150,
                lasso_tuning: tuning,
                workers: None,
            };
            run_selection_study(&[spec.clone()], &config).unwrap()[0].selection[0].clone()
        };
        let cv = run(LassoTuning::CrossValidated {
            folds: 5,
            grid: ispw_core::lasso::default_lambda_grid(),
            seed: 23,
        });
        let fixed = run(LassoTuning::Fixed(0.1));
        assert!(
            cv.c3 > fixed.c3 + 5.0,
            "n={n}: cv C3 {} should clearly exceed fixed-lambda C3 {}",
            cv.c3,
            fixed.c3
        );
    }
}

#[test]
fn csv_tables_have_method_by_size_layout() {
    let config = StudyConfig {
        methods: Method::ALL.to_vec(),
        reps: 30,
        lasso_tuning: LassoTuning::Fixed(0.1),
        workers: None,
    };
    let specs = vec![
        ScenarioSpec::numbered(1, 100, 29).unwrap(),
        ScenarioSpec::numbered(1, 150, 29).unwrap(),
    ];
    let mse = run_mse_study(&specs, &config).unwrap();
    let table = mse_table_csv(&mse);
    let header = table.lines().next().unwrap();
    assert_eq!(
        header,
        "scenario,parameter,tian_n100,tian_n150,lasso_n100,lasso_n150,likelihood_n100,likelihood_n150"
    );
    assert_eq!(table.lines().count(), 1 + 4, "four parameter rows");
    assert!(table.contains("scenario-1,beta0,"));
    // tian and lasso have no sigma estimate
    let sigma_row = table.lines().find(|l| l.contains(",sigma,")).unwrap();
    assert!(sigma_row.contains(",-,"));

    let sel = run_selection_study(&specs, &config).unwrap();
    let sel_table = selection_table_csv(&sel);
    assert!(sel_table.starts_with("scenario,combination,lasso_n100,lasso_n150,likelihood_n100,likelihood_n150"));
    // likelihood has no C4 column entry
    let c4_row = sel_table.lines().find(|l| l.contains(",C4,")).unwrap();
    assert!(c4_row.ends_with(",-,-"));

    // mixed result sets (an mse run and a selection run concatenated) must
    // still route each table to the rows that carry its numbers
    let mut mixed = mse.clone();
    mixed.extend(sel.clone());
    let mixed_sel = selection_table_csv(&mixed);
    let c2_row = mixed_sel.lines().find(|l| l.contains(",C2,")).unwrap();
    assert!(
        !c2_row.contains(",-"),
        "selection cells went missing in a mixed result set: {c2_row}"
    );
    let mixed_mse = mse_table_csv(&mixed);
    let b0_row = mixed_mse.lines().find(|l| l.contains(",beta0,")).unwrap();
    assert!(!b0_row.contains(",-"), "mse cells went missing: {b0_row}");
}

#[test]
fn study_results_are_identical_across_worker_counts() {
    let spec = ScenarioSpec::numbered(3, 120, 37).unwrap();
    let run_with = |workers: Option<usize>| {
        let config = StudyConfig {
            methods: Method::ALL.to_vec(),
            reps: 60,
            lasso_tuning: LassoTuning::Fixed(0.1),
            workers,
        };
        let mse = run_mse_study(&[spec.clone()], &config).unwrap();
        let sel = run_selection_study(&[spec.clone()], &config).unwrap();
        (
            serde_json::to_string(&mse).unwrap(),
            serde_json::to_string(&sel).unwrap(),
        )
    };
    let a = run_with(Some(1));
    let b = run_with(Some(4));
    let c = run_with(None);
    assert_eq!(a, b);
    assert_eq!(b, c);
}
