//! Scenario generation, censoring-rate calibration, and Monte Carlo studies
//! producing mean-squared-error tables and correct-selection percentages.
//!
//! Replications are independent: replication `r` draws from stream `r` of a
//! counter-based generator seeded with the scenario seed, so results are
//! bit-identical for any worker count. Accumulation happens in replication
//! order after gathering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aft::{mle_fit, subset_search, AicConvention, DistributionKind};
use crate::error::{Error, Result};
use crate::lasso::{
    cv_select_lambda, tian_fit, weighted_lasso_fit, LassoConfig, Link, LossScale,
};
use crate::survival::{
    ispw_weights, km_estimate, restrict, IspwWeightVector, RestrictedDataset, SurvivalRecord,
    TauEventRule,
};

const TAU_PILOT_STREAM: u64 = u64::MAX;
const CENSOR_PILOT_STREAM_ARM0: u64 = u64::MAX - 1;
const CENSOR_PILOT_STREAM_ARM1: u64 = u64::MAX - 2;
const PILOT_DRAWS: usize = 100_000;
/// Restriction time for generated scenarios: this quantile of the pilot
/// draws of the uncensored survival time.
const TAU_QUANTILE: f64 = 0.80;
const CALIBRATION_TOL: f64 = 0.005;
const MAX_BISECTION_STEPS: usize = 100;

/// Generative model for one simulation scenario: survival times
/// `T = exp(b0 + b1 trt + b2 X1 + sigma eps)` with `trt` assigned 1:1,
/// `X1 ~ N(1,1)`, a noise candidate `X2 ~ N(-1,1)`, and per-arm exponential
/// censoring calibrated to the target rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub label: String,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma: f64,
    pub error_kind: DistributionKind,
    /// Target pre-restriction censoring probability in the control arm.
    pub censor_rate_trt0: f64,
    /// Target pre-restriction censoring probability in the treated arm.
    pub censor_rate_trt1: f64,
    pub n: usize,
    pub tau: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// The six standard scenarios: unit coefficients and scale, error law
    /// normal (1, 2), Gumbel (3, 4), or logistic (5, 6); control-arm
    /// censoring 10%, treated-arm 10% for odd and 30% for even numbers.
    /// The restriction time is the 95th percentile of a pilot sample of the
    /// uncensored times.
    pub fn numbered(index: usize, n: usize, seed: u64) -> Result<Self> {
        let (error_kind, rate1) = match index {
            1 => (DistributionKind::LogNormal, 0.1),
            2 => (DistributionKind::LogNormal, 0.3),
            3 => (DistributionKind::Weibull, 0.1),
            4 => (DistributionKind::Weibull, 0.3),
            5 => (DistributionKind::LogLogistic, 0.1),
            6 => (DistributionKind::LogLogistic, 0.3),
            _ => {
                return Err(Error::InvalidDataset(format!(
                    "scenario index must be 1..=6, got {index}"
                )))
            }
        };
        let mut spec = Self {
            label: format!("scenario-{index}"),
            beta0: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            sigma: 1.0,
            error_kind,
            censor_rate_trt0: 0.1,
            censor_rate_trt1: rate1,
            n,
            tau: 0.0,
            seed,
        };
        spec.tau = spec.pilot_tau();
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        for r in [self.censor_rate_trt0, self.censor_rate_trt1] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidDataset(format!(
                    "censoring rate must lie in [0, 1), got {r}"
                )));
            }
        }
        if self.n < 2 {
            return Err(Error::InvalidDataset("scenario needs n >= 2".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidDataset(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    fn survival_time<R: Rng + ?Sized>(&self, trt: f64, rng: &mut R) -> f64 {
        let x1: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) + 1.0;
        let eps = self.error_kind.sample_error(rng);
        (self.beta0 + self.beta1 * trt + self.beta2 * x1 + self.sigma * eps).exp()
    }

    /// Pilot quantile of the uncensored survival time, mixing the arms 1:1.
    fn pilot_tau(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(TAU_PILOT_STREAM);
        let mut draws: Vec<f64> = (0..PILOT_DRAWS)
            .map(|i| self.survival_time(if i % 2 == 0 { 0.0 } else { 1.0 }, &mut rng))
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((PILOT_DRAWS as f64 * TAU_QUANTILE) as usize).min(PILOT_DRAWS - 1);
        draws[idx]
    }
}

/// Calibrated per-arm exponential censoring rates; `None` means no
/// censoring in that arm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CensoringModel {
    pub rate_trt0: Option<f64>,
    pub rate_trt1: Option<f64>,
}

/// Choose the exponential censoring rate for one arm by bisection so that
/// `P(C < T)` matches `target`. The probability is computed analytically
/// against a pilot sample of `T`: `mean(1 - exp(-rate * T_i))`.
fn calibrate_arm(spec: &ScenarioSpec, trt: f64, target: f64, stream: u64) -> Result<Option<f64>> {
    if target == 0.0 {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let draws: Vec<f64> = (0..PILOT_DRAWS).map(|_| spec.survival_time(trt, &mut rng)).collect();
    let prob = |rate: f64| -> f64 {
        draws.iter().map(|t| 1.0 - (-rate * t).exp()).sum::<f64>() / draws.len() as f64
    };

    let mut lo = 0.0;
    let mut hi = 1e-6;
    let mut grow = 0;
    while prob(hi) < target {
        hi *= 2.0;
        grow += 1;
        if grow > 120 {
            return Err(Error::CalibrationFailed(format!(
                "target {target} unreachable while growing the bracket"
            )));
        }
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let p = prob(mid);
        if (p - target).abs() <= CALIBRATION_TOL {
            return Ok(Some(mid));
        }
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::CalibrationFailed(format!(
        "no rate within {CALIBRATION_TOL} of target {target} after {MAX_BISECTION_STEPS} steps"
    )))
}

/// Calibrate both arms of a scenario.
pub fn calibrate_censoring(spec: &ScenarioSpec) -> Result<CensoringModel> {
    spec.validate()?;
    Ok(CensoringModel {
        rate_trt0: calibrate_arm(spec, 0.0, spec.censor_rate_trt0, CENSOR_PILOT_STREAM_ARM0)?,
        rate_trt1: calibrate_arm(spec, 1.0, spec.censor_rate_trt1, CENSOR_PILOT_STREAM_ARM1)?,
    })
}

/// A scenario with its censoring model fixed, ready for replication draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibratedScenario {
    pub spec: ScenarioSpec,
    pub censoring: CensoringModel,
}

impl CalibratedScenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        let censoring = calibrate_censoring(&spec)?;
        Ok(Self { spec, censoring })
    }

    /// Draw one replication dataset from the replication's own RNG stream.
    /// Covariate columns: intercept, trt, X1, X2.
    pub fn replication(&self, rep: u64) -> Result<RestrictedDataset> {
        let spec = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(rep);

        let n = spec.n;
        let mut trt: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            trt.swap(i, j);
        }

        let mut records = Vec::with_capacity(n);
        for (i, &t_i) in trt.iter().enumerate() {
            let x1: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) + 1.0;
            let x2: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) - 1.0;
            let eps = spec.error_kind.sample_error(&mut rng);
            let t = (spec.beta0 + spec.beta1 * t_i + spec.beta2 * x1 + spec.sigma * eps).exp();
            let rate = if t_i == 1.0 { self.censoring.rate_trt1 } else { self.censoring.rate_trt0 };
            let c = match rate {
                None => f64::INFINITY,
                Some(r) => {
                    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    -u.ln() / r
                }
            };
            let observed = t.min(c);
            records.push(SurvivalRecord::new(
                format!("{i}"),
                observed,
                t <= c,
                vec![1.0, t_i, x1, x2],
            ));
        }
        restrict(&records, spec.tau, TauEventRule::AsRecorded)
    }
}

/// Calibrate and draw replication 0 of a scenario.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<RestrictedDataset> {
    CalibratedScenario::new(spec.clone())?.replication(0)
}

/// Estimators compared by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Tian,
    Lasso,
    Likelihood,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tian, Method::Lasso, Method::Likelihood];

    pub fn label(self) -> &'static str {
        match self {
            Method::Tian => "tian",
            Method::Lasso => "lasso",
            Method::Likelihood => "likelihood",
        }
    }
}

/// How the study's lasso picks its tuning parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LassoTuning {
    Fixed(f64),
    CrossValidated { folds: usize, grid: Vec<f64>, seed: u64 },
}

impl Default for LassoTuning {
    fn default() -> Self {
        LassoTuning::Fixed(0.1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub methods: Vec<Method>,
    pub reps: usize,
    pub lasso_tuning: LassoTuning,
    /// Worker threads; `None` uses the default pool size. Results are
    /// identical for any value.
    pub workers: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            reps: 1000,
            lasso_tuning: LassoTuning::default(),
            workers: None,
        }
    }
}

/// Lasso configuration used inside the studies: standardized covariates,
/// unpenalized intercept, half-weight-sum loss.
pub fn study_lasso_config(lambda: f64) -> LassoConfig {
    LassoConfig {
        lambda,
        link: Link::Log,
        penalize_intercept: false,
        standardize: true,
        loss_scale: LossScale::HalfWeightSum,
        ..LassoConfig::default()
    }
}

/// Candidate variable combinations over the design
/// (intercept, trt, X1, X2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateCombination {
    /// intercept + trt
    C1,
    /// intercept + trt + X1 (the generating model)
    C2,
    /// intercept + trt + X1 + X2
    C3,
    /// any other selected set (lasso only)
    C4,
}

impl CandidateCombination {
    pub const SUBSET_C1: [usize; 2] = [0, 1];
    pub const SUBSET_C2: [usize; 3] = [0, 1, 2];
    pub const SUBSET_C3: [usize; 4] = [0, 1, 2, 3];

    /// Classify a set of selected column indices. Total on all subsets of
    /// {0, 1, 2, 3}.
    pub fn classify(selected: &[usize]) -> Self {
        let mut s = selected.to_vec();
        s.sort_unstable();
        s.dedup();
        if s == Self::SUBSET_C1 {
            CandidateCombination::C1
        } else if s == Self::SUBSET_C2 {
            CandidateCombination::C2
        } else if s == Self::SUBSET_C3 {
            CandidateCombination::C3
        } else {
            CandidateCombination::C4
        }
    }
}

/// Per-method mean squared errors against the generating parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseRow {
    pub method: Method,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Only the likelihood method estimates the scale.
    pub sigma: Option<f64>,
}

/// Per-method selection percentages; C4 applies to the lasso only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionRow {
    pub method: Method,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: Option<f64>,
}

/// Outcome of one study on one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub scenario: ScenarioSpec,
    pub censoring: CensoringModel,
    pub replications: usize,
    pub successes: usize,
    pub failures: usize,
    /// Set when more than 1% of replications failed.
    pub flagged: bool,
    pub mse: Vec<MseRow>,
    pub selection: Vec<SelectionRow>,
}

fn run_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().map_err(|e| {
                Error::CalibrationFailed(format!("could not build worker pool: {e}"))
            })?;
            Ok(pool.install(job))
        }
    }
}

/// Project the dataset onto a subset of covariate columns.
fn project_columns(ds: &RestrictedDataset, cols: &[usize]) -> RestrictedDataset {
    let records = ds
        .records()
        .iter()
        .map(|r| {
            SurvivalRecord::new(
                r.id.clone(),
                r.time,
                r.event,
                cols.iter().map(|&j| r.covariates[j]).collect(),
            )
        })
        .collect();
    RestrictedDataset::from_restricted(records, ds.tau())
}

fn rep_weights(ds: &RestrictedDataset) -> Result<IspwWeightVector> {
    let km = km_estimate(ds)?;
    ispw_weights(ds, &km)
}

fn lasso_beta(
    ds: &RestrictedDataset,
    w: &IspwWeightVector,
    tuning: &LassoTuning,
) -> Result<Vec<f64>> {
    match tuning {
        LassoTuning::Fixed(lambda) => {
            let fit = weighted_lasso_fit(ds, w, &study_lasso_config(*lambda))?;
            Ok(fit.beta)
        }
        LassoTuning::CrossValidated { folds, grid, seed } => {
            let config = LassoConfig {
                cv_folds: *folds,
                lambda_grid: grid.clone(),
                cv_seed: *seed,
                ..study_lasso_config(0.1)
            };
            let cv = cv_select_lambda(ds, w, &config)?;
            Ok(cv.fit_at_chosen.beta)
        }
    }
}

struct MseRep {
    // per method: squared errors for beta0, beta1, beta2, and sigma
    tian: Option<[f64; 3]>,
    lasso: Option<[f64; 3]>,
    likelihood: Option<[f64; 4]>,
}

/// Mean-squared-error study: every method fits the generating design
/// (intercept, trt, X1); squared errors are taken against the generating
/// parameter values.
pub fn run_mse_study(specs: &[ScenarioSpec], config: &StudyConfig) -> Result<Vec<SimResult>> {
    specs.iter().map(|s| mse_study_one(s, config)).collect()
}

fn mse_study_one(spec: &ScenarioSpec, config: &StudyConfig) -> Result<SimResult> {
    let cal = CalibratedScenario::new(spec.clone())?;
    let truth = [spec.beta0, spec.beta1, spec.beta2];
    let want = |m: Method| config.methods.contains(&m);

    let reps: Vec<std::result::Result<MseRep, String>> = run_pool(config.workers, || {
        (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let ds4 = cal.replication(rep).map_err(|e| e.to_string())?;
                let ds = project_columns(&ds4, &[0, 1, 2]);
                let w = rep_weights(&ds).map_err(|e| e.to_string())?;
                let mut out =
                    MseRep { tian: None, lasso: None, likelihood: None };
                if want(Method::Tian) {
                    let fit = tian_fit(&ds, &w, Link::Log).map_err(|e| e.to_string())?;
                    out.tian = Some(sq_err3(&fit.beta, &truth));
                }
                if want(Method::Lasso) {
                    let beta =
                        lasso_beta(&ds, &w, &config.lasso_tuning).map_err(|e| e.to_string())?;
                    out.lasso = Some(sq_err3(&beta, &truth));
                }
                if want(Method::Likelihood) {
                    let fit = mle_fit(&ds, &w, spec.error_kind, &[0, 1, 2], None)
                        .map_err(|e| e.to_string())?;
                    if !fit.converged {
                        return Err("likelihood fit did not converge".to_string());
                    }
                    let mut e = [0.0; 4];
                    e[..3].copy_from_slice(&sq_err3(&fit.params.beta, &truth));
                    e[3] = (fit.params.sigma - spec.sigma).powi(2);
                    out.likelihood = Some(e);
                }
                Ok(out)
            })
            .collect()
    })?;

    let mut acc_tian = [0.0; 3];
    let mut acc_lasso = [0.0; 3];
    let mut acc_lik = [0.0; 4];
    let mut successes = 0usize;
    for r in reps.iter().flatten() {
        successes += 1;
        if let Some(e) = r.tian {
            for (a, v) in acc_tian.iter_mut().zip(e) {
                *a += v;
            }
        }
        if let Some(e) = r.lasso {
            for (a, v) in acc_lasso.iter_mut().zip(e) {
                *a += v;
            }
        }
        if let Some(e) = r.likelihood {
            for (a, v) in acc_lik.iter_mut().zip(e) {
                *a += v;
            }
        }
    }
    if successes == 0 {
        return Err(Error::AllFitsFailed);
    }
    let m = successes as f64;
    let mut mse = Vec::new();
    if want(Method::Tian) {
        mse.push(MseRow {
            method: Method::Tian,
            beta0: acc_tian[0] / m,
            beta1: acc_tian[1] / m,
            beta2: acc_tian[2] / m,
            sigma: None,
        });
    }
    if want(Method::Lasso) {
        mse.push(MseRow {
            method: Method::Lasso,
            beta0: acc_lasso[0] / m,
            beta1: acc_lasso[1] / m,
            beta2: acc_lasso[2] / m,
            sigma: None,
        });
    }
    if want(Method::Likelihood) {
        mse.push(MseRow {
            method: Method::Likelihood,
            beta0: acc_lik[0] / m,
            beta1: acc_lik[1] / m,
            beta2: acc_lik[2] / m,
            sigma: Some(acc_lik[3] / m),
        });
    }

    let failures = config.reps - successes;
    Ok(SimResult {
        scenario: cal.spec.clone(),
        censoring: cal.censoring,
        replications: config.reps,
        successes,
        failures,
        flagged: failures * 100 > config.reps,
        mse,
        selection: Vec::new(),
    })
}

fn sq_err3(beta: &[f64], truth: &[f64; 3]) -> [f64; 3] {
    let mut e = [0.0; 3];
    for i in 0..3 {
        e[i] = (beta[i] - truth[i]).powi(2);
    }
    e
}

struct SelectionRep {
    lasso: Option<CandidateCombination>,
    likelihood: Option<CandidateCombination>,
}

/// Correct-selection study on the candidate design (intercept, trt, X1, X2):
/// the lasso's nonzero pattern is classified into C1..C4; the AIC search
/// compares the nested candidates C1..C3 within the generating family.
pub fn run_selection_study(specs: &[ScenarioSpec], config: &StudyConfig) -> Result<Vec<SimResult>> {
    specs.iter().map(|s| selection_study_one(s, config)).collect()
}

fn selection_study_one(spec: &ScenarioSpec, config: &StudyConfig) -> Result<SimResult> {
    let cal = CalibratedScenario::new(spec.clone())?;
    let want = |m: Method| config.methods.contains(&m);
    let nested: Vec<Vec<usize>> = vec![
        CandidateCombination::SUBSET_C1.to_vec(),
        CandidateCombination::SUBSET_C2.to_vec(),
        CandidateCombination::SUBSET_C3.to_vec(),
    ];

    let reps: Vec<std::result::Result<SelectionRep, String>> = run_pool(config.workers, || {
        (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let ds = cal.replication(rep).map_err(|e| e.to_string())?;
                let w = rep_weights(&ds).map_err(|e| e.to_string())?;
                let mut out = SelectionRep { lasso: None, likelihood: None };
                if want(Method::Lasso) {
                    let beta =
                        lasso_beta(&ds, &w, &config.lasso_tuning).map_err(|e| e.to_string())?;
                    let selected: Vec<usize> = beta
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| **b != 0.0)
                        .map(|(j, _)| j)
                        .collect();
                    out.lasso = Some(CandidateCombination::classify(&selected));
                }
                if want(Method::Likelihood) {
                    let search = subset_search(
                        &ds,
                        &w,
                        &[spec.error_kind],
                        Some(&nested),
                        AicConvention::default(),
                    )
                    .map_err(|e| e.to_string())?;
                    let best = search.best().ok_or("no converged candidate fit")?;
                    out.likelihood = Some(CandidateCombination::classify(&best.subset));
                }
                Ok(out)
            })
            .collect()
    })?;

    let mut lasso_counts = [0usize; 4];
    let mut lik_counts = [0usize; 4];
    let mut successes = 0usize;
    for r in reps.iter().flatten() {
        successes += 1;
        if let Some(c) = r.lasso {
            lasso_counts[c as usize] += 1;
        }
        if let Some(c) = r.likelihood {
            lik_counts[c as usize] += 1;
        }
    }
    if successes == 0 {
        return Err(Error::AllFitsFailed);
    }
    let pct = |c: usize| 100.0 * c as f64 / successes as f64;
    let mut selection = Vec::new();
    if want(Method::Lasso) {
        selection.push(SelectionRow {
            method: Method::Lasso,
            c1: pct(lasso_counts[0]),
            c2: pct(lasso_counts[1]),
            c3: pct(lasso_counts[2]),
            c4: Some(pct(lasso_counts[3])),
        });
    }
    if want(Method::Likelihood) {
        selection.push(SelectionRow {
            method: Method::Likelihood,
            c1: pct(lik_counts[0]),
            c2: pct(lik_counts[1]),
            c3: pct(lik_counts[2]),
            c4: None,
        });
    }

    let failures = config.reps - successes;
    Ok(SimResult {
        scenario: cal.spec.clone(),
        censoring: cal.censoring,
        replications: config.reps,
        successes,
        failures,
        flagged: failures * 100 > config.reps,
        mse: Vec::new(),
        selection,
    })
}

/// Six-significant-digit formatting used by the CSV tables.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// CSV in the MSE-table layout: one row per scenario and parameter, one
/// column per method and sample size.
pub fn mse_table_csv(results: &[SimResult]) -> String {
    let mut sizes: Vec<usize> = results.iter().map(|r| r.scenario.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| results.iter().any(|r| r.mse.iter().any(|row| row.method == *m)))
        .collect();

    let mut labels: Vec<String> = results.iter().map(|r| r.scenario.label.clone()).collect();
    labels.dedup();

    let mut out = String::from("scenario,parameter");
    for m in &methods {
        for n in &sizes {
            out.push_str(&format!(",{}_n{}", m.label(), n));
        }
    }
    out.push('\n');

    for label in &labels {
        for (pi, pname) in ["beta0", "beta1", "beta2", "sigma"].iter().enumerate() {
            out.push_str(&format!("{label},{pname}"));
            for m in &methods {
                for n in &sizes {
                    let cell = results
                        .iter()
                        .filter(|r| &r.scenario.label == label && r.scenario.n == *n)
                        .find_map(|r| r.mse.iter().find(|row| row.method == *m))
                        .and_then(|row| match pi {
                            0 => Some(row.beta0),
                            1 => Some(row.beta1),
                            2 => Some(row.beta2),
                            _ => row.sigma,
                        });
                    match cell {
                        Some(v) => out.push_str(&format!(",{}", format_sig6(v))),
                        None => out.push_str(",-"),
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

/// CSV in the selection-table layout: one row per scenario and combination.
pub fn selection_table_csv(results: &[SimResult]) -> String {
    let mut sizes: Vec<usize> = results.iter().map(|r| r.scenario.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let methods: Vec<Method> = [Method::Lasso, Method::Likelihood]
        .into_iter()
        .filter(|m| results.iter().any(|r| r.selection.iter().any(|row| row.method == *m)))
        .collect();
    let mut labels: Vec<String> = results.iter().map(|r| r.scenario.label.clone()).collect();
    labels.dedup();

    let mut out = String::from("scenario,combination");
    for m in &methods {
        for n in &sizes {
            out.push_str(&format!(",{}_n{}", m.label(), n));
        }
    }
    out.push('\n');
    for label in &labels {
        for (ci, cname) in ["C1", "C2", "C3", "C4"].iter().enumerate() {
            out.push_str(&format!("{label},{cname}"));
            for m in &methods {
                for n in &sizes {
                    let cell = results
                        .iter()
                        .filter(|r| &r.scenario.label == label && r.scenario.n == *n)
                        .find_map(|r| r.selection.iter().find(|row| row.method == *m))
                        .and_then(|row| match ci {
                            0 => Some(row.c1),
                            1 => Some(row.c2),
                            2 => Some(row.c3),
                            _ => row.c4,
                        });
                    match cell {
                        Some(v) => out.push_str(&format!(",{}", format_sig6(v))),
                        None => out.push_str(",-"),
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}
