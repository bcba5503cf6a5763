//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles here deliberately re-derive results through different
//! algorithms than the library (naive recounting, subgradient descent,
//! finite differences, quadrature) so agreement is meaningful.
#![allow(dead_code)]

use ispw_core::{restrict, RestrictedDataset, SurvivalRecord, TauEventRule};
use rand::Rng;

/// Twelve-subject reference dataset: covariates are
/// (intercept, treatment, age, sex), six events among twelve subjects,
/// restriction time 100.
pub fn reference_records() -> Vec<SurvivalRecord> {
    let rows: [(f64, bool, f64, f64, f64); 12] = [
        (20.0, true, 0.0, 70.0, 0.0),
        (20.0, false, 1.0, 60.0, 0.0),
        (30.0, false, 0.0, 60.0, 1.0),
        (40.0, true, 1.0, 80.0, 1.0),
        (40.0, true, 0.0, 60.0, 0.0),
        (50.0, true, 0.0, 80.0, 1.0),
        (60.0, false, 1.0, 70.0, 0.0),
        (80.0, true, 1.0, 70.0, 1.0),
        (80.0, false, 0.0, 70.0, 0.0),
        (90.0, true, 0.0, 60.0, 1.0),
        (100.0, false, 1.0, 60.0, 0.0),
        (100.0, false, 1.0, 60.0, 1.0),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, (t, e, trt, age, sex))| {
            SurvivalRecord::new(format!("{}", i + 1), *t, *e, vec![1.0, *trt, *age, *sex])
        })
        .collect()
}

pub fn reference_dataset() -> RestrictedDataset {
    restrict(&reference_records(), 100.0, TauEventRule::AsRecorded).unwrap()
}

pub const REFERENCE_NAMES: [&str; 4] = ["intercept", "treatment", "age", "sex"];

/// Naive product-limit oracle: recounts the risk set from scratch at every
/// distinct time. Returns (time, survival) at death times.
pub fn brute_force_km(records: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = records.iter().map(|r| r.0).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let mut s = 1.0;
    let mut out = Vec::new();
    for t in times {
        let at_risk = records.iter().filter(|r| r.0 >= t).count();
        let deaths = records.iter().filter(|r| r.0 == t && r.1).count();
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            out.push((t, s));
        }
    }
    out
}

/// Step evaluation of a brute-force curve (right-continuous).
pub fn brute_force_km_eval(curve: &[(f64, f64)], t: f64) -> f64 {
    let mut s = 1.0;
    for &(tj, sj) in curve {
        if tj <= t {
            s = sj;
        }
    }
    s
}

/// Objective `(m/2) sum_i w_i (z_i - x_i' beta)^2 + lambda sum_j p_j |beta_j|`
/// where `m = 2/n` reproduces the subject-count loss.
pub fn lasso_objective(
    z: &[f64],
    x: &[Vec<f64>], // row-major, one row per record
    w: &[f64],
    beta: &[f64],
    lambda: f64,
    penalty: &[f64],
    m: f64,
) -> f64 {
    let loss: f64 = z
        .iter()
        .zip(x)
        .zip(w)
        .map(|((zi, xi), wi)| {
            let eta: f64 = xi.iter().zip(beta).map(|(a, b)| a * b).sum();
            wi * (zi - eta).powi(2)
        })
        .sum();
    0.5 * m * loss + lambda * beta.iter().zip(penalty).map(|(b, p)| p * b.abs()).sum::<f64>()
}

/// Projected-subgradient oracle: diminishing-step subgradient descent on the
/// penalized objective, tracking the best objective seen. Independent of the
/// coordinate-descent path. Columns are equilibrated internally (an exact
/// reparameterization, so the reported objective is for the original
/// problem).
pub fn subgradient_lasso_best_objective(
    z: &[f64],
    x: &[Vec<f64>],
    w: &[f64],
    lambda: f64,
    penalty: &[f64],
    m: f64,
    iterations: usize,
) -> f64 {
    let q = x[0].len();
    // equilibrate: column j of the working design is x_j / s_j and its
    // penalty is lambda * p_j / s_j, with s_j the weighted rms of x_j
    let s: Vec<f64> = (0..q)
        .map(|j| {
            let ss: f64 = x.iter().zip(w).map(|(xi, wi)| wi * xi[j] * xi[j]).sum();
            let wsum: f64 = w.iter().sum();
            let rms = (ss / wsum.max(1e-300)).sqrt();
            if rms > 0.0 {
                rms
            } else {
                1.0
            }
        })
        .collect();
    let xs: Vec<Vec<f64>> = x
        .iter()
        .map(|xi| xi.iter().zip(&s).map(|(v, sj)| v / sj).collect())
        .collect();
    let pen: Vec<f64> = penalty.iter().zip(&s).map(|(p, sj)| p / sj).collect();

    let mut gamma = vec![0.0; q];
    let lip: f64 = (0..q)
        .map(|j| m * xs.iter().zip(w).map(|(xi, wi)| wi * xi[j] * xi[j]).sum::<f64>())
        .sum::<f64>()
        .max(1e-12);
    let mut best = lasso_objective(z, &xs, w, &gamma, lambda, &pen, m);
    for k in 0..iterations {
        let mut grad = vec![0.0; q];
        for ((zi, xi), wi) in z.iter().zip(&xs).zip(w) {
            let eta: f64 = xi.iter().zip(&gamma).map(|(a, b)| a * b).sum();
            let r = zi - eta;
            for j in 0..q {
                grad[j] -= m * wi * xi[j] * r;
            }
        }
        for j in 0..q {
            grad[j] += lambda * pen[j] * gamma[j].signum();
        }
        let step = (1.0 / lip) / ((k + 1) as f64).sqrt();
        for j in 0..q {
            gamma[j] -= step * grad[j];
        }
        let obj = lasso_objective(z, &xs, w, &gamma, lambda, &pen, m);
        if obj < best {
            best = obj;
        }
    }
    best
}

/// Central finite difference of a scalar function.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// Random survival dataset for oracle comparisons: log-normal-ish times,
/// Bernoulli censoring, standard-normal covariates plus an intercept.
pub fn random_dataset<R: Rng>(
    rng: &mut R,
    n: usize,
    extra_covariates: usize,
    censor_prob: f64,
) -> RestrictedDataset {
    loop {
        let records: Vec<SurvivalRecord> = (0..n)
            .map(|i| {
                let mut covs = vec![1.0];
                for _ in 0..extra_covariates {
                    covs.push(rng.sample::<f64, _>(rand_distr::StandardNormal));
                }
                let t = (rng.sample::<f64, _>(rand_distr::StandardNormal) + 1.5).exp();
                let event = rng.gen_bool(1.0 - censor_prob);
                SurvivalRecord::new(format!("{i}"), t, event, covs)
            })
            .collect();
        // keep the last observed time censored so no weight degenerates
        let mut records = records;
        let last = records
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.time.partial_cmp(&b.1.time).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        records[last].event = false;
        let ds = restrict(&records, 1e9, TauEventRule::AsRecorded).unwrap();
        if ds.n_events() >= 3 {
            return ds;
        }
    }
}
