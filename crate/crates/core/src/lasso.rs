//! Weighted penalized least squares: cyclic coordinate descent with exact
//! soft-thresholding over a lambda path, K-fold cross-validation for lambda,
//! and the unpenalized weighted least-squares fit as the lambda = 0 case.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_symmetric, weighted_normal_system};
use crate::survival::{IspwWeightVector, RestrictedDataset, SurvivalRecord};

/// The response transform h(.) applied to restricted times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    #[default]
    Log,
    Identity,
}

impl Link {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Link::Log => y.ln(),
            Link::Identity => y,
        }
    }
}

/// Normalization of the squared-loss term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossScale {
    /// `(1/n) sum_i w_i r_i^2` with `n` the total subject count, censored
    /// subjects included.
    #[default]
    SubjectCount,
    /// `(1/(2 sum_i w_i)) sum_i w_i r_i^2`: the weights are renormalized to
    /// mean one and the loss halved, the convention used by the common
    /// penalized-regression packages.
    HalfWeightSum,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoConfig {
    /// L1 tuning parameter, >= 0.
    pub lambda: f64,
    pub link: Link,
    /// Penalize the intercept column (the first all-ones column) as well.
    pub penalize_intercept: bool,
    /// Center and scale non-intercept columns to weighted mean 0 / variance 1
    /// before solving; coefficients are reported on the original scale.
    /// Without an intercept column, columns are scaled but not centered.
    pub standardize: bool,
    pub loss_scale: LossScale,
    /// Convergence threshold on the largest coefficient change per sweep.
    pub tol: f64,
    pub max_iter: usize,
    pub cv_folds: usize,
    /// Decreasing lambda path used by cross-validation.
    pub lambda_grid: Vec<f64>,
    /// Seed for the cross-validation fold assignment.
    pub cv_seed: u64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            link: Link::Log,
            penalize_intercept: true,
            standardize: false,
            loss_scale: LossScale::SubjectCount,
            tol: 1e-9,
            max_iter: 10_000,
            cv_folds: 5,
            lambda_grid: default_lambda_grid(),
            cv_seed: 0,
        }
    }
}

/// Geometric path from 1.0 down to 0.01.
pub fn default_lambda_grid() -> Vec<f64> {
    let k = 30usize;
    (0..k).map(|i| 1.0 * (0.01f64 / 1.0).powf(i as f64 / (k - 1) as f64)).collect()
}

/// A fitted coefficient vector with solver diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    /// Value of the configured objective at `beta` (for standardized fits,
    /// on the standardized problem actually solved).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LassoFit {
    /// Mask of coefficients that are exactly nonzero.
    pub fn selected(&self) -> Vec<bool> {
        self.beta.iter().map(|b| *b != 0.0).collect()
    }
}

/// Cross-validation curve and the refit at the chosen lambda.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_grid: Vec<f64>,
    pub mean_cv_error: Vec<f64>,
    pub chosen_lambda: f64,
    pub fit_at_chosen: LassoFit,
}

fn soft_threshold(c: f64, t: f64) -> f64 {
    if c > t {
        c - t
    } else if c < -t {
        c + t
    } else {
        0.0
    }
}

/// Index of the first all-ones column, if any.
fn intercept_column(dataset: &RestrictedDataset) -> Option<usize> {
    let q = dataset.q();
    (0..q).find(|&j| dataset.records().iter().all(|r| r.covariates[j] == 1.0))
}

struct Standardization {
    shift: Vec<f64>,
    scale: Vec<f64>,
}

/// Internal solver working set: responses, (possibly standardized) design,
/// loss factor, per-column penalty multipliers.
struct Problem {
    z: Vec<f64>,
    x: Vec<Vec<f64>>, // column-major
    w: Vec<f64>,
    /// factor m such that the loss is (m/2) sum w r^2
    m: f64,
    penalty: Vec<f64>,
    standardization: Option<Standardization>,
    intercept_col: Option<usize>,
}

impl Problem {
    fn build(
        dataset: &RestrictedDataset,
        weights: &IspwWeightVector,
        config: &LassoConfig,
    ) -> Result<Self> {
        if dataset.n_events() == 0 {
            return Err(Error::NoEvents);
        }
        let n = dataset.n();
        let q = dataset.q();
        assert_eq!(weights.len(), n, "weight vector length must match the dataset");
        let w: Vec<f64> = weights.weights().to_vec();
        let wsum: f64 = w.iter().sum();
        let z: Vec<f64> = dataset
            .records()
            .iter()
            .map(|r| config.link.apply(r.time))
            .collect();
        if z.iter().zip(&w).any(|(zi, wi)| *wi > 0.0 && !zi.is_finite()) {
            return Err(Error::NonFiniteObjective("transformed response is not finite".into()));
        }

        let icol = intercept_column(dataset);
        let mut x: Vec<Vec<f64>> =
            (0..q).map(|j| dataset.records().iter().map(|r| r.covariates[j]).collect()).collect();

        let standardization = if config.standardize {
            let mut shift = vec![0.0; q];
            let mut scale = vec![1.0; q];
            for j in 0..q {
                if Some(j) == icol {
                    continue;
                }
                if icol.is_some() {
                    shift[j] = x[j].iter().zip(&w).map(|(v, wi)| wi * v).sum::<f64>() / wsum;
                }
                let var = x[j]
                    .iter()
                    .zip(&w)
                    .map(|(v, wi)| wi * (v - shift[j]).powi(2))
                    .sum::<f64>()
                    / wsum;
                if var > 0.0 {
                    scale[j] = var.sqrt();
                }
                for v in x[j].iter_mut() {
                    *v = (*v - shift[j]) / scale[j];
                }
            }
            Some(Standardization { shift, scale })
        } else {
            None
        };

        let m = match config.loss_scale {
            LossScale::SubjectCount => 2.0 / n as f64,
            LossScale::HalfWeightSum => 1.0 / wsum,
        };
        let penalty = (0..q)
            .map(|j| if Some(j) == icol && !config.penalize_intercept { 0.0 } else { 1.0 })
            .collect();

        Ok(Self { z, x, w, m, penalty, standardization, intercept_col: icol })
    }

    fn objective(&self, beta: &[f64], lambda: f64, residual: &[f64]) -> f64 {
        let pen: f64 =
            beta.iter().zip(&self.penalty).map(|(b, p)| lambda * p * b.abs()).sum();
        self.residual_loss(residual) + pen
    }

    fn residual_loss(&self, residual: &[f64]) -> f64 {
        0.5 * self.m * residual.iter().zip(&self.w).map(|(r, wi)| wi * r * r).sum::<f64>()
    }

    /// Back-transform coefficients from the standardized problem.
    fn original_beta(&self, beta: &[f64]) -> Vec<f64> {
        match &self.standardization {
            None => beta.to_vec(),
            Some(st) => {
                let mut out: Vec<f64> =
                    beta.iter().zip(&st.scale).map(|(b, s)| b / s).collect();
                if let Some(ic) = self.intercept_col {
                    let adj: f64 = out
                        .iter()
                        .zip(&st.shift)
                        .enumerate()
                        .filter(|(j, _)| *j != ic)
                        .map(|(_, (b, sh))| b * sh)
                        .sum();
                    out[ic] -= adj;
                }
                out
            }
        }
    }
}

/// Cyclic coordinate descent with exact soft-thresholding, starting from
/// `warm` when given.
fn coordinate_descent(
    problem: &Problem,
    lambda: f64,
    tol: f64,
    max_iter: usize,
    warm: Option<&[f64]>,
) -> Result<LassoFit> {
    let q = problem.x.len();
    let n = problem.z.len();
    let mut beta: Vec<f64> = warm.map_or_else(|| vec![0.0; q], <[f64]>::to_vec);

    // a_j = m * sum_i w_i x_ij^2
    let a: Vec<f64> = (0..q)
        .map(|j| {
            problem.m
                * problem.x[j].iter().zip(&problem.w).map(|(x, w)| w * x * x).sum::<f64>()
        })
        .collect();
    for j in 0..q {
        if a[j] == 0.0 && lambda * problem.penalty[j] == 0.0 {
            // constant-zero column among events with no penalty to pin it
            return Err(Error::SingularDesign { cond: f64::INFINITY });
        }
    }

    let mut residual: Vec<f64> = (0..n)
        .map(|i| {
            problem.z[i]
                - (0..q).map(|j| problem.x[j][i] * beta[j]).sum::<f64>()
        })
        .collect();

    let mut objective = problem.objective(&beta, lambda, &residual);
    if !objective.is_finite() {
        return Err(Error::NonFiniteObjective("objective not finite at the start".into()));
    }
    let mut converged = false;
    let mut iterations = 0usize;
    for _sweep in 0..max_iter {
        iterations += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..q {
            if a[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let old = beta[j];
            // c_j = m * sum_i w_i x_ij (r_i + x_ij * old)
            let c: f64 = problem.m
                * problem.x[j]
                    .iter()
                    .zip(&problem.w)
                    .zip(&residual)
                    .map(|((x, w), r)| w * x * (r + x * old))
                    .sum::<f64>();
            let new = soft_threshold(c, lambda * problem.penalty[j]) / a[j];
            if new != old {
                let delta = new - old;
                for (r, x) in residual.iter_mut().zip(&problem.x[j]) {
                    *r -= x * delta;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let next_objective = problem.objective(&beta, lambda, &residual);
        debug_assert!(
            next_objective <= objective + 1e-10 * objective.abs().max(1.0),
            "coordinate descent objective increased: {objective} -> {next_objective}"
        );
        objective = next_objective;
        if max_delta < tol {
            converged = true;
            break;
        }
    }
    if !objective.is_finite() {
        return Err(Error::NonFiniteObjective("objective diverged".into()));
    }
    Ok(LassoFit {
        beta: problem.original_beta(&beta),
        lambda,
        objective,
        iterations,
        converged,
    })
}

/// Minimize the weighted L1-penalized squared loss over the full dataset.
///
/// The loss is `(1/n) sum_i w_i (h(Y_i) - x_i' beta)^2` (or the
/// half-weight-sum variant, per `config.loss_scale`) plus
/// `lambda * sum_j p_j |beta_j|`.
pub fn weighted_lasso_fit(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    config: &LassoConfig,
) -> Result<LassoFit> {
    let problem = Problem::build(dataset, weights, config)?;
    coordinate_descent(&problem, config.lambda, config.tol, config.max_iter, None)
}

/// Unpenalized weighted least squares: solve the weighted normal equations
/// directly. Equivalent to the lambda = 0 penalized fit.
pub fn tian_fit(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    link: Link,
) -> Result<LassoFit> {
    if dataset.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    assert_eq!(weights.len(), dataset.n(), "weight vector length must match the dataset");
    let q = dataset.q();
    let rows = dataset
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| (weights[i], link.apply(r.time), r.covariates.as_slice()));
    let (gram, moment) = weighted_normal_system(rows, q);
    let beta = solve_symmetric(&gram, &moment)?;

    let n = dataset.n() as f64;
    let loss = dataset
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let eta: f64 = r.covariates.iter().zip(beta.iter()).map(|(x, b)| x * b).sum();
            weights[i] * (link.apply(r.time) - eta).powi(2)
        })
        .sum::<f64>()
        / n;
    if !loss.is_finite() {
        return Err(Error::NonFiniteObjective("weighted least-squares loss not finite".into()));
    }
    Ok(LassoFit {
        beta: beta.iter().copied().collect(),
        lambda: 0.0,
        objective: loss,
        iterations: 1,
        converged: true,
    })
}

/// Names of the covariates with nonzero coefficients.
pub fn selection_pattern(fit: &LassoFit, covariate_names: &[String]) -> Vec<String> {
    debug_assert_eq!(fit.beta.len(), covariate_names.len());
    fit.beta
        .iter()
        .zip(covariate_names)
        .filter(|(b, _)| **b != 0.0)
        .map(|(_, name)| name.clone())
        .collect()
}

/// K-fold cross-validation over the lambda path.
///
/// Folds partition the event subjects only; censored records stay in every
/// training set so the training-fold Kaplan-Meier weights see them. The CV
/// error of a held-out event is its training-fold-weighted squared
/// prediction error; ties on the mean error prefer the larger lambda.
pub fn cv_select_lambda(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    config: &LassoConfig,
) -> Result<CvResult> {
    let n_events = dataset.n_events();
    if config.cv_folds < 2 || config.cv_folds > n_events {
        return Err(Error::TooFewEvents { folds: config.cv_folds, n_events });
    }
    let mut grid = config.lambda_grid.clone();
    if grid.is_empty() {
        return Err(Error::InvalidDataset("empty lambda grid".into()));
    }
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
    grid.dedup();

    let mut event_idx: Vec<usize> = dataset
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.event)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.cv_seed);
    event_idx.shuffle(&mut rng);
    // deal round-robin so fold sizes differ by at most one
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); config.cv_folds];
    for (pos, idx) in event_idx.iter().enumerate() {
        folds[pos % config.cv_folds].push(*idx);
    }

    let mut total_error = vec![0.0; grid.len()];
    for fold in &folds {
        let held: Vec<&SurvivalRecord> =
            fold.iter().map(|&i| &dataset.records()[i]).collect();
        let train: Vec<SurvivalRecord> = dataset
            .records()
            .iter()
            .enumerate()
            .filter(|(i, _)| !fold.contains(i))
            .map(|(_, r)| r.clone())
            .collect();
        let train_ds = RestrictedDataset::from_restricted(train, dataset.tau());
        let train_km = crate::survival::km_estimate(&train_ds)?;
        let train_w = crate::survival::ispw_weights(&train_ds, &train_km)?;

        let problem = Problem::build(&train_ds, &train_w, config)?;
        let mut warm: Option<Vec<f64>> = None;
        for (gi, &lambda) in grid.iter().enumerate() {
            // warm starts run on the internal (standardized) scale, so refit
            // from the previous solution's original-scale coefficients only
            // when unstandardized; otherwise cold-start each grid point.
            let fit = coordinate_descent(
                &problem,
                lambda,
                config.tol,
                config.max_iter,
                if config.standardize { None } else { warm.as_deref() },
            )?;
            for r in &held {
                // same boundary rule as ispw_weights: events at tau use the
                // left limit
                let s = if r.time >= dataset.tau() {
                    train_km.eval_before(dataset.tau())
                } else {
                    train_km.eval(r.time)
                };
                if s <= 0.0 {
                    return Err(Error::DegenerateWeight { id: r.id.clone(), time: r.time });
                }
                let eta: f64 =
                    r.covariates.iter().zip(&fit.beta).map(|(x, b)| x * b).sum();
                total_error[gi] += (config.link.apply(r.time) - eta).powi(2) / s;
            }
            warm = Some(fit.beta);
        }
    }

    let mean_cv_error: Vec<f64> =
        total_error.iter().map(|e| e / n_events as f64).collect();
    let mut best = 0usize;
    for (i, e) in mean_cv_error.iter().enumerate() {
        if *e < mean_cv_error[best] {
            best = i;
        }
    }
    let chosen_lambda = grid[best];
    let refit_config = LassoConfig { lambda: chosen_lambda, ..config.clone() };
    let fit_at_chosen = weighted_lasso_fit(dataset, weights, &refit_config)?;
    Ok(CvResult { lambda_grid: grid, mean_cv_error, chosen_lambda, fit_at_chosen })
}
