//! Inverse-survival-probability-weighted likelihoods for log-normal, Weibull,
//! and log-logistic accelerated failure time models: analytic log-density,
//! score, and Hessian; Newton maximization with a closed-form log-normal
//! solution; AIC; and exhaustive covariate-subset search.
//!
//! The model is `log Y = x' beta + sigma * eps` with `eps` standard normal
//! (log-normal), minimum-Gumbel with density `exp(e - exp(e))` (Weibull), or
//! standard logistic (log-logistic). The scale coordinate of the score and
//! Hessian is `sigma^2` for the log-normal family and `sigma` for the other
//! two.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;
use crate::survival::{IspwWeightVector, RestrictedDataset};

/// Infinity-norm score threshold for Newton convergence.
const SCORE_TOL: f64 = 1e-8;
/// Step-size threshold for Newton convergence.
const STEP_TOL: f64 = 1e-10;
const MAX_NEWTON_ITER: usize = 200;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    LogNormal,
    Weibull,
    LogLogistic,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 3] =
        [DistributionKind::LogNormal, DistributionKind::Weibull, DistributionKind::LogLogistic];

    pub fn label(self) -> &'static str {
        match self {
            DistributionKind::LogNormal => "log-normal",
            DistributionKind::Weibull => "weibull",
            DistributionKind::LogLogistic => "log-logistic",
        }
    }

    /// Draw from the error law of this family.
    pub fn sample_error<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            DistributionKind::LogNormal => rng.sample(rand_distr::StandardNormal),
            DistributionKind::Weibull => {
                // eps = log E with E ~ Exp(1) has density exp(e - exp(e))
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                (-u.ln()).ln()
            }
            DistributionKind::LogLogistic => {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                (u / (1.0 - u)).ln()
            }
        }
    }
}

/// `log(1 + exp(e))` without overflow.
fn softplus(e: f64) -> f64 {
    if e > 35.0 {
        e
    } else if e < -35.0 {
        e.exp()
    } else {
        e.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-e))` without overflow.
fn sigmoid(e: f64) -> f64 {
    if e >= 0.0 {
        1.0 / (1.0 + (-e).exp())
    } else {
        let ex = e.exp();
        ex / (1.0 + ex)
    }
}

/// Parameters of one AFT fit: `theta = (beta, sigma)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AftParams {
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub kind: DistributionKind,
}

impl AftParams {
    pub fn new(kind: DistributionKind, beta: Vec<f64>, sigma: f64) -> Self {
        Self { beta, sigma, kind }
    }
}

/// Log-density of the restricted time `y` given linear predictor `eta` and
/// scale `sigma`.
pub fn log_density(kind: DistributionKind, y: f64, eta: f64, sigma: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::DomainError(format!("y must be positive, got {y}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::DomainError(format!("sigma must be positive, got {sigma}")));
    }
    let z = y.ln();
    let eps = (z - eta) / sigma;
    Ok(match kind {
        DistributionKind::LogNormal => {
            -0.5 * (2.0 * std::f64::consts::PI * y * y * sigma * sigma).ln() - 0.5 * eps * eps
        }
        DistributionKind::Weibull => -sigma.ln() - z + eps - eps.exp(),
        DistributionKind::LogLogistic => -sigma.ln() - z + eps - 2.0 * softplus(eps),
    })
}

/// Per-record derivative bundle in the coordinates declared per family
/// (`sigma^2` for log-normal, `sigma` for Weibull and log-logistic).
struct Derivs {
    d_eta: f64,
    d_scale: f64,
    d2_eta2: f64,
    d2_scale2: f64,
    d2_eta_scale: f64,
}

fn derivs(kind: DistributionKind, z: f64, eta: f64, sigma: f64) -> Derivs {
    let r = z - eta;
    match kind {
        DistributionKind::LogNormal => {
            let v = sigma * sigma;
            Derivs {
                d_eta: r / v,
                d_scale: -0.5 / v + r * r / (2.0 * v * v),
                d2_eta2: -1.0 / v,
                d2_scale2: 0.5 / (v * v) - r * r / (v * v * v),
                d2_eta_scale: -r / (v * v),
            }
        }
        DistributionKind::Weibull => {
            let eps = r / sigma;
            let u = eps.exp();
            let s2 = sigma * sigma;
            Derivs {
                d_eta: (u - 1.0) / sigma,
                d_scale: (-1.0 - eps + u * eps) / sigma,
                d2_eta2: -u / s2,
                d2_scale2: (1.0 + 2.0 * eps - 2.0 * u * eps - u * eps * eps) / s2,
                d2_eta_scale: (1.0 - u * eps - u) / s2,
            }
        }
        DistributionKind::LogLogistic => {
            let eps = r / sigma;
            let p = sigmoid(eps);
            let pq = p * (1.0 - p);
            let s2 = sigma * sigma;
            Derivs {
                d_eta: (2.0 * p - 1.0) / sigma,
                d_scale: (-1.0 - eps + 2.0 * p * eps) / sigma,
                d2_eta2: -2.0 * pq / s2,
                d2_scale2: (1.0 + 2.0 * eps - 4.0 * p * eps - 2.0 * pq * eps * eps) / s2,
                d2_eta_scale: (1.0 - 2.0 * pq * eps - 2.0 * p) / s2,
            }
        }
    }
}

fn check_subset(dataset: &RestrictedDataset, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::DomainError("empty covariate subset".into()));
    }
    let q = dataset.q();
    if subset.iter().any(|&j| j >= q) {
        return Err(Error::DomainError(format!(
            "subset index out of range (q = {q}): {subset:?}"
        )));
    }
    Ok(())
}

fn eta_for(record_covs: &[f64], subset: &[usize], beta: &[f64]) -> f64 {
    subset.iter().zip(beta).map(|(&j, b)| record_covs[j] * b).sum()
}

/// Weighted log-likelihood: `sum_i w_i log f(Y_i | x_i, theta)` over event
/// records. Censored records carry weight zero and contribute nothing.
pub fn ispw_loglik(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    params: &AftParams,
    subset: &[usize],
) -> Result<f64> {
    check_subset(dataset, subset)?;
    if dataset.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    if params.beta.len() != subset.len() {
        return Err(Error::DomainError(format!(
            "beta length {} does not match subset size {}",
            params.beta.len(),
            subset.len()
        )));
    }
    let mut total = 0.0;
    for (i, r) in dataset.records().iter().enumerate() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let eta = eta_for(&r.covariates, subset, &params.beta);
        total += w * log_density(params.kind, r.time, eta, params.sigma)?;
    }
    Ok(total)
}

/// Analytic gradient of [`ispw_loglik`] in `(beta, scale)`, where the scale
/// coordinate is `sigma^2` for the log-normal family and `sigma` otherwise.
pub fn score(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    params: &AftParams,
    subset: &[usize],
) -> Result<Vec<f64>> {
    check_subset(dataset, subset)?;
    if !(params.sigma > 0.0) {
        return Err(Error::DomainError("sigma must be positive".into()));
    }
    let k = subset.len();
    let mut g = vec![0.0; k + 1];
    for (i, r) in dataset.records().iter().enumerate() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let eta = eta_for(&r.covariates, subset, &params.beta);
        let d = derivs(params.kind, r.time.ln(), eta, params.sigma);
        for (gj, &j) in g.iter_mut().zip(subset) {
            *gj += w * d.d_eta * r.covariates[j];
        }
        g[k] += w * d.d_scale;
    }
    Ok(g)
}

/// Analytic Hessian of [`ispw_loglik`], symmetric, in the same coordinates
/// as [`score`].
pub fn hessian(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    params: &AftParams,
    subset: &[usize],
) -> Result<DMatrix<f64>> {
    check_subset(dataset, subset)?;
    if !(params.sigma > 0.0) {
        return Err(Error::DomainError("sigma must be positive".into()));
    }
    let k = subset.len();
    let mut h = DMatrix::zeros(k + 1, k + 1);
    for (i, r) in dataset.records().iter().enumerate() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let eta = eta_for(&r.covariates, subset, &params.beta);
        let d = derivs(params.kind, r.time.ln(), eta, params.sigma);
        for (a, &ja) in subset.iter().enumerate() {
            let xa = r.covariates[ja];
            for (b, &jb) in subset.iter().enumerate().skip(a) {
                h[(a, b)] += w * d.d2_eta2 * xa * r.covariates[jb];
            }
            h[(a, k)] += w * d.d2_eta_scale * xa;
        }
        h[(k, k)] += w * d.d2_scale2;
    }
    for a in 0..=k {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    Ok(h)
}

/// One maximized fit with its information-criterion bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AftFit {
    pub params: AftParams,
    pub loglik: f64,
    /// Parameter count: `|subset| + 1` when the scale parameter is counted.
    pub k: usize,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub subset: Vec<usize>,
}

impl AftFit {
    /// Scale value on the per-family reporting convention: `sigma^2` for the
    /// log-normal family, `sigma` otherwise.
    pub fn scale_reported(&self) -> f64 {
        match self.params.kind {
            DistributionKind::LogNormal => self.params.sigma * self.params.sigma,
            _ => self.params.sigma,
        }
    }
}

/// AIC bookkeeping choices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AicConvention {
    /// Count the scale parameter in `k` (so `k = |subset| + 1`).
    pub count_scale_param: bool,
    /// Divide the log-likelihood by the subject count before forming the
    /// criterion.
    pub scale_by_n: bool,
}

impl Default for AicConvention {
    fn default() -> Self {
        Self { count_scale_param: true, scale_by_n: false }
    }
}

impl AicConvention {
    pub fn value(&self, loglik: f64, subset_len: usize, n: usize) -> f64 {
        let k = if self.count_scale_param { subset_len + 1 } else { subset_len };
        let l = if self.scale_by_n { loglik / n as f64 } else { loglik };
        -2.0 * l + 2.0 * k as f64
    }

    pub fn k(&self, subset_len: usize) -> usize {
        if self.count_scale_param {
            subset_len + 1
        } else {
            subset_len
        }
    }
}

/// `-2 loglik + 2k`.
pub fn aic(loglik: f64, k: usize) -> f64 {
    -2.0 * loglik + 2.0 * k as f64
}

/// Closed-form log-normal maximizer: weighted least squares for `beta`,
/// weighted mean squared residual for `sigma^2`.
fn lognormal_closed_form(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    subset: &[usize],
) -> Result<(Vec<f64>, f64)> {
    let rows = dataset.records().iter().enumerate().filter(|(i, _)| weights[*i] > 0.0).map(
        |(i, r)| {
            (weights[i], r.time.ln(), r.covariates.as_slice())
        },
    );
    // gather subset columns
    let k = subset.len();
    let mut gram = DMatrix::zeros(k, k);
    let mut moment = DVector::zeros(k);
    let mut wsum = 0.0;
    let mut rows_vec = Vec::new();
    for (w, z, covs) in rows {
        let x: Vec<f64> = subset.iter().map(|&j| covs[j]).collect();
        for a in 0..k {
            moment[a] += w * z * x[a];
            for b in a..k {
                gram[(a, b)] += w * x[a] * x[b];
            }
        }
        wsum += w;
        rows_vec.push((w, z, x));
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let beta = solve_symmetric(&gram, &moment)?;
    let ss: f64 = rows_vec
        .iter()
        .map(|(w, z, x)| {
            let eta: f64 = x.iter().zip(beta.iter()).map(|(xi, bi)| xi * bi).sum();
            w * (z - eta).powi(2)
        })
        .sum();
    let sigma2 = ss / wsum;
    if !(sigma2 > 0.0) {
        return Err(Error::DomainError(
            "zero weighted residual variance: scale parameter is degenerate".into(),
        ));
    }
    Ok((beta.iter().copied().collect(), sigma2))
}

/// Score and Hessian in the Newton working coordinates `(beta, log sigma)`.
fn newton_system(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    params: &AftParams,
    subset: &[usize],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = subset.len();
    let g = score(dataset, weights, params, subset)?;
    let h = hessian(dataset, weights, params, subset)?;
    let sigma = params.sigma;
    let mut gv = DVector::zeros(k + 1);
    let mut hm = DMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        gv[a] = g[a];
        for b in 0..k {
            hm[(a, b)] = h[(a, b)];
        }
    }
    // chain rule: d/ds = sigma d/dsigma with s = log sigma
    gv[k] = sigma * g[k];
    for a in 0..k {
        hm[(a, k)] = sigma * h[(a, k)];
        hm[(k, a)] = hm[(a, k)];
    }
    hm[(k, k)] = sigma * sigma * h[(k, k)] + sigma * g[k];
    Ok((gv, hm))
}

/// Maximize the weighted log-likelihood for one family over one covariate
/// subset. Log-normal uses the closed form (`init` is ignored there); the
/// other families run damped Newton on `(beta, log sigma)` initialized from
/// the log-normal solution unless `init` overrides it.
pub fn mle_fit(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    kind: DistributionKind,
    subset: &[usize],
    init: Option<AftParams>,
) -> Result<AftFit> {
    check_subset(dataset, subset)?;
    if dataset.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let convention = AicConvention::default();
    if kind == DistributionKind::LogNormal {
        // the closed form is the unique maximizer, so any init is moot
        let (beta, sigma2) = lognormal_closed_form(dataset, weights, subset)?;
        let params = AftParams::new(kind, beta, sigma2.sqrt());
        let loglik = ispw_loglik(dataset, weights, &params, subset)?;
        return Ok(AftFit {
            aic: convention.value(loglik, subset.len(), dataset.n()),
            k: convention.k(subset.len()),
            params,
            loglik,
            converged: true,
            iterations: 0,
            subset: subset.to_vec(),
        });
    }

    let mut params = match init {
        Some(p) => {
            if p.beta.len() != subset.len() || !(p.sigma > 0.0) {
                return Err(Error::DomainError("bad initial parameters".into()));
            }
            AftParams::new(kind, p.beta, p.sigma)
        }
        None => {
            let (beta, sigma2) = lognormal_closed_form(dataset, weights, subset)?;
            AftParams::new(kind, beta, sigma2.sqrt())
        }
    };
    let k = subset.len();
    let mut loglik = ispw_loglik(dataset, weights, &params, subset)?;
    if !loglik.is_finite() {
        return Err(Error::NonFiniteObjective("log-likelihood not finite at the start".into()));
    }
    let mut converged = false;
    let mut iterations = 0usize;

    'outer: for _ in 0..MAX_NEWTON_ITER {
        iterations += 1;
        let (g, h) = newton_system(dataset, weights, &params, subset)?;
        if g.amax() < SCORE_TOL {
            converged = true;
            break;
        }
        if g.iter().any(|v| !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
            break;
        }
        // ascent direction: (-H + ridge) delta = g
        let mut ridge = 0.0;
        let mut delta = None;
        for _ in 0..16 {
            let mut a = -&h;
            for d in 0..=k {
                a[(d, d)] += ridge;
            }
            match a.cholesky() {
                Some(chol) => {
                    delta = Some(chol.solve(&g));
                    break;
                }
                None => {
                    let scale = h.diagonal().amax().max(1.0);
                    ridge = if ridge == 0.0 { 1e-8 * scale } else { ridge * 10.0 };
                }
            }
        }
        let Some(delta) = delta else { break };

        // halve until the log-likelihood does not decrease
        let mut t = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let trial_beta: Vec<f64> =
                params.beta.iter().zip(delta.iter()).map(|(b, d)| b + t * d).collect();
            let trial_sigma = params.sigma * (t * delta[k]).exp();
            let trial = AftParams::new(kind, trial_beta, trial_sigma);
            let trial_ll = ispw_loglik(dataset, weights, &trial, subset)?;
            if trial_ll.is_finite() && trial_ll >= loglik - 1e-12 * loglik.abs().max(1.0) {
                debug_assert!(trial_ll >= loglik - 1e-9 * loglik.abs().max(1.0));
                let step = t * delta.amax();
                params = trial;
                loglik = trial_ll;
                if step < STEP_TOL {
                    converged = true;
                    break 'outer;
                }
                continue 'outer;
            }
            t *= 0.5;
        }
        break; // no acceptable step
    }

    Ok(AftFit {
        aic: convention.value(loglik, subset.len(), dataset.n()),
        k: convention.k(subset.len()),
        params,
        loglik,
        converged,
        iterations,
        subset: subset.to_vec(),
    })
}

/// Exhaustive (kind, subset) grid search ranked by AIC.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetSearchResult {
    /// Every attempted fit, ordered by subset position then family.
    pub fits: Vec<AftFit>,
    /// Fit attempts that errored out: (family, subset, message).
    pub failures: Vec<(DistributionKind, Vec<usize>, String)>,
    pub aic_convention: AicConvention,
}

impl SubsetSearchResult {
    /// Converged fits in ascending AIC order.
    pub fn ranked(&self) -> Vec<&AftFit> {
        let mut v: Vec<&AftFit> = self.fits.iter().filter(|f| f.converged).collect();
        v.sort_by(|a, b| a.aic.partial_cmp(&b.aic).unwrap());
        v
    }

    /// Smallest-AIC converged fit for one family.
    pub fn best_for_kind(&self, kind: DistributionKind) -> Option<&AftFit> {
        self.ranked().into_iter().find(|f| f.params.kind == kind)
    }

    /// Smallest-AIC converged fit overall.
    pub fn best(&self) -> Option<&AftFit> {
        self.ranked().into_iter().next()
    }
}

/// All subsets of `0..q` that contain `intercept_col`, in ascending size
/// then lexicographic order.
pub fn subsets_with_intercept(q: usize, intercept_col: usize) -> Vec<Vec<usize>> {
    assert!(q <= 20, "use an explicit candidate list for wide designs");
    let mut out: Vec<Vec<usize>> = Vec::new();
    for mask in 0u32..(1 << q) {
        if mask & (1 << intercept_col) == 0 {
            continue;
        }
        let subset: Vec<usize> = (0..q).filter(|j| mask & (1 << j) != 0).collect();
        out.push(subset);
    }
    out.sort_by_key(|s| (s.len(), s.clone()));
    out
}

/// Fit every (family, subset) pair and rank by AIC. Non-converged fits are
/// kept in the report but excluded from the ranking.
pub fn subset_search(
    dataset: &RestrictedDataset,
    weights: &IspwWeightVector,
    kinds: &[DistributionKind],
    candidate_subsets: Option<&[Vec<usize>]>,
    aic_convention: AicConvention,
) -> Result<SubsetSearchResult> {
    let default_subsets;
    let subsets: &[Vec<usize>] = match candidate_subsets {
        Some(s) => s,
        None => {
            default_subsets = subsets_with_intercept(dataset.q(), 0);
            &default_subsets
        }
    };
    let grid: Vec<(usize, usize)> = (0..subsets.len())
        .flat_map(|si| (0..kinds.len()).map(move |ki| (si, ki)))
        .collect();

    let mut results: Vec<((usize, usize), std::result::Result<AftFit, String>)> = grid
        .par_iter()
        .map(|&(si, ki)| {
            let r = mle_fit(dataset, weights, kinds[ki], &subsets[si], None)
                .map(|mut fit| {
                    fit.aic = aic_convention.value(fit.loglik, fit.subset.len(), dataset.n());
                    fit.k = aic_convention.k(fit.subset.len());
                    fit
                })
                .map_err(|e| e.to_string());
            ((si, ki), r)
        })
        .collect();
    results.sort_by_key(|((si, ki), _)| (*si, *ki));

    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for ((si, ki), r) in results {
        match r {
            Ok(fit) => fits.push(fit),
            Err(msg) => failures.push((kinds[ki], subsets[si].clone(), msg)),
        }
    }
    let result = SubsetSearchResult { fits, failures, aic_convention };
    if result.best().is_none() {
        return Err(Error::AllFitsFailed);
    }
    Ok(result)
}
