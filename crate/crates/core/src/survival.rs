//! Data model, tau-restriction, Kaplan-Meier estimation, and inverse survival
//! probability weight construction shared by all estimators.
//!
//! All types are immutable after construction and all operations are pure
//! functions, so everything here is safe to share across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: observed time `R = min(T, C)`, event indicator, covariates.
///
/// `covariates` includes an explicit leading intercept entry of 1 when the
/// caller wants one; nothing here inserts it implicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub id: String,
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(id: impl Into<String>, time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self { id: id.into(), time, event, covariates }
    }
}

/// How the effective event indicator is set for records whose observed time
/// reaches the restriction time tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauEventRule {
    /// Keep the recorded event flag after truncation. Records censored at or
    /// beyond tau stay censored.
    #[default]
    AsRecorded,
    /// Any record observed to tau or beyond becomes an event at tau: its
    /// restricted time `min(R, tau)` is fully observed.
    TauReachedIsEvent,
}

/// Record collection after tau-restriction, with a design-matrix view.
///
/// Event flags are the effective indicators after applying the
/// [`TauEventRule`]; times are truncated at tau.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestrictedDataset {
    records: Vec<SurvivalRecord>,
    tau: f64,
    n_events: usize,
}

impl RestrictedDataset {
    /// Assemble from records that are already truncated at `tau` and carry
    /// effective event flags.
    pub(crate) fn from_restricted(records: Vec<SurvivalRecord>, tau: f64) -> Self {
        let n_events = records.iter().filter(|r| r.event).count();
        Self { records, tau, n_events }
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    pub fn n_censored(&self) -> usize {
        self.records.len() - self.n_events
    }

    /// Number of covariate columns (q), including any explicit intercept.
    pub fn q(&self) -> usize {
        self.records.first().map_or(0, |r| r.covariates.len())
    }

    /// Row iterator over (time, event, covariates).
    pub fn rows(&self) -> impl Iterator<Item = (f64, bool, &[f64])> {
        self.records.iter().map(|r| (r.time, r.event, r.covariates.as_slice()))
    }
}

/// Restrict observed times at `tau` and set effective event indicators.
pub fn restrict(
    records: &[SurvivalRecord],
    tau: f64,
    rule: TauEventRule,
) -> Result<RestrictedDataset> {
    if records.is_empty() {
        return Err(Error::InvalidDataset("no records".into()));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidDataset(format!("tau must be positive, got {tau}")));
    }
    let q = records[0].covariates.len();
    let mut out = Vec::with_capacity(records.len());
    let mut n_events = 0usize;
    for r in records {
        if !(r.time > 0.0) || !r.time.is_finite() {
            return Err(Error::InvalidDataset(format!(
                "record {}: time must be positive and finite, got {}",
                r.id, r.time
            )));
        }
        if r.covariates.len() != q {
            return Err(Error::InvalidDataset(format!(
                "record {}: covariate length {} differs from {}",
                r.id,
                r.covariates.len(),
                q
            )));
        }
        if r.covariates.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset(format!("record {}: non-finite covariate", r.id)));
        }
        let event = match rule {
            TauEventRule::AsRecorded => r.event,
            TauEventRule::TauReachedIsEvent => r.event || r.time >= tau,
        };
        if event {
            n_events += 1;
        }
        out.push(SurvivalRecord {
            id: r.id.clone(),
            time: r.time.min(tau),
            event,
            covariates: r.covariates.clone(),
        });
    }
    Ok(RestrictedDataset { records: out, tau, n_events })
}

/// Right-continuous product-limit estimate of the observed-time survival
/// function. Jumps occur only at event times; at tied times deaths are
/// processed before censorings (censored records at `t` stay in the risk set
/// for deaths at `t`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KaplanMeierCurve {
    jump_times: Vec<f64>,
    survival: Vec<f64>,
    at_risk: Vec<usize>,
    deaths: Vec<usize>,
}

impl KaplanMeierCurve {
    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn survival(&self) -> &[f64] {
        &self.survival
    }

    pub fn at_risk(&self) -> &[usize] {
        &self.at_risk
    }

    pub fn deaths(&self) -> &[usize] {
        &self.deaths
    }

    /// Step points (t, S(t)) including the origin (0, 1).
    pub fn step_points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.jump_times.len() + 1);
        pts.push((0.0, 1.0));
        pts.extend(self.jump_times.iter().copied().zip(self.survival.iter().copied()));
        pts
    }

    /// Right-continuous evaluation: 1 before the first jump, last value past
    /// the final jump.
    pub fn eval(&self, t: f64) -> f64 {
        // partition_point: first index with jump_times[i] > t
        let idx = self.jump_times.partition_point(|&jt| jt <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }

    /// Left limit S(t-): the survival just before `t`.
    pub fn eval_before(&self, t: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&jt| jt < t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }
}

/// Product-limit estimator of the survival function of the observed times.
pub fn km_estimate(dataset: &RestrictedDataset) -> Result<KaplanMeierCurve> {
    if dataset.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let mut order: Vec<usize> = (0..dataset.n()).collect();
    order.sort_by(|&a, &b| {
        dataset.records[a].time.partial_cmp(&dataset.records[b].time).unwrap()
    });

    let n = dataset.n();
    let mut jump_times = Vec::new();
    let mut survival = Vec::new();
    let mut at_risk_v = Vec::new();
    let mut deaths_v = Vec::new();

    let mut s = 1.0;
    let mut i = 0usize;
    let mut removed = 0usize;
    while i < n {
        let t = dataset.records[order[i]].time;
        let mut deaths = 0usize;
        let mut ties = 0usize;
        while i + ties < n && dataset.records[order[i + ties]].time == t {
            if dataset.records[order[i + ties]].event {
                deaths += 1;
            }
            ties += 1;
        }
        let at_risk = n - removed;
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            jump_times.push(t);
            survival.push(s);
            at_risk_v.push(at_risk);
            deaths_v.push(deaths);
        }
        removed += ties;
        i += ties;
    }
    Ok(KaplanMeierCurve { jump_times, survival, at_risk: at_risk_v, deaths: deaths_v })
}

/// Per-record inverse survival probability weights `w_i = d_i / S(Y_i)`:
/// zero for censored records, `1/S(Y_i)` for events, with `S` evaluated
/// right-continuously at the event time (the post-jump value).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IspwWeightVector {
    weights: Vec<f64>,
}

impl IspwWeightVector {
    /// Wrap an externally supplied weight vector. The caller is responsible
    /// for pairing it with the dataset it was computed for.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sum of weights (the effective subject count).
    pub fn effective_n(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl std::ops::Index<usize> for IspwWeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

/// Build ISPW weights from a dataset and its Kaplan-Meier curve.
///
/// Events strictly before tau are weighted by the post-jump survival at
/// their time. Events at the restriction boundary use the left limit
/// `S(tau-)` — the probability of still being at risk at tau — which is
/// positive whenever any record reaches tau, whereas the post-jump value is
/// zero whenever the entire tail consists of deaths.
pub fn ispw_weights(
    dataset: &RestrictedDataset,
    curve: &KaplanMeierCurve,
) -> Result<IspwWeightVector> {
    let mut weights = Vec::with_capacity(dataset.n());
    for r in dataset.records() {
        if !r.event {
            weights.push(0.0);
            continue;
        }
        let s = if r.time >= dataset.tau() {
            curve.eval_before(dataset.tau())
        } else {
            curve.eval(r.time)
        };
        if s <= 0.0 {
            return Err(Error::DegenerateWeight { id: r.id.clone(), time: r.time });
        }
        weights.push(1.0 / s);
    }
    Ok(IspwWeightVector { weights })
}
