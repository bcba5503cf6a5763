//! Library backing the `ispw` command-line tool: request types, CSV
//! ingestion, dispatch into the estimators, and report assembly.

pub mod ingest;
pub mod report;

use std::path::PathBuf;

use ispw_core::sim::{LassoTuning, Method, StudyConfig};
use ispw_core::{
    cv_select_lambda, ispw_weights, km_estimate, restrict, run_mse_study, run_selection_study,
    selection_pattern, subset_search, tian_fit, weighted_lasso_fit, AicConvention,
    DistributionKind, LassoConfig, Link, ScenarioSpec, TauEventRule,
};
use serde::Serialize;
use thiserror::Error;

pub use ingest::{ingest_csv, IngestOptions, IngestedData};
pub use report::{AicSearchRow, AnalysisReport, Payload};

/// Exit code 2.
pub const EXIT_INPUT: i32 = 2;
/// Exit code 3.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Numerical(#[from] ispw_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(e) => match e {
                ispw_core::Error::InvalidDataset(_) => EXIT_INPUT,
                _ => EXIT_NUMERICAL,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "code": self.exit_code(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Options shared by the dataset-analysis commands.
#[derive(Debug, Clone, Serialize)]
pub struct DataOptions {
    pub input: PathBuf,
    pub tau: f64,
    pub tau_event_rule: TauEventRule,
    pub add_intercept: bool,
}

#[derive(Debug, Clone)]
pub enum Command {
    Km(DataOptions),
    Tian(DataOptions, Link),
    Lasso(DataOptions, LassoConfig),
    CvLasso(DataOptions, LassoConfig),
    AicSearch {
        data: DataOptions,
        kinds: Vec<DistributionKind>,
        subsets: Option<Vec<Vec<usize>>>,
        convention: AicConvention,
    },
    Simulate {
        scenario: usize,
        sizes: Vec<usize>,
        reps: usize,
        seed: u64,
        study: StudyKind,
        lambda: f64,
        cv: bool,
        workers: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Mse,
    Selection,
    Both,
}

#[derive(Debug, Clone)]
pub struct AnalysisRequest {
    pub command: Command,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Km(..) => "km",
        Command::Tian(..) => "tian",
        Command::Lasso(..) => "lasso",
        Command::CvLasso(..) => "cv-lasso",
        Command::AicSearch { .. } => "aic-search",
        Command::Simulate { .. } => "simulate",
    }
}

fn load(data: &DataOptions) -> Result<(ispw_core::RestrictedDataset, Vec<String>), CliError> {
    if !(data.tau > 0.0) {
        return Err(CliError::Input(format!("tau must be positive, got {}", data.tau)));
    }
    let ingested =
        ingest_csv(&data.input, &IngestOptions { add_intercept: data.add_intercept })?;
    let ds = restrict(&ingested.records, data.tau, data.tau_event_rule)?;
    Ok((ds, ingested.covariate_names))
}

fn report(command: &Command, config: serde_json::Value, payload: Payload, warnings: Vec<String>) -> AnalysisReport {
    AnalysisReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command_name(command).to_string(),
        config,
        payload,
        warnings,
    }
}

/// Execute a request and assemble its report.
pub fn run(request: &AnalysisRequest) -> Result<AnalysisReport, CliError> {
    match &request.command {
        Command::Km(data) => {
            let (ds, _) = load(data)?;
            let km = km_estimate(&ds)?;
            let censor_marks: Vec<(f64, f64)> = ds
                .records()
                .iter()
                .filter(|r| !r.event)
                .map(|r| (r.time, km.eval(r.time)))
                .collect();
            let payload = Payload::KmCurve {
                tau: ds.tau(),
                n: ds.n(),
                n_events: ds.n_events(),
                n_censored: ds.n_censored(),
                points: km.step_points(),
                censor_marks,
            };
            Ok(report(
                &request.command,
                serde_json::json!({ "data": data, "command": "km" }),
                payload,
                Vec::new(),
            ))
        }
        Command::Tian(data, link) => {
            let (ds, names) = load(data)?;
            let km = km_estimate(&ds)?;
            let w = ispw_weights(&ds, &km)?;
            let fit = tian_fit(&ds, &w, *link)?;
            let selected = selection_pattern(&fit, &names);
            let payload = Payload::Coefficients {
                names,
                estimates: fit.beta.clone(),
                lambda: 0.0,
                objective: fit.objective,
                converged: fit.converged,
                selected,
            };
            Ok(report(
                &request.command,
                serde_json::json!({ "data": data, "link": link }),
                payload,
                Vec::new(),
            ))
        }
        Command::Lasso(data, config) => {
            let (ds, names) = load(data)?;
            let km = km_estimate(&ds)?;
            let w = ispw_weights(&ds, &km)?;
            let fit = weighted_lasso_fit(&ds, &w, config)?;
            let mut warnings = Vec::new();
            if !fit.converged {
                warnings.push(format!(
                    "coordinate descent did not converge within {} sweeps",
                    config.max_iter
                ));
            }
            let selected = selection_pattern(&fit, &names);
            let payload = Payload::Coefficients {
                names,
                estimates: fit.beta.clone(),
                lambda: fit.lambda,
                objective: fit.objective,
                converged: fit.converged,
                selected,
            };
            Ok(report(
                &request.command,
                serde_json::json!({ "data": data, "lasso": config }),
                payload,
                warnings,
            ))
        }
        Command::CvLasso(data, config) => {
            let (ds, names) = load(data)?;
            let km = km_estimate(&ds)?;
            let w = ispw_weights(&ds, &km)?;
            let cv = cv_select_lambda(&ds, &w, config)?;
            let mut warnings = Vec::new();
            if !cv.fit_at_chosen.converged {
                warnings.push("refit at the chosen lambda did not converge".to_string());
            }
            let selected = selection_pattern(&cv.fit_at_chosen, &names);
            let payload = Payload::CvCurve {
                lambda_grid: cv.lambda_grid.clone(),
                mean_cv_error: cv.mean_cv_error.clone(),
                chosen_lambda: cv.chosen_lambda,
                names,
                estimates: cv.fit_at_chosen.beta.clone(),
                selected,
            };
            Ok(report(
                &request.command,
                serde_json::json!({ "data": data, "lasso": config }),
                payload,
                warnings,
            ))
        }
        Command::AicSearch { data, kinds, subsets, convention } => {
            let (ds, names) = load(data)?;
            let km = km_estimate(&ds)?;
            let w = ispw_weights(&ds, &km)?;
            for s in subsets.iter().flatten() {
                if s.iter().any(|&j| j >= names.len()) {
                    return Err(CliError::Input(format!(
                        "subset {s:?} indexes past the {} covariates",
                        names.len()
                    )));
                }
            }
            let search = subset_search(&ds, &w, kinds, subsets.as_deref(), *convention)?;
            let row = |fit: &ispw_core::AftFit| AicSearchRow {
                distribution: fit.params.kind,
                variables: fit.subset.iter().map(|&j| names[j].clone()).collect(),
                estimates: fit.params.beta.clone(),
                scale: fit.scale_reported(),
                k: fit.k,
                loglik: fit.loglik,
                aic: fit.aic,
                converged: fit.converged,
            };
            let mut warnings: Vec<String> = search
                .fits
                .iter()
                .filter(|f| !f.converged)
                .map(|f| {
                    format!(
                        "{} fit on subset {:?} did not converge; excluded from ranking",
                        f.params.kind.label(),
                        f.subset
                    )
                })
                .collect();
            warnings.extend(search.failures.iter().map(|(kind, subset, msg)| {
                format!("{} fit on subset {subset:?} failed: {msg}", kind.label())
            }));
            let payload = Payload::AicSearch {
                rows: search.fits.iter().map(row).collect(),
                best_per_kind: kinds
                    .iter()
                    .filter_map(|k| search.best_for_kind(*k).map(row))
                    .collect(),
                best: search.best().map(row),
            };
            Ok(report(
                &request.command,
                serde_json::json!({
                    "data": data,
                    "distributions": kinds,
                    "subsets": subsets,
                    "aic": convention,
                }),
                payload,
                warnings,
            ))
        }
        Command::Simulate { scenario, sizes, reps, seed, study, lambda, cv, workers } => {
            let tuning = if *cv {
                LassoTuning::CrossValidated {
                    folds: 5,
                    grid: ispw_core::lasso::default_lambda_grid(),
                    seed: *seed,
                }
            } else {
                LassoTuning::Fixed(*lambda)
            };
            let config = StudyConfig {
                methods: Method::ALL.to_vec(),
                reps: *reps,
                lasso_tuning: tuning,
                workers: *workers,
            };
            let specs: Vec<ScenarioSpec> = sizes
                .iter()
                .map(|&n| ScenarioSpec::numbered(*scenario, n, *seed))
                .collect::<Result<_, _>>()?;
            let mut results = Vec::new();
            if matches!(study, StudyKind::Mse | StudyKind::Both) {
                results.extend(run_mse_study(&specs, &config)?);
            }
            if matches!(study, StudyKind::Selection | StudyKind::Both) {
                results.extend(run_selection_study(&specs, &config)?);
            }
            let warnings: Vec<String> = results
                .iter()
                .filter(|r| r.flagged)
                .map(|r| {
                    format!(
                        "{} (n = {}): {} of {} replications failed",
                        r.scenario.label, r.scenario.n, r.failures, r.replications
                    )
                })
                .collect();
            let payload = Payload::Simulation { results };
            // worker count is an execution detail: results are identical for
            // any value, so it stays out of the reproducibility echo
            Ok(report(
                &request.command,
                serde_json::json!({
                    "scenario": scenario,
                    "sizes": sizes,
                    "reps": reps,
                    "seed": seed,
                    "lambda": lambda,
                    "cv": cv,
                }),
                payload,
                warnings,
            ))
        }
    }
}

/// Render a report in the requested format.
pub fn render(report: &AnalysisReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
    }
}
