//! Analysis reports: a JSON form carrying full double precision and a CSV
//! form printing six significant digits.

use ispw_core::sim::{format_sig6, mse_table_csv, selection_table_csv};
use ispw_core::{DistributionKind, SimResult};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool_version: String,
    pub command: String,
    /// Effective configuration with every default resolved; enough to
    /// reproduce the run.
    pub config: serde_json::Value,
    pub payload: Payload,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    KmCurve {
        tau: f64,
        n: usize,
        n_events: usize,
        n_censored: usize,
        /// Step points (time, survival), starting at (0, 1).
        points: Vec<(f64, f64)>,
        /// Plot coordinates for censored records: (time, survival there).
        censor_marks: Vec<(f64, f64)>,
    },
    Coefficients {
        names: Vec<String>,
        estimates: Vec<f64>,
        lambda: f64,
        objective: f64,
        converged: bool,
        selected: Vec<String>,
    },
    CvCurve {
        lambda_grid: Vec<f64>,
        mean_cv_error: Vec<f64>,
        chosen_lambda: f64,
        names: Vec<String>,
        estimates: Vec<f64>,
        selected: Vec<String>,
    },
    AicSearch {
        rows: Vec<AicSearchRow>,
        best_per_kind: Vec<AicSearchRow>,
        best: Option<AicSearchRow>,
    },
    Simulation {
        results: Vec<SimResult>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AicSearchRow {
    pub distribution: DistributionKind,
    pub variables: Vec<String>,
    pub estimates: Vec<f64>,
    /// Scale on the per-family reporting convention (sigma^2 for
    /// log-normal, sigma otherwise).
    pub scale: f64,
    pub k: usize,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        match &self.payload {
            Payload::KmCurve { points, censor_marks, .. } => {
                let mut out = String::from("type,time,survival\n");
                for (t, s) in points {
                    out.push_str(&format!("step,{},{}\n", format_sig6(*t), format_sig6(*s)));
                }
                for (t, s) in censor_marks {
                    out.push_str(&format!("censor,{},{}\n", format_sig6(*t), format_sig6(*s)));
                }
                out
            }
            Payload::Coefficients { names, estimates, .. } => {
                let mut out = String::from("name,estimate\n");
                for (n, e) in names.iter().zip(estimates) {
                    out.push_str(&format!("{n},{}\n", format_sig6(*e)));
                }
                out
            }
            Payload::CvCurve { lambda_grid, mean_cv_error, chosen_lambda, names, estimates, .. } => {
                let mut out = String::from("lambda,mean_cv_error,chosen\n");
                for (l, e) in lambda_grid.iter().zip(mean_cv_error) {
                    let mark = if l == chosen_lambda { "*" } else { "" };
                    out.push_str(&format!(
                        "{},{},{mark}\n",
                        format_sig6(*l),
                        format_sig6(*e)
                    ));
                }
                out.push('\n');
                out.push_str("name,estimate\n");
                for (n, e) in names.iter().zip(estimates) {
                    out.push_str(&format!("{n},{}\n", format_sig6(*e)));
                }
                out
            }
            Payload::AicSearch { rows, .. } => {
                let mut out = String::from("distribution,variables,estimates,scale,k,loglik,aic,converged\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        r.distribution.label(),
                        r.variables.join(" "),
                        r.estimates.iter().map(|e| format_sig6(*e)).collect::<Vec<_>>().join(" "),
                        format_sig6(r.scale),
                        r.k,
                        format_sig6(r.loglik),
                        format_sig6(r.aic),
                        r.converged
                    ));
                }
                out
            }
            Payload::Simulation { results } => {
                let has_mse = results.iter().any(|r| !r.mse.is_empty());
                let has_sel = results.iter().any(|r| !r.selection.is_empty());
                let mut out = String::new();
                if has_mse {
                    out.push_str(&mse_table_csv(results));
                }
                if has_mse && has_sel {
                    out.push('\n');
                }
                if has_sel {
                    out.push_str(&selection_table_csv(results));
                }
                out
            }
        }
    }
}
