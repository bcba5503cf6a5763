//! CSV ingestion: header row with required `time` and `status` columns
//! (status 1 = event, 0 = censored), an optional `id` column, and every
//! remaining numeric column taken as a covariate in header order.

use std::path::Path;

use ispw_core::SurvivalRecord;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Prepend a constant-1 intercept column ahead of the file's covariates.
    pub add_intercept: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { add_intercept: true }
    }
}

#[derive(Debug, Clone)]
pub struct IngestedData {
    pub records: Vec<SurvivalRecord>,
    pub covariate_names: Vec<String>,
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<IngestedData, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;

    let headers: Vec<String> =
        reader
            .headers()
            .map_err(|e| CliError::Input(format!("bad header row: {e}")))?
            .iter()
            .map(|h| h.to_string())
            .collect();

    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let time_col = find("time")
        .ok_or_else(|| CliError::Input("missing required column `time`".into()))?;
    let status_col = find("status")
        .ok_or_else(|| CliError::Input("missing required column `status`".into()))?;
    let id_col = find("id");

    let covariate_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != time_col && i != status_col && Some(i) != id_col)
        .collect();

    let mut covariate_names: Vec<String> = Vec::new();
    if options.add_intercept {
        covariate_names.push("intercept".to_string());
    }
    covariate_names.extend(covariate_cols.iter().map(|&i| headers[i].clone()));

    let mut records = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| {
            CliError::Input(format!("row {}: {e}", row_idx + 2))
        })?;
        let cell = |col: usize| -> Result<f64, CliError> {
            let raw = row.get(col).unwrap_or("");
            if raw.is_empty() {
                return Err(CliError::Input(format!(
                    "missing value at row {}, column `{}`",
                    row_idx + 2,
                    headers[col]
                )));
            }
            raw.parse::<f64>().map_err(|_| {
                CliError::Input(format!(
                    "non-numeric value `{raw}` at row {}, column `{}`",
                    row_idx + 2,
                    headers[col]
                ))
            })
        };
        let time = cell(time_col)?;
        let status = cell(status_col)?;
        if status != 0.0 && status != 1.0 {
            return Err(CliError::Input(format!(
                "status must be 0 or 1 at row {}, got {status}",
                row_idx + 2
            )));
        }
        let id = match id_col {
            Some(c) => row.get(c).unwrap_or("").to_string(),
            None => format!("{}", row_idx + 1),
        };
        let mut covariates = Vec::with_capacity(covariate_names.len());
        if options.add_intercept {
            covariates.push(1.0);
        }
        for &c in &covariate_cols {
            covariates.push(cell(c)?);
        }
        records.push(SurvivalRecord::new(id, time, status == 1.0, covariates));
    }

    if records.is_empty() {
        return Err(CliError::Input(format!("{} has no data rows", path.display())));
    }
    Ok(IngestedData { records, covariate_names })
}
