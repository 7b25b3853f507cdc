use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One scored run: the unit aggregated by [`comparison_table`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub case: String,
    pub model: String,
    pub seed: u64,
    pub mse: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub case: String,
    pub model: String,
    pub runs: usize,
    pub mse_mean: f64,
    pub mse_sd: f64,
    pub r2_mean: f64,
    pub r2_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
}

/// Two-pass mean and sample standard deviation (0 for a single value).
fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups runs by `(case, model)` in first-seen order.
pub fn comparison_table(runs: &[RunRecord]) -> Result<ComparisonTable> {
    if runs.is_empty() {
        return Err(Error::EmptyGroup("no runs to tabulate".into()));
    }
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in runs {
        let key = (r.case.as_str(), r.model.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let rows = keys
        .into_iter()
        .map(|(case, model)| {
            let group: Vec<&RunRecord> = runs.iter().filter(|r| r.case == case && r.model == model).collect();
            let (mse_mean, mse_sd) = mean_sd(&group.iter().map(|r| r.mse).collect::<Vec<_>>());
            let (r2_mean, r2_sd) = mean_sd(&group.iter().map(|r| r.r2).collect::<Vec<_>>());
            TableRow { case: case.into(), model: model.into(), runs: group.len(), mse_mean, mse_sd, r2_mean, r2_sd }
        })
        .collect();
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    pub fn row(&self, case: &str, model: &str) -> Result<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.case == case && r.model == model)
            .ok_or_else(|| Error::EmptyGroup(format!("no runs for case {case}, model {model}")))
    }

    /// Fails with `EmptyGroup` unless every `(case, model)` cell is present.
    pub fn require(&self, cases: &[&str], models: &[&str]) -> Result<()> {
        for c in cases {
            for m in models {
                self.row(c, m)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["case", "model", "runs", "mse_mean", "mse_sd", "r2_mean", "r2_sd"])?;
        for r in &self.rows {
            w.write_record([
                r.case.clone(),
                r.model.clone(),
                r.runs.to_string(),
                r.mse_mean.to_string(),
                r.mse_sd.to_string(),
                r.r2_mean.to_string(),
                r.r2_sd.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    /// Plain-text grid: one line per model, MSE and R² columns per case.
    pub fn to_text(&self) -> String {
        let mut cases: Vec<&str> = Vec::new();
        let mut models: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !cases.contains(&r.case.as_str()) {
                cases.push(&r.case);
            }
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
        }
        let cell = |v: f64, sd: f64| format!("{v:.4} ± {sd:.4}");
        let mut header = format!("{:<10}", "model");
        for c in &cases {
            header.push_str(&format!(" | {:^21} | {:^21}", format!("{c} MSE"), format!("{c} R²")));
        }
        let mut out = header.clone();
        out.push('\n');
        out.push_str(&"-".repeat(header.chars().count()));
        out.push('\n');
        for m in &models {
            out.push_str(&format!("{m:<10}"));
            for c in &cases {
                match self.row(c, m) {
                    Ok(r) => out.push_str(&format!(" | {:^21} | {:^21}", cell(r.mse_mean, r.mse_sd), cell(r.r2_mean, r.r2_sd))),
                    Err(_) => out.push_str(&format!(" | {:^21} | {:^21}", "-", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}
