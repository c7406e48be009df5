use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::fmt_f64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One comparison row: a labeled input cell, the closed form it targets, the
/// Monte Carlo estimate, and the verdict. Informational rows leave the
/// optional fields empty and pass by construction.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReportRow {
    pub fn new(label: impl Into<String>) -> Self {
        ReportRow {
            label: label.into(),
            inputs: BTreeMap::new(),
            closed_form: None,
            mc_estimate: None,
            std_error: None,
            pass: true,
            note: None,
        }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn closed_form(mut self, v: f64) -> Self {
        self.closed_form = Some(v);
        self
    }

    pub fn estimate(mut self, mean: f64, se: f64) -> Self {
        self.mc_estimate = Some(mean);
        self.std_error = Some(se);
        self
    }

    pub fn pass(mut self, ok: bool) -> Self {
        self.pass = ok;
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.note = Some(n.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub version: String,
    pub seed: u64,
    /// Human-readable statement of the pass rule the rows were judged by.
    pub tolerance_spec: String,
    pub config_echo: BTreeMap<String, String>,
    pub rows: Vec<ReportRow>,
    pub overall_pass: bool,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, seed: u64, tolerance_spec: impl Into<String>) -> Self {
        ExperimentReport {
            name: name.into(),
            version: VERSION.to_string(),
            seed,
            tolerance_spec: tolerance_spec.into(),
            config_echo: BTreeMap::new(),
            rows: Vec::new(),
            overall_pass: true,
        }
    }

    pub fn echo(&mut self, key: &str, value: impl ToString) {
        self.config_echo.insert(key.to_string(), value.to_string());
    }

    pub fn push(&mut self, row: ReportRow) {
        self.overall_pass &= row.pass;
        self.rows.push(row);
    }

    /// Folds several reports into one (suite runners use this to keep a single
    /// file per experiment family). Config echoes are namespaced by part name.
    pub fn merge(name: impl Into<String>, seed: u64, parts: Vec<ExperimentReport>) -> Self {
        let mut out = ExperimentReport::new(
            name,
            seed,
            parts
                .iter()
                .map(|p| format!("[{}] {}", p.name, p.tolerance_spec))
                .collect::<Vec<_>>()
                .join("; "),
        );
        for part in parts {
            for (k, v) in &part.config_echo {
                out.config_echo.insert(format!("{}.{k}", part.name), v.clone());
            }
            for row in part.rows {
                out.push(ReportRow {
                    label: format!("{}/{}", part.name, row.label),
                    ..row
                });
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// CSV with the same `#` comment header convention as every other table
    /// this crate writes: version, seed, then the config echo, then data.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# rbm {}\n", self.version));
        out.push_str(&format!("# experiment: {}\n", self.name));
        out.push_str(&format!("# seed: {}\n", self.seed));
        for (k, v) in &self.config_echo {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&format!("# tolerance: {}\n", csv_safe_comment(&self.tolerance_spec)));
        out.push_str("label,inputs,closed_form,mc_estimate,std_error,pass,note\n");
        for row in &self.rows {
            let inputs = row
                .inputs
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&row.label),
                csv_field(&inputs),
                row.closed_form.map(fmt_f64).unwrap_or_default(),
                row.mc_estimate.map(fmt_f64).unwrap_or_default(),
                row.std_error.map(fmt_f64).unwrap_or_default(),
                row.pass,
                csv_field(row.note.as_deref().unwrap_or("")),
            ));
        }
        out.push_str(&format!("# overall_pass: {}\n", self.overall_pass));
        out
    }

    /// Writes `<name>_<seed>.json` and `<name>_<seed>.csv` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}_{}.json", self.name, self.seed));
        let csv = dir.join(format!("{}_{}.csv", self.name, self.seed));
        fs::write(&json, self.to_json())?;
        fs::write(&csv, self.to_csv())?;
        Ok((json, csv))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_safe_comment(s: &str) -> String {
    s.replace('\n', " ")
}
