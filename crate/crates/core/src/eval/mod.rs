//! Scoring against ground truth, warning counts, the data-fraction study
//! and the synthetic corpus generator.

mod checker;
mod generate;
mod study;

use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infer::PredictionSet;

pub use checker::{count_warnings, stub_warnings, Checker, CheckerConfig};
pub use generate::{generate_corpus, pattern_frequencies, GeneratedClass, GeneratedCorpus, GeneratorSpec, Pattern};
pub use study::{data_fraction_study, sample_fraction, study_csv, warnings_after, StudyRow, StudySetup};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectReport {
    pub project: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub warnings_baseline: Option<usize>,
    pub warnings_after: Option<usize>,
    /// `None` when there were no baseline warnings.
    pub reduction_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn reduction_pct(baseline: usize, after: usize) -> Option<f64> {
    (baseline > 0).then(|| 100.0 * (1.0 - after as f64 / baseline as f64))
}

impl ProjectReport {
    pub fn from_counts(project: &str, tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ProjectReport {
            project: project.to_string(),
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            warnings_baseline: None,
            warnings_after: None,
            reduction_pct: None,
            runtime_secs: None,
        }
    }

    pub fn with_warnings(mut self, baseline: usize, after: usize) -> Self {
        self.warnings_baseline = Some(baseline);
        self.warnings_after = Some(after);
        self.reduction_pct = reduction_pct(baseline, after);
        self
    }
}

fn canonical() -> Regex {
    Regex::new(r"^[\w$.]+#[\w$]+(\([\w$.,\[\]]*\)(\[\d+\])?(\$lambda\d+\[\d+\])?)?$").expect("valid pattern")
}

/// Compares decided signatures with the ground truth.
pub fn score_predictions(project: &str, predicted: &PredictionSet, truth: &[String]) -> Result<ProjectReport> {
    score_signatures(project, &predicted.decided(), truth)
}

pub fn score_signatures(project: &str, decided: &BTreeSet<String>, truth: &[String]) -> Result<ProjectReport> {
    let re = canonical();
    if let Some(bad) = truth.iter().chain(decided.iter()).find(|s| !re.is_match(s)) {
        return Err(Error::SignatureMismatch(bad.clone()));
    }
    let truth: BTreeSet<&str> = truth.iter().map(String::as_str).collect();
    let tp = decided.iter().filter(|s| truth.contains(s.as_str())).count();
    Ok(ProjectReport::from_counts(project, tp, decided.len() - tp, truth.len() - tp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub projects: Vec<ProjectReport>,
    pub total: ProjectReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl EvalReport {
    /// Totals are recomputed from summed counts, not averaged ratios.
    pub fn new(mut projects: Vec<ProjectReport>) -> Self {
        projects.sort_by(|a, b| a.project.cmp(&b.project));
        let sum = |f: fn(&ProjectReport) -> usize| projects.iter().map(f).sum::<usize>();
        let mut total = ProjectReport::from_counts("total", sum(|p| p.tp), sum(|p| p.fp), sum(|p| p.fn_));
        if projects.iter().all(|p| p.warnings_baseline.is_some() && p.warnings_after.is_some()) && !projects.is_empty() {
            total = total.with_warnings(
                sum(|p| p.warnings_baseline.unwrap_or(0)),
                sum(|p| p.warnings_after.unwrap_or(0)),
            );
        }
        let times: Option<Vec<f64>> = projects.iter().map(|p| p.runtime_secs).collect();
        total.runtime_secs = times.filter(|t| !t.is_empty()).map(|t| t.iter().sum());
        EvalReport {
            format_version: REPORT_FORMAT_VERSION,
            projects,
            total,
            provenance: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text).map_err(|e| Error::json("eval report", e))?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: r.format_version,
                expected: REPORT_FORMAT_VERSION,
            });
        }
        Ok(r)
    }

    /// One row per project plus a totals row; ratios as `.6`-style
    /// decimals and `-` for missing values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("project,tp,fp,fn,precision,recall,f1,warnings_baseline,warnings_after,reduction_pct\n");
        for p in self.projects.iter().chain(std::iter::once(&self.total)) {
            let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.project,
                p.tp,
                p.fp,
                p.fn_,
                short_ratio(p.precision),
                short_ratio(p.recall),
                short_ratio(p.f1),
                opt(p.warnings_baseline),
                opt(p.warnings_after),
                p.reduction_pct.map_or("-".to_string(), |r| format!("{}%", r.round())),
            ));
        }
        out
    }
}

/// Two-decimal rendering without the leading zero: `0.6` becomes `.6`.
pub fn short_ratio(x: f64) -> String {
    let s = format!("{:.2}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    match s.strip_prefix('0') {
        Some("") => "0".to_string(),
        Some(rest) => rest.to_string(),
        None => s.to_string(),
    }
}
