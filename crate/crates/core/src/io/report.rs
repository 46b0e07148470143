use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ApMode, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// `.csv` selects CSV, anything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!(
                "unknown report format {other:?}; expected json or csv"
            ))),
        }
    }
}

/// On-disk JSON shape of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub mode: ApMode,
    pub thresholds: Vec<f64>,
    pub categories: BTreeMap<String, CategoryDocument>,
    pub map_by_threshold: Vec<f64>,
    pub map_50_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDocument {
    /// Aligned with `thresholds`.
    pub ap_by_threshold: Vec<f64>,
    /// One curve per threshold, as `[recall, precision]` points.
    pub pr_curve: Vec<Vec<[f64; 2]>>,
}

impl From<&EvalReport> for ReportDocument {
    fn from(r: &EvalReport) -> Self {
        let categories = r
            .categories
            .iter()
            .map(|(name, per_t)| {
                let doc = CategoryDocument {
                    ap_by_threshold: per_t.iter().map(|t| t.ap).collect(),
                    pr_curve: per_t
                        .iter()
                        .map(|t| {
                            t.recall
                                .iter()
                                .zip(&t.precision)
                                .map(|(&r, &p)| [r, p])
                                .collect()
                        })
                        .collect(),
                };
                (name.clone(), doc)
            })
            .collect();
        ReportDocument {
            mode: r.mode,
            thresholds: r.thresholds.clone(),
            categories,
            map_by_threshold: r.map_by_threshold.clone(),
            map_50_95: r.map_50_95,
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders the report. JSON keeps full `f64` precision; CSV uses six
/// decimals with one row per (category, threshold) followed by the
/// aggregate `mAP` rows.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&ReportDocument::from(report))
                .expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from("category,threshold,ap,tp,fp,num_gt\n");
            for (name, per_t) in &report.categories {
                for t in per_t {
                    writeln!(
                        s,
                        "{},{:.6},{:.6},{},{},{}",
                        csv_field(name),
                        t.threshold,
                        t.ap,
                        t.tp,
                        t.fp,
                        t.num_gt
                    )
                    .unwrap();
                }
            }
            for (t, m) in report.thresholds.iter().zip(&report.map_by_threshold) {
                writeln!(s, "mAP,{t:.6},{m:.6},,,").unwrap();
            }
            writeln!(s, "mAP50:95,0.50:0.95,{:.6},,,", report.map_50_95).unwrap();
            s
        }
    }
}

pub fn write_report(report: &EvalReport, format: ReportFormat, path: &Path) -> Result<()> {
    fs::write(path, render_report(report, format)).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<ReportDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
