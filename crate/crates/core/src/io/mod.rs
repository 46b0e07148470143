//! File formats: DOTA-style annotation and detection text files, JSON
//! detections, evaluation reports and the TOML run configuration.

mod config;
mod dota;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use config::{load_config, RunConfig, RunPaths};
pub use dota::{
    parse_annotation_dir, parse_annotation_dir_with, parse_annotation_file, parse_detections,
    parse_detections_with, write_detections_dota, write_detections_json, AnnotationFile,
    AnnotationRecord, Parsed,
};
pub use report::{
    read_report_json, render_report, write_report, CategoryDocument, ReportDocument, ReportFormat,
};

/// Strict parsing fails on the first malformed line; lenient parsing
/// skips it and records a warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

/// Regular files in `dir` accepted by `keep`, sorted by path.
fn sorted_files(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && keep(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
