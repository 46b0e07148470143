use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sorted_files, ParseMode};
use crate::error::{Error, Result};
use crate::eval::{DetectionRecord, GroundTruthRecord};
use crate::geometry::{OrientedBox, Point};

/// Records plus the warnings for lines skipped in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub corners: [Point; 4],
    pub bbox: OrientedBox,
    pub category: String,
    pub difficult: bool,
}

/// One per-image annotation file.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFile {
    pub image_id: String,
    /// `imagesource:` / `gsd:` lines, verbatim.
    pub header: Vec<String>,
    pub records: Vec<AnnotationRecord>,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_number(tok: &str, what: &str, path: &Path, line: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(path, line, format!("invalid {what} {tok:?}"))),
    }
}

fn parse_corners(toks: &[&str], path: &Path, line: usize) -> Result<([Point; 4], OrientedBox)> {
    let mut c = [0.0; 8];
    for (slot, tok) in c.iter_mut().zip(toks) {
        *slot = parse_number(tok, "coordinate", path, line)?;
    }
    quad_box(c, path, line)
}

fn quad_box(c: [f64; 8], path: &Path, line: usize) -> Result<([Point; 4], OrientedBox)> {
    let corners = [
        Point::new(c[0], c[1]),
        Point::new(c[2], c[3]),
        Point::new(c[4], c[5]),
        Point::new(c[6], c[7]),
    ];
    let bbox =
        OrientedBox::from_points(&corners).map_err(|e| parse_error(path, line, e.to_string()))?;
    Ok((corners, bbox))
}

fn is_header(line: &str) -> bool {
    let lower = line.trim_start().to_ascii_lowercase();
    lower.starts_with("imagesource:") || lower.starts_with("gsd:")
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Handles one line's result according to the parse mode.
fn admit<T>(
    result: Result<T>,
    mode: ParseMode,
    out: &mut Vec<T>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    match result {
        Ok(v) => out.push(v),
        Err(e) if mode == ParseMode::Lenient => {
            warn!("skipping line: {e}");
            warnings.push(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Parses one annotation file; lines are
/// `x1 y1 x2 y2 x3 y3 x4 y4 category difficulty`.
pub fn parse_annotation_file(
    path: &Path,
    mode: ParseMode,
) -> Result<(AnnotationFile, Vec<String>)> {
    let text = read_text(path)?;
    let mut header = Vec::new();
    let mut records = Vec::new();
    let mut warnings = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if is_header(raw) {
            header.push(raw.to_string());
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let rec = (|| {
            if toks.len() != 10 {
                return Err(parse_error(
                    path,
                    line_no,
                    format!(
                        "expected 8 coordinates, category and difficulty, found {} fields",
                        toks.len()
                    ),
                ));
            }
            let (corners, bbox) = parse_corners(&toks[..8], path, line_no)?;
            let difficult = match toks[9] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(parse_error(
                        path,
                        line_no,
                        format!("difficulty must be 0 or 1, found {other:?}"),
                    ))
                }
            };
            Ok(AnnotationRecord {
                corners,
                bbox,
                category: toks[8].to_string(),
                difficult,
            })
        })();
        admit(rec, mode, &mut records, &mut warnings)?;
    }

    Ok((
        AnnotationFile {
            image_id: file_stem(path),
            header,
            records,
        },
        warnings,
    ))
}

/// Strict parse of every `*.txt` file in a directory.
pub fn parse_annotation_dir(dir: &Path) -> Result<Vec<GroundTruthRecord>> {
    Ok(parse_annotation_dir_with(dir, ParseMode::Strict)?.records)
}

pub fn parse_annotation_dir_with(dir: &Path, mode: ParseMode) -> Result<Parsed<GroundTruthRecord>> {
    let files = sorted_files(dir, |p| p.extension().is_some_and(|e| e == "txt"))?;
    let parsed: Vec<(AnnotationFile, Vec<String>)> = files
        .par_iter()
        .map(|p| parse_annotation_file(p, mode))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (file, w) in parsed {
        warnings.extend(w);
        records.extend(file.records.into_iter().map(|r| GroundTruthRecord {
            image_id: file.image_id.clone(),
            bbox: r.bbox,
            category: r.category,
            difficult: r.difficult,
        }));
    }
    Ok(Parsed { records, warnings })
}

const TASK1_PREFIX: &str = "Task1_";

#[derive(Deserialize)]
#[serde(untagged)]
enum DetectionJson {
    Wrapped { detections: Vec<JsonDetection> },
    Bare(Vec<JsonDetection>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDetection {
    image_id: String,
    category: String,
    score: f64,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    bbox: Option<OrientedBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    poly: Option<[f64; 8]>,
}

#[derive(Serialize)]
struct DetectionJsonOut<'a> {
    detections: Vec<&'a JsonDetection>,
}

fn check_score(score: f64) -> std::result::Result<(), String> {
    if score.is_finite() && (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(format!("score {score} outside [0, 1]"))
    }
}

fn json_record(rec: JsonDetection, path: &Path, index: usize) -> Result<DetectionRecord> {
    // records are numbered from 1 in place of line numbers
    let at = |msg: String| parse_error(path, index + 1, msg);
    check_score(rec.score).map_err(at)?;
    let bbox = match (rec.bbox, rec.poly) {
        (Some(b), None) => b,
        (None, Some(p)) => quad_box(p, path, index + 1)?.1,
        _ => return Err(at("record needs exactly one of \"box\" or \"poly\"".into())),
    };
    Ok(DetectionRecord {
        image_id: rec.image_id,
        bbox,
        category: rec.category,
        score: rec.score,
    })
}

/// Strict parse of a detection JSON file or a directory of
/// `Task1_<category>.txt` files.
pub fn parse_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    Ok(parse_detections_with(path, ParseMode::Strict)?.records)
}

pub fn parse_detections_with(path: &Path, mode: ParseMode) -> Result<Parsed<DetectionRecord>> {
    if path.is_dir() {
        parse_task1_dir(path, mode)
    } else {
        parse_detection_json(path, mode)
    }
}

fn parse_detection_json(path: &Path, mode: ParseMode) -> Result<Parsed<DetectionRecord>> {
    let text = read_text(path)?;
    let doc: DetectionJson = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let list = match doc {
        DetectionJson::Wrapped { detections } => detections,
        DetectionJson::Bare(v) => v,
    };
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (i, rec) in list.into_iter().enumerate() {
        admit(json_record(rec, path, i), mode, &mut records, &mut warnings)?;
    }
    Ok(Parsed { records, warnings })
}

fn parse_task1_dir(dir: &Path, mode: ParseMode) -> Result<Parsed<DetectionRecord>> {
    let files = sorted_files(dir, |p| {
        p.extension().is_some_and(|e| e == "txt") && file_stem(p).starts_with(TASK1_PREFIX)
    })?;
    let parsed: Vec<Parsed<DetectionRecord>> = files
        .par_iter()
        .map(|p| parse_task1_file(p, mode))
        .collect::<Result<_>>()?;
    let mut out = Parsed {
        records: Vec::new(),
        warnings: Vec::new(),
    };
    for p in parsed {
        out.records.extend(p.records);
        out.warnings.extend(p.warnings);
    }
    Ok(out)
}

fn parse_task1_file(path: &Path, mode: ParseMode) -> Result<Parsed<DetectionRecord>> {
    let category = file_stem(path)[TASK1_PREFIX.len()..].to_string();
    let text = read_text(path)?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let rec = (|| {
            if toks.len() != 10 {
                return Err(parse_error(
                    path,
                    line_no,
                    format!(
                        "expected image id, score and 8 coordinates, found {} fields",
                        toks.len()
                    ),
                ));
            }
            let score = parse_number(toks[1], "score", path, line_no)?;
            check_score(score).map_err(|m| parse_error(path, line_no, m))?;
            let (_, bbox) = parse_corners(&toks[2..], path, line_no)?;
            Ok(DetectionRecord {
                image_id: toks[0].to_string(),
                bbox,
                category: category.clone(),
                score,
            })
        })();
        admit(rec, mode, &mut records, &mut warnings)?;
    }
    Ok(Parsed { records, warnings })
}

/// Writes the canonical JSON form (`{"detections": [...]}` with five-parameter boxes).
pub fn write_detections_json(dets: &[DetectionRecord], path: &Path) -> Result<()> {
    let list: Vec<JsonDetection> = dets
        .iter()
        .map(|d| JsonDetection {
            image_id: d.image_id.clone(),
            category: d.category.clone(),
            score: d.score,
            bbox: Some(d.bbox),
            poly: None,
        })
        .collect();
    let doc = DetectionJsonOut {
        detections: list.iter().collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("detections serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one `Task1_<category>.txt` file per category into `dir`.
pub fn write_detections_dota(dets: &[DetectionRecord], dir: &Path) -> Result<()> {
    use std::collections::BTreeMap;
    use std::fmt::Write as _;

    let mut by_cat: BTreeMap<&str, String> = BTreeMap::new();
    for d in dets {
        let out = by_cat.entry(d.category.as_str()).or_default();
        write!(out, "{} {}", d.image_id, d.score).unwrap();
        for p in d.bbox.to_corners().vertices() {
            write!(out, " {} {}", p.x, p.y).unwrap();
        }
        out.push('\n');
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (cat, text) in by_cat {
        let path = dir.join(format!("{TASK1_PREFIX}{cat}.txt"));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
