//! Rotated-IoU detection evaluation with PASCAL VOC style average precision.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotated_iou, OrientedBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub category: String,
    #[serde(default)]
    pub difficult: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub category: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApMode {
    /// 11-point interpolation.
    Voc07,
    /// Area under the monotone precision envelope.
    #[default]
    Voc12,
}

impl fmt::Display for ApMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApMode::Voc07 => "voc07",
            ApMode::Voc12 => "voc12",
        })
    }
}

impl FromStr for ApMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "voc07" => Ok(ApMode::Voc07),
            "voc12" => Ok(ApMode::Voc12),
            other => Err(Error::invalid(format!(
                "unknown AP mode {other:?}; expected voc07 or voc12"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchFlag {
    Tp,
    Fp,
    /// Matched a difficult ground truth; counts as neither TP nor FP.
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Detection indices in processing order.
    pub order: Vec<usize>,
    /// Flag per detection, indexed like the input.
    pub flags: Vec<MatchFlag>,
    /// Whether each ground truth was claimed by a true positive.
    pub gt_matched: Vec<bool>,
}

/// Processing order: descending score, then image id, then input position.
fn score_order(dets: &[&DetectionRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then_with(|| dets[a].image_id.cmp(&dets[b].image_id))
    });
    order
}

fn match_refs(
    dets: &[&DetectionRecord],
    gts: &[&GroundTruthRecord],
    iou_threshold: f64,
) -> MatchResult {
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_image.entry(g.image_id.as_str()).or_default().push(i);
    }

    let order = score_order(dets);
    let mut flags = vec![MatchFlag::Fp; dets.len()];
    let mut gt_matched = vec![false; gts.len()];

    for &d in &order {
        let det = dets[d];
        let mut best: Option<(usize, f64)> = None;
        for &g in by_image
            .get(det.image_id.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[])
        {
            if gt_matched[g] {
                continue;
            }
            let iou = rotated_iou(&det.bbox, &gts[g].bbox);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        flags[d] = match best {
            Some((g, iou)) if iou >= iou_threshold => {
                if gts[g].difficult {
                    MatchFlag::Ignored
                } else {
                    gt_matched[g] = true;
                    MatchFlag::Tp
                }
            }
            _ => MatchFlag::Fp,
        };
    }
    MatchResult {
        order,
        flags,
        gt_matched,
    }
}

/// Greedy VOC matching of one category's detections against its ground
/// truths.
///
/// Detections are visited by descending score; each takes the unmatched
/// ground truth of its image with the highest rotated IoU and is a true
/// positive when that IoU reaches `iou_threshold`. Difficult ground truths
/// never become matched and detections landing on them are ignored.
pub fn match_detections(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    iou_threshold: f64,
) -> MatchResult {
    let d: Vec<&DetectionRecord> = dets.iter().collect();
    let g: Vec<&GroundTruthRecord> = gts.iter().collect();
    match_refs(&d, &g, iou_threshold)
}

/// Cumulative recall and precision along the processing order, skipping
/// ignored detections.
pub fn pr_curve(result: &MatchResult, num_positives: usize) -> (Vec<f64>, Vec<f64>) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut recall = Vec::with_capacity(result.order.len());
    let mut precision = Vec::with_capacity(result.order.len());
    for &i in &result.order {
        match result.flags[i] {
            MatchFlag::Tp => tp += 1,
            MatchFlag::Fp => fp += 1,
            MatchFlag::Ignored => continue,
        }
        recall.push(if num_positives == 0 {
            0.0
        } else {
            tp as f64 / num_positives as f64
        });
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    (recall, precision)
}

pub fn average_precision(recall: &[f64], precision: &[f64], mode: ApMode) -> Result<f64> {
    if recall.len() != precision.len() {
        return Err(Error::invalid(format!(
            "recall has {} points but precision has {}",
            recall.len(),
            precision.len()
        )));
    }
    if recall.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("recall must be non-decreasing"));
    }
    if recall.is_empty() {
        return Ok(0.0);
    }
    let ap = match mode {
        ApMode::Voc07 => {
            let mut sum = 0.0;
            for level in 0..=10 {
                let t = level as f64 / 10.0;
                let p = recall
                    .iter()
                    .zip(precision)
                    .filter(|(r, _)| **r >= t)
                    .map(|(_, p)| *p)
                    .fold(0.0, f64::max);
                sum += p;
            }
            sum / 11.0
        }
        ApMode::Voc12 => {
            let mut mrec = Vec::with_capacity(recall.len() + 2);
            mrec.push(0.0);
            mrec.extend_from_slice(recall);
            mrec.push(1.0);
            let mut mpre = Vec::with_capacity(precision.len() + 2);
            mpre.push(0.0);
            mpre.extend_from_slice(precision);
            mpre.push(0.0);
            for i in (1..mpre.len()).rev() {
                mpre[i - 1] = mpre[i - 1].max(mpre[i]);
            }
            (0..mrec.len() - 1)
                .filter(|&i| mrec[i + 1] != mrec[i])
                .map(|i| (mrec[i + 1] - mrec[i]) * mpre[i + 1])
                .sum()
        }
    };
    Ok(ap.clamp(0.0, 1.0))
}

/// The ten IoU thresholds 0.50, 0.55, …, 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Union of {0.50, 0.75, 0.85} and the 0.50:0.05:0.95 sweep.
pub fn default_thresholds() -> Vec<f64> {
    let mut t = coco_thresholds();
    t.extend([0.5, 0.75, 0.85]);
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    pub num_gt: usize,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: ApMode,
    pub thresholds: Vec<f64>,
    /// Per category, one entry per requested threshold.
    pub categories: BTreeMap<String, Vec<ThresholdResult>>,
    pub map_by_threshold: Vec<f64>,
    pub map_50_95: f64,
}

impl EvalReport {
    pub fn map_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|t| (t - threshold).abs() < 1e-12)
            .map(|i| self.map_by_threshold[i])
    }
}

fn evaluate_category(
    gts: &[&GroundTruthRecord],
    dets: &[&DetectionRecord],
    threshold: f64,
    mode: ApMode,
) -> ThresholdResult {
    let num_gt = gts.iter().filter(|g| !g.difficult).count();
    let result = match_refs(dets, gts, threshold);
    let (recall, precision) = pr_curve(&result, num_gt);
    let ap = average_precision(&recall, &precision, mode).expect("pr curve is well formed");
    ThresholdResult {
        threshold,
        ap,
        tp: result.flags.iter().filter(|f| **f == MatchFlag::Tp).count(),
        fp: result.flags.iter().filter(|f| **f == MatchFlag::Fp).count(),
        num_gt,
        recall,
        precision,
    }
}

/// Evaluates all categories at every threshold.
///
/// Only categories with at least one non-difficult ground truth enter the
/// report and the mAP. `map_50_95` always averages the mAP over the ten
/// thresholds of [`coco_thresholds`], whether or not they were requested.
pub fn evaluate(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    thresholds: &[f64],
    mode: ApMode,
) -> Result<EvalReport> {
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::invalid(format!("IoU threshold {t} outside (0, 1]")));
    }

    let mut gt_by_cat: BTreeMap<&str, Vec<&GroundTruthRecord>> = BTreeMap::new();
    for g in gts {
        gt_by_cat.entry(g.category.as_str()).or_default().push(g);
    }
    gt_by_cat.retain(|_, v| v.iter().any(|g| !g.difficult));
    let mut det_by_cat: HashMap<&str, Vec<&DetectionRecord>> = HashMap::new();
    for d in dets {
        det_by_cat.entry(d.category.as_str()).or_default().push(d);
    }

    let mut all_thresholds: Vec<f64> = thresholds.to_vec();
    for t in coco_thresholds() {
        if !all_thresholds.iter().any(|x| (x - t).abs() < 1e-12) {
            all_thresholds.push(t);
        }
    }

    let cats: Vec<(&str, &Vec<&GroundTruthRecord>)> =
        gt_by_cat.iter().map(|(k, v)| (*k, v)).collect();
    let results: Vec<Vec<ThresholdResult>> = cats
        .par_iter()
        .map(|(cat, cat_gts)| {
            let cat_dets = det_by_cat.get(cat).map(Vec::as_slice).unwrap_or(&[]);
            all_thresholds
                .iter()
                .map(|&t| evaluate_category(cat_gts, cat_dets, t, mode))
                .collect()
        })
        .collect();

    let n_cats = results.len();
    let map_at = |ti: usize| -> f64 {
        if n_cats == 0 {
            0.0
        } else {
            results.iter().map(|r| r[ti].ap).sum::<f64>() / n_cats as f64
        }
    };
    let map_by_threshold: Vec<f64> = (0..thresholds.len()).map(map_at).collect();
    let coco: Vec<usize> = coco_thresholds()
        .iter()
        .map(|t| {
            all_thresholds
                .iter()
                .position(|x| (x - t).abs() < 1e-12)
                .expect("coco thresholds are always evaluated")
        })
        .collect();
    let map_50_95 = coco.iter().map(|&i| map_at(i)).sum::<f64>() / coco.len() as f64;

    let categories = cats
        .iter()
        .zip(results)
        .map(|((cat, _), mut r)| {
            r.truncate(thresholds.len());
            (cat.to_string(), r)
        })
        .collect();

    Ok(EvalReport {
        mode,
        thresholds: thresholds.to_vec(),
        categories,
        map_by_threshold,
        map_50_95,
    })
}
