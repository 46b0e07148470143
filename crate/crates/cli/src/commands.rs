use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anglekit::codec::{
    analytic_errors, decode as decode_angle, empirical_errors, encode as encode_angle,
    head_thickness, CodecConfig, Method, DCL_CLASSES, RECOMMENDED_MGAR_CLASSES,
};
use anglekit::eval::{default_thresholds, evaluate};
use anglekit::geometry::{convex_intersection_area, rotated_iou, rotated_nms};
use anglekit::io::{
    load_config, parse_annotation_dir_with, parse_detections_with, write_report, ParseMode,
    ReportFormat, RunConfig,
};
use anglekit::loss::{gradcheck_suite, LossKind};
use anglekit::{AnglePrediction, ApMode, DetectionRecord, OrientedBox};
use anyhow::{anyhow, Context};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::{CodecArgs, Exit, EXIT_CHECK_FAILED, EXIT_EMPTY, EXIT_INPUT};

impl CodecArgs {
    pub fn build(&self) -> anyhow::Result<CodecConfig> {
        let mut cfg = CodecConfig::new(
            self.method,
            self.ctheta.unwrap_or(self.method.default_c_theta()),
        )?;
        if let Some(w) = self.window {
            cfg = cfg.with_window(w)?;
        }
        if let Some(f) = self.fit {
            cfg = cfg.with_fit(f);
        }
        for w in cfg.warnings() {
            warn!("{w}");
        }
        Ok(cfg)
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    emit(&text)
}

pub fn encode(cfg: &CodecConfig, angle: f64) -> anyhow::Result<()> {
    let t = encode_angle(angle, cfg)?;
    let mut out = json!({
        "method": cfg.method().name(),
        "c_theta": cfg.c_theta(),
        "omega": cfg.omega(),
        "angle": t.raw_angle,
        "k": t.class_index,
        "class_vector": t.class_vector,
        "residual": t.residual,
        "residual_target": t.residual_target,
    });
    if cfg.method().is_dcl() {
        let code: String = t
            .class_vector
            .iter()
            .map(|&b| if b > 0.5 { '1' } else { '0' })
            .collect();
        out["code"] = json!(code);
    }
    print_json(&out)
}

pub fn decode(cfg: &CodecConfig, logits: Vec<f64>, reg: Option<f64>) -> anyhow::Result<()> {
    let pred = AnglePrediction {
        class_logits: logits,
        regression_output: reg,
    };
    let theta = decode_angle(&pred, cfg)?;
    print_json(&json!({ "method": cfg.method().name(), "c_theta": cfg.c_theta(), "theta": theta }))
}

fn parse_box(s: &str) -> anyhow::Result<OrientedBox> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("box {s:?} is not a list of numbers"))?;
    let [cx, cy, w, h, theta] = v[..] else {
        return Err(anyhow!("box {s:?} needs five values cx,cy,w,h,theta"));
    };
    Ok(OrientedBox::new(cx, cy, w, h, theta)?)
}

pub fn iou(a: &str, b: &str) -> anyhow::Result<()> {
    let (a, b) = (parse_box(a)?, parse_box(b)?);
    let inter = convex_intersection_area(&a.to_corners(), &b.to_corners());
    print_json(&json!({ "iou": rotated_iou(&a, &b), "intersection": inter }))
}

pub fn nms(input: &Path, threshold: f64, class_agnostic: bool) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(anyhow!("--threshold must lie in [0, 1], got {threshold}"));
    }
    let dets = parse_detections_with(input, ParseMode::Strict)?.records;
    let items: Vec<(OrientedBox, f64, &str)> = dets
        .iter()
        .map(|d| (d.bbox, d.score, d.category.as_str()))
        .collect();
    let kept = rotated_nms(&items, threshold, class_agnostic);
    let records: Vec<&DetectionRecord> = kept.iter().map(|&i| &dets[i]).collect();
    print_json(&json!({ "kept": kept, "detections": records }))
}

pub fn thickness(method: Method, c_theta: u32, anchors: u32) -> anyhow::Result<()> {
    let t = head_thickness(method, c_theta, anchors)?;
    print_json(
        &json!({ "method": method.name(), "c_theta": c_theta, "anchors": anchors, "thickness": t }),
    )
}

/// Class counts reported per method.
fn report_classes(method: Method) -> Vec<u32> {
    match method {
        Method::Regression => vec![1],
        Method::Csl => vec![180],
        Method::DclBinary | Method::DclGray => DCL_CLASSES.to_vec(),
        Method::Mgar => RECOMMENDED_MGAR_CLASSES.to_vec(),
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct ReportRow {
    method: Method,
    c_theta: u32,
    omega: f64,
    analytic: (f64, f64),
    empirical: (f64, f64),
    thickness: u64,
}

pub fn codec_report(
    methods: &[Method],
    grid_step: f64,
    anchors: u32,
    json_out: bool,
) -> anyhow::Result<()> {
    if grid_step.is_nan() || grid_step <= 0.0 {
        return Err(anyhow!("--grid-step must be positive, got {grid_step}"));
    }
    let methods = if methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        methods.to_vec()
    };
    let configs: Vec<CodecConfig> = methods
        .iter()
        .flat_map(|&m| report_classes(m).into_iter().map(move |c| (m, c)))
        .map(|(m, c)| CodecConfig::new(m, c))
        .collect::<Result<_, _>>()?;
    let rows: Vec<ReportRow> = configs
        .par_iter()
        .map(|cfg| -> anyhow::Result<ReportRow> {
            let a = analytic_errors(cfg);
            let e = empirical_errors(cfg, grid_step)?;
            Ok(ReportRow {
                method: cfg.method(),
                c_theta: cfg.c_theta(),
                omega: cfg.omega(),
                analytic: (a.max, a.mean),
                empirical: (e.max, e.mean),
                thickness: head_thickness(cfg.method(), cfg.c_theta(), anchors)?,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    if json_out {
        let list: Vec<Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "method": r.method.name(),
                    "c_theta": r.c_theta,
                    "omega": r.omega,
                    "analytic_max": r.analytic.0,
                    "analytic_mean": r.analytic.1,
                    "empirical_max": r.empirical.0,
                    "empirical_mean": r.empirical.1,
                    "thickness": r.thickness,
                })
            })
            .collect();
        print_json(&json!({ "grid_step": grid_step, "anchors": anchors, "rows": list }))
    } else {
        let mut text = String::from("method,c_theta,omega,analytic_max,analytic_mean,empirical_max,empirical_mean,thickness\n");
        for r in &rows {
            writeln!(
                text,
                "{},{},{},{},{},{},{},{}",
                r.method.name(),
                r.c_theta,
                num(r.omega),
                num(r.analytic.0),
                num(r.analytic.1),
                num(r.empirical.0),
                num(r.empirical.1),
                r.thickness
            )
            .unwrap();
        }
        emit(&text)
    }
}

pub struct EvalArgs {
    pub gt: Option<PathBuf>,
    pub det: Option<PathBuf>,
    pub mode: Option<ApMode>,
    pub thresholds: Option<Vec<f64>>,
    pub nms: Option<f64>,
    pub out: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub strict: bool,
}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Exit {
        code: EXIT_INPUT,
        message: message.into(),
    }
    .into()
}

/// Class-aware rotated NMS within each image; survivors keep input order.
fn nms_per_image(dets: Vec<DetectionRecord>, threshold: f64) -> Vec<DetectionRecord> {
    let mut by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_image.entry(d.image_id.as_str()).or_default().push(i);
    }
    let mut keep: Vec<usize> = by_image
        .values()
        .flat_map(|idx| {
            let items: Vec<(OrientedBox, f64, &str)> = idx
                .iter()
                .map(|&i| (dets[i].bbox, dets[i].score, dets[i].category.as_str()))
                .collect();
            rotated_nms(&items, threshold, false)
                .into_iter()
                .map(|k| idx[k])
                .collect::<Vec<_>>()
        })
        .collect();
    keep.sort_unstable();
    let mut flags = vec![false; dets.len()];
    keep.iter().for_each(|&i| flags[i] = true);
    dets.into_iter()
        .zip(flags)
        .filter(|(_, f)| *f)
        .map(|(d, _)| d)
        .collect()
}

fn summary_line(report: &anglekit::EvalReport) -> String {
    let mut parts: Vec<String> = report
        .thresholds
        .iter()
        .zip(&report.map_by_threshold)
        .map(|(t, m)| format!("mAP@{t:.2}={m:.6}"))
        .collect();
    parts.push(format!("mAP@0.50:0.95={:.6}", report.map_50_95));
    parts.join(", ")
}

pub fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let base = match &args.config {
        Some(p) => load_config(p).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    let gt = args
        .gt
        .or(base.paths.ground_truth)
        .ok_or_else(|| usage("missing --gt (or [paths] ground_truth in --config)"))?;
    let det = args
        .det
        .or(base.paths.detections)
        .ok_or_else(|| usage("missing --det (or [paths] detections in --config)"))?;
    let mode = args.mode.unwrap_or(base.mode);
    let thresholds = args.thresholds.unwrap_or(if args.config.is_some() {
        base.thresholds
    } else {
        default_thresholds()
    });
    let nms = args
        .nms
        .or(args.config.as_ref().map(|_| base.nms_threshold));
    let out = args.out.or(base.paths.output);
    if let Some(t) = nms {
        if !(0.0..=1.0).contains(&t) {
            return Err(usage(format!("--nms must lie in [0, 1], got {t}")));
        }
    }

    let parse_mode = if args.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    };
    let gts = parse_annotation_dir_with(&gt, parse_mode)?;
    let dets = parse_detections_with(&det, parse_mode)?;
    info!(
        "{} ground truths, {} detections, {} skipped lines",
        gts.records.len(),
        dets.records.len(),
        gts.warnings.len() + dets.warnings.len()
    );
    if gts.records.is_empty() {
        return Err(Exit {
            code: EXIT_EMPTY,
            message: format!("no ground-truth records under {}", gt.display()),
        }
        .into());
    }
    let detections = match nms {
        Some(t) => nms_per_image(dets.records, t),
        None => dets.records,
    };

    let report = evaluate(&gts.records, &detections, &thresholds, mode)?;
    if let Some(path) = &out {
        write_report(&report, ReportFormat::from_path(path), path)?;
    }
    emit(&format!("{}\n", summary_line(&report)))
}

pub fn gradcheck(seed: u64, points: usize, corrupt: Option<LossKind>) -> anyhow::Result<()> {
    if points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    let results = gradcheck_suite(seed, points, corrupt);
    print_json(&json!({ "seed": seed, "points": points, "results": results }))?;
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| {
            format!(
                "{} (max relative error {:e} at {:?})",
                r.loss.name(),
                r.max_rel_error,
                r.worst_point
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Exit {
            code: EXIT_CHECK_FAILED,
            message: format!("gradient check failed: {}", failed.join("; ")),
        }
        .into())
    }
}
