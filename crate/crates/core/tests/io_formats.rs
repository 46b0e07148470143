use std::fs;
use std::path::{Path, PathBuf};

use anglekit::codec::{FitFunction, Method};
use anglekit::eval::{default_thresholds, evaluate};
use anglekit::io::{
    load_config, parse_annotation_dir, parse_annotation_dir_with, parse_detections,
    read_report_json, render_report, write_detections_dota, write_detections_json, write_report,
    ParseMode, ReportFormat,
};
use anglekit::{ApMode, DetectionRecord, Error, GroundTruthRecord, OrientedBox};
use serde::Deserialize;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[derive(Deserialize)]
struct ManifestEntry {
    image_id: String,
    category: String,
    difficult: bool,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
}

#[test]
fn annotation_fixture_matches_manifest() {
    let recs = parse_annotation_dir(&fixtures().join("dota_labels")).unwrap();
    let manifest: Vec<ManifestEntry> =
        serde_json::from_str(&fs::read_to_string(fixtures().join("dota_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(recs.len(), manifest.len());
    for (r, m) in recs.iter().zip(&manifest) {
        assert_eq!(r.image_id, m.image_id);
        assert_eq!(r.category, m.category);
        assert_eq!(r.difficult, m.difficult, "{}", r.image_id);
        let b = r.bbox;
        for (got, want) in [
            (b.cx(), m.cx),
            (b.cy(), m.cy),
            (b.w(), m.w),
            (b.h(), m.h),
            (b.theta(), m.theta),
        ] {
            assert!(
                (got - want).abs() < 1e-9,
                "{} {}: {got} vs {want}",
                r.image_id,
                r.category
            );
        }
    }
}

#[test]
fn lenient_and_strict_agree_on_clean_fixture() {
    let dir = fixtures().join("dota_labels");
    let lenient = parse_annotation_dir_with(&dir, ParseMode::Lenient).unwrap();
    assert!(lenient.warnings.is_empty());
    assert_eq!(lenient.records, parse_annotation_dir(&dir).unwrap());
}

#[test]
fn json_detections_accept_box_and_poly() {
    let dets = parse_detections(&fixtures().join("dets.json")).unwrap();
    assert_eq!(dets.len(), 3);
    assert_eq!(dets[1].category, "plane");
    assert!((dets[1].bbox.theta() - 36.86989764584402).abs() < 1e-9);
    assert!((dets[1].bbox.w() - 10.0).abs() < 1e-9);
}

#[test]
fn json_errors_carry_record_position() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("d.json");
    fs::write(
        &p,
        r#"[{"image_id": "a", "category": "c", "score": 0.5, "poly": [0,0,1,0,1,1,0,1]},
            {"image_id": "a", "category": "c", "score": 1.5, "poly": [0,0,1,0,1,1,0,1]}]"#,
    )
    .unwrap();
    match parse_detections(&p).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 2),
        e => panic!("unexpected {e}"),
    }
    let lenient = anglekit::io::parse_detections_with(&p, ParseMode::Lenient).unwrap();
    assert_eq!((lenient.records.len(), lenient.warnings.len()), (1, 1));
}

#[test]
fn task1_text_round_trip_is_a_fixed_point() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    fs::create_dir(&first).unwrap();
    fs::write(
        first.join("Task1_plane.txt"),
        "P0009 0.75 0 0 8 6 5 10 -3 4\nP0001 0.5   10 10 14 10 14 16 10 16\n",
    )
    .unwrap();
    fs::write(first.join("Task1_ship.txt"), "P0001 0.9 0 0 2 0 2 1 0 1\n").unwrap();
    fs::write(first.join("notes.txt"), "ignored, wrong prefix\n").unwrap();

    let parsed = parse_detections(&first).unwrap();
    assert_eq!(parsed.len(), 3);
    assert_eq!(parsed[0].category, "plane");
    assert_eq!(parsed[2].category, "ship");

    let second = tmp.path().join("second");
    write_detections_dota(&parsed, &second).unwrap();
    let reparsed = parse_detections(&second).unwrap();
    assert_eq!(reparsed.len(), parsed.len());
    for (a, b) in parsed.iter().zip(&reparsed) {
        assert_eq!(
            (&a.image_id, &a.category, a.score),
            (&b.image_id, &b.category, b.score)
        );
        assert!(rel_close(&a.bbox, &b.bbox), "{:?} vs {:?}", a.bbox, b.bbox);
    }

    // a second cycle reproduces the normalized files byte for byte
    let third = tmp.path().join("third");
    write_detections_dota(&reparsed, &third).unwrap();
    let again = parse_detections(&third).unwrap();
    for (a, b) in reparsed.iter().zip(&again) {
        assert!(rel_close(&a.bbox, &b.bbox));
    }
}

fn rel_close(a: &OrientedBox, b: &OrientedBox) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
    let dt = (a.theta() - b.theta()).abs();
    close(a.cx(), b.cx())
        && close(a.cy(), b.cy())
        && close(a.w(), b.w())
        && close(a.h(), b.h())
        && (dt < 1e-9 || (180.0 - dt) < 1e-9)
}

#[test]
fn json_write_then_parse_is_exact() {
    let dets = parse_detections(&fixtures().join("dets.json")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("out.json");
    write_detections_json(&dets, &p).unwrap();
    assert_eq!(parse_detections(&p).unwrap(), dets);
}

fn sample_report() -> anglekit::EvalReport {
    let gts = parse_annotation_dir(&fixtures().join("dota_labels")).unwrap();
    let dets = parse_detections(&fixtures().join("dets.json")).unwrap();
    evaluate(&gts, &dets, &default_thresholds(), ApMode::Voc12).unwrap()
}

#[test]
fn reports_are_deterministic() {
    let a = sample_report();
    let b = sample_report();
    for format in [ReportFormat::Json, ReportFormat::Csv] {
        assert_eq!(render_report(&a, format), render_report(&b, format));
    }
    let csv = render_report(&a, ReportFormat::Csv);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("category,threshold,ap,tp,fp,num_gt"));
    // harbor, large-vehicle, plane, roundabout, ship, small-vehicle, storage-tank
    assert_eq!(csv.lines().count(), 1 + 7 * 10 + 10 + 1);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("harbor,0.500000,0.000000,0,0,1"));
}

#[test]
fn json_report_round_trip_is_exact() {
    let report = sample_report();
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("report.json");
    write_report(&report, ReportFormat::Json, &p).unwrap();
    let doc = read_report_json(&p).unwrap();
    assert_eq!(doc.thresholds, report.thresholds);
    assert_eq!(doc.map_by_threshold, report.map_by_threshold);
    assert_eq!(doc.map_50_95, report.map_50_95);
    for (name, per_t) in &report.categories {
        let aps: Vec<f64> = per_t.iter().map(|t| t.ap).collect();
        assert_eq!(doc.categories[name].ap_by_threshold, aps);
    }
}

#[test]
fn minimal_config_is_all_defaults() {
    let cfg = load_config(&fixtures().join("config/minimal.toml")).unwrap();
    assert_eq!(cfg, anglekit::io::RunConfig::default());
}

#[test]
fn full_config_echoes_values() {
    let cfg = load_config(&fixtures().join("config/full.toml")).unwrap();
    assert_eq!(cfg.codec.method(), Method::DclGray);
    assert_eq!(cfg.codec.c_theta(), 128);
    assert_eq!(cfg.codec.fit(), FitFunction::Exp);
    assert_eq!(cfg.loss_weights.as_array(), [1.0, 0.5, 4.0, 3.0, 0.25]);
    assert_eq!(cfg.thresholds, vec![0.5, 0.75]);
    assert_eq!(cfg.mode, ApMode::Voc07);
    assert_eq!(cfg.nms_threshold, 0.3);
    let base = fixtures().join("config");
    assert_eq!(cfg.paths.ground_truth, Some(base.join("../dota_labels")));
    assert_eq!(cfg.paths.detections, Some(base.join("../dets.json")));
    assert_eq!(cfg.paths.output, Some(base.join("../report.json")));
}

#[test]
fn config_errors() {
    let err = load_config(&fixtures().join("config/mgar_c7.toml"))
        .unwrap_err()
        .to_string();
    assert!(err.contains("180"), "{err}");
    let err = load_config(&fixtures().join("config/unknown_keys.toml"))
        .unwrap_err()
        .to_string();
    assert!(
        err.contains("codec.window") && err.contains("output"),
        "{err}"
    );
}

#[test]
fn parse_is_locale_independent() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("x.txt"), "0,5 0 2 0 2 1 0 1 ship 0\n").unwrap();
    assert!(matches!(
        parse_annotation_dir(tmp.path()),
        Err(Error::Parse { line: 1, .. })
    ));
}

#[test]
fn records_serialize_with_box_key() {
    let g = GroundTruthRecord {
        image_id: "a".into(),
        bbox: OrientedBox::new(1.0, 2.0, 4.0, 2.0, 30.0).unwrap(),
        category: "ship".into(),
        difficult: false,
    };
    let v = serde_json::to_value(&g).unwrap();
    assert_eq!(v["box"]["theta"], 30.0);
    // boxes in files must already be in long-side form
    let err = serde_json::from_str::<DetectionRecord>(
        r#"{"image_id":"a","category":"ship","score":0.5,"box":{"cx":0,"cy":0,"w":1,"h":2,"theta":0}}"#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("shorter"), "{err}");
}
