//! The `foodcal` binary: subcommands, exit codes and report layout.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use foodcal::detect::{Detection, Sidecar};
use foodcal::synth::{write_dataset, Solid, SyntheticPair, ViewSetup};
use serde_json::Value;

fn foodcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foodcal"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn apple(with_top_coin: bool) -> SyntheticPair {
    let mut top = ViewSetup::new(11.0, 5);
    top.with_coin = with_top_coin;
    SyntheticPair::new("apple001", "apple", Solid::Sphere { radius_cm: 3.2 }, &top, &ViewSetup::new(11.0, 6))
}

fn write_boxes(path: &Path, image: &str, boxes: Vec<Detection>) {
    let s = Sidecar {
        image: image.into(),
        detections: boxes,
    };
    std::fs::write(path, serde_json::to_string(&s).unwrap()).unwrap();
}

/// Writes images and box files; returns (top, side, top_boxes, side_boxes).
fn write_pair(dir: &Path, p: &SyntheticPair) -> [PathBuf; 4] {
    let top = dir.join("apple001T.png");
    let side = dir.join("apple001S.png");
    p.top.image.to_rgb_image().save(&top).unwrap();
    p.side.image.to_rgb_image().save(&side).unwrap();
    let tb = dir.join("top_boxes.json");
    let sb = dir.join("side_boxes.json");
    write_boxes(&tb, "apple001T.png", p.top.annotations("apple"));
    write_boxes(&sb, "apple001S.png", p.side.annotations("apple"));
    [top, side, tb, sb]
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = foodcal(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(foodcal(&[]).status.code(), Some(64));
    assert_eq!(foodcal(&["estimate", "--top", "x.png"]).status.code(), Some(64));
    assert_eq!(foodcal(&["--help"]).status.code(), Some(0));
}

#[test]
fn foods_lists_nineteen_rows() {
    let o = foodcal(&["foods"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 20);
    assert!(text.lines().any(|l| l.starts_with("fired dough twist") && l.contains("24.16")));
    let rows = stdout_json(&foodcal(&["foods", "--json"]));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 19);
    let apple = rows.iter().find(|r| r["label"] == "apple").unwrap();
    assert_eq!(apple["density"], 0.78);
    assert_eq!(apple["energy"], 0.52);
}

#[test]
fn estimate_reports_apple_calories_and_overlays() {
    let dir = tempfile::tempdir().unwrap();
    let [top, side, tb, sb] = write_pair(dir.path(), &apple(true));
    let overlays = dir.path().join("overlays");
    let o = foodcal(&[
        "estimate", "--top", s(&top), "--side", s(&side), "--top-boxes", s(&tb), "--side-boxes", s(&sb),
        "--overlay", s(&overlays),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["schema"], 1);
    let foods = r["foods"].as_array().unwrap();
    assert_eq!(foods.len(), 1);
    let v = foods[0]["volume_cm3"].as_f64().unwrap();
    let kcal = foods[0]["calories_kcal"].as_f64().unwrap();
    assert!((kcal - v * 0.78 * 0.52).abs() < 1e-9);
    let truth = 4.0 / 3.0 * std::f64::consts::PI * 3.2f64.powi(3);
    assert!((v - truth).abs() / truth < 0.1);
    let pair = apple(true);
    for (name, src) in [("apple001T.overlay.png", &pair.top.image), ("apple001S.overlay.png", &pair.side.image)] {
        let img = image::open(overlays.join(name)).unwrap();
        assert_eq!((img.width(), img.height()), (src.width(), src.height()));
        assert_ne!(img.to_rgb8().into_raw(), src.as_raw());
    }
    assert_eq!(std::fs::read_dir(&overlays).unwrap().count(), 2);
}

#[test]
fn estimate_without_top_coin_fails_in_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let [top, side, tb, sb] = write_pair(dir.path(), &apple(false));
    let o = foodcal(&["estimate", "--top", s(&top), "--side", s(&side), "--top-boxes", s(&tb), "--side-boxes", s(&sb)]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["stage"], "calibrate");
    assert_eq!(err["error"]["reason"], "NoCoin");
}

#[test]
fn estimate_with_sidecar_detector() {
    let dir = tempfile::tempdir().unwrap();
    let [top, side, tb, sb] = write_pair(dir.path(), &apple(true));
    let dets = dir.path().join("dets");
    std::fs::create_dir(&dets).unwrap();
    std::fs::rename(tb, dets.join("apple001T.json")).unwrap();
    std::fs::rename(sb, dets.join("apple001S.json")).unwrap();
    let detector = format!("sidecar:{}", dets.display());
    let report = dir.path().join("r.json");
    let o = foodcal(&["estimate", "--top", s(&top), "--side", s(&side), "--detector", &detector, "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["detector"], detector.as_str());
    assert_eq!(r["foods"][0]["label"], "apple");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = apple(true);
    let img = dir.path().join("side.png");
    p.side.image.to_rgb_image().save(&img).unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"hough": {"min_support": 7.0}}"#).unwrap();
    let b = p.side.coin_box.unwrap().to_string();
    let o = foodcal(&["calibrate", "--image", s(&img), "--box", &b, "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(64));
    let o = foodcal(&["calibrate", "--image", s(&img), "--box", &b, "--config", s(&cfg), "--min-support", "0.4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert!((r["circle"]["r"].as_f64().unwrap() - p.side.coin_radius_px).abs() <= 2.0);
    assert!(r["scale"]["cm_per_px"].as_f64().unwrap() > 0.0);
}

#[test]
fn segment_writes_binary_mask() {
    let dir = tempfile::tempdir().unwrap();
    let p = apple(true);
    let img = dir.path().join("top.png");
    p.top.image.to_rgb_image().save(&img).unwrap();
    let mask = dir.path().join("mask.png");
    let overlay = dir.path().join("overlay.png");
    let b = p.top.food_box.to_string();
    let o = foodcal(&["segment", "--image", s(&img), "--box", &b, "--iters", "3", "--out", s(&mask), "--overlay", s(&overlay)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = image::open(&mask).unwrap();
    assert_eq!(m.color(), image::ColorType::L8);
    let m = m.to_luma8();
    assert!(m.pixels().all(|p| p.0[0] == 0 || p.0[0] == 255));
    let fg = m.pixels().filter(|p| p.0[0] == 255).count();
    assert_eq!(fg as u64, stdout_json(&o)["area_px"].as_u64().unwrap());
    assert!(overlay.is_file());
    let o = foodcal(&["segment", "--image", s(&img), "--box", "1,1,4,4"]);
    assert_eq!(o.status.code(), Some(2));
}

/// Type skeleton of a JSON value: the key set of objects, the first element
/// of arrays, and type names for scalars.
fn shape(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), shape(v))).collect()),
        Value::Array(a) => Value::Array(a.first().map(shape).into_iter().collect()),
        Value::Number(_) => "number".into(),
        Value::String(_) => "string".into(),
        Value::Bool(_) => "bool".into(),
        Value::Null => "null".into(),
    }
}

#[test]
fn evaluate_report_matches_golden_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut side = ViewSetup::new(10.0, 9);
    side.with_coin = false;
    let pairs = [
        SyntheticPair::new("apple001", "apple", Solid::Sphere { radius_cm: 3.0 }, &ViewSetup::new(10.0, 1), &ViewSetup::new(10.0, 2)),
        SyntheticPair::new("apple002", "apple", Solid::Sphere { radius_cm: 2.6 }, &ViewSetup::new(10.0, 3), &side),
    ];
    let manifest = write_dataset(dir.path(), &pairs, |_| Some(0.78)).unwrap();
    let report = dir.path().join("report.json");
    let o = foodcal(&["evaluate", "--manifest", s(&manifest), "--report", s(&report), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["evaluated"], 1);
    assert_eq!(r["discarded"][0]["pair_id"], "apple002");
    assert_eq!(r["discarded"][0]["reason"], "NoCoin");
    assert_eq!(r["discarded"][0]["stage"], "calibrate");
    assert_eq!(r["types"][0]["discarded"], 1);

    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/eval_report_shape.json");
    let got = shape(&r);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden_path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let golden: Value = serde_json::from_str(&std::fs::read_to_string(&golden_path).unwrap()).unwrap();
    assert_eq!(got, golden);
}

#[test]
fn evaluate_empty_manifest_is_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(&m, r#"{"dataset_root": ".", "records": []}"#).unwrap();
    let o = foodcal(&["evaluate", "--manifest", s(&m), "--report", s(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["reason"], "NoEvaluableRecords");
}
