//! Dataset evaluation accounting and multi-food scenes.

use std::f64::consts::PI;

use foodcal::detect::{AnnotationProvider, Detection};
use foodcal::eval::{evaluate_manifest, MISSING_REFERENCE};
use foodcal::ingest::{load_manifest, ManifestFile};
use foodcal::pipeline::{Pipeline, PipelineConfig};
use foodcal::raster::{BBox, Image};
use foodcal::synth::{disc_mask, fill_mask, with_noise, write_dataset, Solid, SyntheticPair, ViewSetup};

#[test]
fn every_record_is_evaluated_or_discarded() {
    let dir = tempfile::tempdir().unwrap();
    let mut no_coin = ViewSetup::new(10.0, 3);
    no_coin.with_coin = false;
    let pairs = [
        SyntheticPair::new("apple001", "apple", Solid::Sphere { radius_cm: 3.0 }, &ViewSetup::new(10.0, 1), &ViewSetup::new(10.0, 2)),
        SyntheticPair::new("apple002", "apple", Solid::Sphere { radius_cm: 2.5 }, &ViewSetup::new(10.0, 4), &no_coin),
        SyntheticPair::new("egg001", "egg", Solid::Sphere { radius_cm: 2.0 }, &ViewSetup::new(12.0, 5), &ViewSetup::new(12.0, 6)),
        SyntheticPair::new("bun001", "bun", Solid::Cylinder { radius_cm: 4.0, height_cm: 3.0 }, &ViewSetup::new(9.0, 7), &ViewSetup::new(9.0, 8)),
    ];
    let path = write_dataset(dir.path(), &pairs, |_| None).unwrap();
    // drop the reference volume of one record
    let mut file: ManifestFile = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    file.records.iter_mut().find(|r| r.pair_id == "egg001").unwrap().true_volume_cm3 = None;
    std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();

    let manifest = load_manifest(&path).unwrap();
    let report = evaluate_manifest(&manifest, &Pipeline::new(PipelineConfig { jobs: 3, ..Default::default() }).unwrap()).unwrap();
    assert_eq!(report.total_records, 4);
    assert_eq!(report.evaluated + report.discarded.len(), report.total_records);
    let reasons: Vec<_> = report.discarded.iter().map(|d| (d.pair_id.as_str(), d.reason.as_str())).collect();
    assert_eq!(reasons, [("apple002", "NoCoin"), ("egg001", MISSING_REFERENCE)]);
    let ids: Vec<_> = report.pairs.iter().map(|p| p.pair_id.as_str()).collect();
    assert_eq!(ids, ["apple001", "bun001"]);
    assert_eq!(report.timings.len(), 4);
    let apple = report.types.iter().find(|t| t.food_label == "apple").unwrap();
    assert_eq!((apple.n, apple.discarded), (1, 1));
    assert!(report.types_outside(0.1).is_empty());
}

/// Coin at the left, then one disc per food; spheres look the same from
/// the top and the side.
fn two_sphere_view(seed: u64) -> (Image, Vec<Detection>) {
    let (w, h) = (420, 160);
    let mut image = Image::filled(w, h, [235, 232, 225]);
    let coin_r = 12.5;
    fill_mask(&mut image, &disc_mask(w, h, 50.0, 80.0, coin_r), [150, 150, 155]);
    fill_mask(&mut image, &disc_mask(w, h, 170.0, 80.0, 40.0), [190, 40, 35]);
    fill_mask(&mut image, &disc_mask(w, h, 320.0, 80.0, 25.0), [60, 120, 40]);
    let boxes = vec![
        Detection::new("coin", BBox::new(35, 65, 65, 95), 1.0),
        Detection::new("apple", BBox::new(120, 30, 220, 130), 1.0),
        Detection::new("orange", BBox::new(285, 45, 355, 115), 1.0),
    ];
    (with_noise(&image, 6, seed), boxes)
}

#[test]
fn two_foods_are_measured_separately_and_summed() {
    let (top, top_boxes) = two_sphere_view(1);
    let (side, side_boxes) = two_sphere_view(2);
    let p = Pipeline::new(PipelineConfig::default()).unwrap();
    let est = p
        .estimate(&top, &side, &AnnotationProvider::new(top_boxes), &AnnotationProvider::new(side_boxes))
        .unwrap();
    let foods = &est.report.foods;
    assert_eq!(foods.iter().map(|f| f.label.as_str()).collect::<Vec<_>>(), ["apple", "orange"]);
    // 10 px/cm: radii 4 cm and 2.5 cm
    for (f, r) in foods.iter().zip([4.0f64, 2.5]) {
        let truth = 4.0 / 3.0 * PI * r.powi(3);
        assert!((f.volume_cm3 - truth).abs() / truth < 0.1, "{}: {} vs {truth}", f.label, f.volume_cm3);
    }
    assert_eq!(est.report.total_volume(), foods[0].volume_cm3 + foods[1].volume_cm3);
}
