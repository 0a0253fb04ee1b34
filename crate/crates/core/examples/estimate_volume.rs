//! Full pipeline on rendered top and side views of simple solids.

use foodcal::detect::AnnotationProvider;
use foodcal::pipeline::{Pipeline, PipelineConfig};
use foodcal::synth::{Solid, SyntheticPair, ViewSetup};

/// (label, estimated cm³, true cm³)
pub type Outcome = (String, f64, f64);

pub fn run() -> Result<Vec<Outcome>, Box<dyn std::error::Error>> {
    let pipeline = Pipeline::new(PipelineConfig::default())?;
    let cases = [
        ("orange", Solid::Sphere { radius_cm: 3.5 }),
        ("mooncake", Solid::Cylinder { radius_cm: 4.0, height_cm: 3.0 }),
        ("bread", Solid::Cuboid { width_cm: 9.0, depth_cm: 7.0, height_cm: 4.0 }),
    ];
    let mut out = Vec::new();
    for (i, (label, solid)) in cases.into_iter().enumerate() {
        let pair = SyntheticPair::new(label, label, solid, &ViewSetup::new(10.0, i as u64), &ViewSetup::new(10.0, 100 + i as u64));
        let top = AnnotationProvider::new(pair.top.annotations(label));
        let side = AnnotationProvider::new(pair.side.annotations(label));
        let est = pipeline.estimate(&pair.top.image, &pair.side.image, &top, &side)?;
        let food = &est.report.foods[0];
        let truth = pair.true_volume_cm3();
        println!(
            "{label:>9}: {:.1} cm3 (true {truth:.1}, {:+.1}%), {:.1} g, {:.1} kcal",
            food.volume_cm3,
            100.0 * (food.volume_cm3 - truth) / truth,
            food.mass_g,
            food.calories_kcal
        );
        out.push((label.to_string(), food.volume_cm3, truth));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
