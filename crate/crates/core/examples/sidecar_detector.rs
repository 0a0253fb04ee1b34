//! Plug an external detector in through a JSON sidecar file.

use foodcal::detect::{detect, sidecar_provider, SceneDetections};
use foodcal::synth::{Solid, SyntheticPair, ViewSetup};

pub fn run() -> Result<SceneDetections, Box<dyn std::error::Error>> {
    let pair = SyntheticPair::new("egg001", "egg", Solid::Sphere { radius_cm: 2.2 }, &ViewSetup::new(12.0, 1), &ViewSetup::new(12.0, 2));
    let coin = pair.top.coin_box.expect("coin drawn");
    let food = pair.top.food_box;
    // what a detector might emit: a confident coin, the egg twice, and a weak false positive
    let sidecar = serde_json::json!({
        "image": "egg001_top.png",
        "detections": [
            {"label": "coin", "score": 0.97, "xmin": coin.xmin, "ymin": coin.ymin, "xmax": coin.xmax, "ymax": coin.ymax},
            {"label": "egg", "score": 0.91, "xmin": food.xmin, "ymin": food.ymin, "xmax": food.xmax, "ymax": food.ymax},
            {"label": "egg", "score": 0.62, "xmin": food.xmin + 2, "ymin": food.ymin + 1, "xmax": food.xmax, "ymax": food.ymax},
            {"label": "lemon", "score": 0.2, "xmin": 0, "ymin": 0, "xmax": 30, "ymax": 30}
        ]
    });
    let path = std::env::temp_dir().join(format!("foodcal-sidecar-{}.json", std::process::id()));
    std::fs::write(&path, sidecar.to_string())?;
    let provider = sidecar_provider(&path, 0.5);
    let _ = std::fs::remove_file(&path);
    let scene = detect(&pair.top.image, &provider?)?;
    println!("coin {} ({:.2})", scene.coin.bbox, scene.coin.score);
    for f in &scene.foods {
        println!("{} {} ({:.2})", f.label, f.bbox, f.score);
    }
    Ok(scene)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
