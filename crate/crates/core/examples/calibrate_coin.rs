//! Find a coin with the Hough transform and turn it into a pixel scale.
//!
//! `cargo run --example calibrate_coin [image.png x0,y0,x1,y1]`

use foodcal::calibrate::{detect_coin, scale_from_coin, CalibrationConstants, CircleEstimate, HoughOptions, ScaleFactor};
use foodcal::ingest::load_image;
use foodcal::raster::BBox;
use foodcal::synth::coin_scene;

pub fn run(args: &[String]) -> Result<(CircleEstimate, ScaleFactor), Box<dyn std::error::Error>> {
    let (image, bbox) = match args {
        [path, bbox] => (load_image(path.as_ref())?, bbox.parse::<BBox>()?),
        _ => {
            let scene = coin_scene(40.0, 3);
            println!("synthetic coin at ({}, {}) r={}", scene.cx, scene.cy, scene.r);
            (scene.image, scene.coin_box)
        }
    };
    let circle = detect_coin(&image, bbox, &HoughOptions::default())?;
    let scale = scale_from_coin(&circle, &CalibrationConstants::default())?;
    println!(
        "circle ({:.2}, {:.2}) r={:.2} support={:.2}; {:.5} cm/px",
        circle.cx,
        circle.cy,
        circle.r,
        circle.support,
        scale.cm_per_px()
    );
    Ok((circle, scale))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    run(&args).map(|_| ())
}
