//! GrabCut a colored square out of a noisy field and report the energy trace.

use foodcal::raster::BBox;
use foodcal::segment::{grabcut_run, GrabCutOptions};
use foodcal::synth::{paint, rect_mask, with_noise};

pub fn run() -> Result<f64, Box<dyn std::error::Error>> {
    let (w, h) = (120, 100);
    let truth = rect_mask(w, h, 40.0, 30.0, 80.0, 70.0);
    let image = with_noise(
        &paint(w, h, |x, y| if truth.get(x, y) { [200, 60, 40] } else { [60, 140, 70] }),
        8,
        11,
    );
    let res = grabcut_run(&image, BBox::new(30, 20, 89, 79), &GrabCutOptions::default())?;
    let iou = res.mask.iou(&truth);
    println!("iterations: {}", res.iterations);
    for (i, e) in res.energies.iter().enumerate() {
        println!("  E[{i}] = {e:.3}");
    }
    println!("foreground {} px, contour {} px, IoU {iou:.4}", res.mask.count(), res.contour.len());
    Ok(iou)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
