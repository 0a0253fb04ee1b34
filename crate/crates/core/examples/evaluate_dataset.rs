//! Write a small synthetic dataset, evaluate it, and print per-type mean error.
//!
//! `cargo run --example evaluate_dataset [manifest.json]` evaluates an
//! existing manifest instead.

use std::path::PathBuf;

use foodcal::eval::{evaluate_manifest, EvalReport};
use foodcal::ingest::load_manifest;
use foodcal::nutrition::NutritionTable;
use foodcal::pipeline::{Pipeline, PipelineConfig};
use foodcal::synth::{write_dataset, Solid, SyntheticPair, ViewSetup};

pub fn synthetic_manifest(dir: &std::path::Path) -> std::io::Result<PathBuf> {
    let mut pairs = Vec::new();
    for i in 0..3u64 {
        let r = 2.5 + 0.5 * i as f64;
        pairs.push(SyntheticPair::new(
            &format!("apple{:03}", i + 1),
            "apple",
            Solid::Sphere { radius_cm: r },
            &ViewSetup::new(10.0, i),
            &ViewSetup::new(10.0, 50 + i),
        ));
    }
    pairs.push(SyntheticPair::new(
        "bun001",
        "bun",
        Solid::Cylinder { radius_cm: 4.0, height_cm: 3.5 },
        &ViewSetup::new(9.0, 7),
        &ViewSetup::new(9.0, 8),
    ));
    let table = NutritionTable::builtin();
    write_dataset(dir, &pairs, |l| table.lookup(l).ok().map(|s| s.density))
}

pub fn run(manifest: Option<PathBuf>, jobs: usize) -> Result<EvalReport, Box<dyn std::error::Error>> {
    let (path, _guard) = match manifest {
        Some(p) => (p, None),
        None => {
            let dir = std::env::temp_dir().join(format!("foodcal-example-{}", std::process::id()));
            (synthetic_manifest(&dir)?, Some(TempDir(dir)))
        }
    };
    let manifest = load_manifest(&path)?;
    let pipeline = Pipeline::new(PipelineConfig {
        jobs,
        ..Default::default()
    })?;
    let report = evaluate_manifest(&manifest, &pipeline)?;
    println!("{} of {} pairs evaluated", report.evaluated, report.total_records);
    for t in &report.types {
        println!("{:>10}: n={} ME={:+.4} |ME|={:.4}", t.food_label, t.n, t.mean_error, t.abs_mean_error);
    }
    for d in &report.discarded {
        println!("discarded {} at {}: {}", d.pair_id, d.stage, d.reason);
    }
    Ok(report)
}

struct TempDir(PathBuf);

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run(std::env::args().nth(1).map(PathBuf::from), 2).map(|_| ())
}
