use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use foodcal::calibrate::{detect_coin, scale_from_coin, CalibrationConstants, HoughOptions};
use foodcal::detect::{sidecar_provider, Detection};
use foodcal::eval::evaluate_manifest;
use foodcal::ingest::{load_image, load_manifest, voc};
use foodcal::nutrition::NutritionTable;
use foodcal::pipeline::{write_overlays, DetectorChoice, Pipeline, PipelineConfig, Stage, StageError};
use foodcal::raster::BBox;
use foodcal::segment::{grabcut_run, GrabCutOptions};

const EXIT_STAGE: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Food volume and calorie estimation from a top view and a side view.
#[derive(Parser)]
#[command(name = "foodcal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate volume, mass and calories for one top/side pair.
    Estimate(EstimateArgs),
    /// Run a manifest and report per-type mean volume error.
    Evaluate(EvaluateArgs),
    /// GrabCut one box and write the mask.
    Segment(SegmentArgs),
    /// Find the coin in one box and print the scale.
    Calibrate(CalibrateArgs),
    /// Print the nutrition table.
    Foods(FoodsArgs),
}

#[derive(Args, Default)]
struct Common {
    /// JSON pipeline config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// "annotations" or "sidecar:<dir>".
    #[arg(long)]
    detector: Option<DetectorChoice>,
    #[arg(long)]
    score_threshold: Option<f64>,
    /// GrabCut iteration cap.
    #[arg(long)]
    iters: Option<usize>,
    /// GrabCut relative energy tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    min_support: Option<f64>,
    /// JSON {label: shape} overrides.
    #[arg(long)]
    shapes: Option<PathBuf>,
    /// JSON nutrition table overrides.
    #[arg(long)]
    nutrition: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    top: PathBuf,
    #[arg(long)]
    side: PathBuf,
    /// Boxes for the top image (.json sidecar or .xml VOC), for the annotations detector.
    #[arg(long)]
    top_boxes: Option<PathBuf>,
    #[arg(long)]
    side_boxes: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for annotated copies of both images.
    #[arg(long)]
    overlay: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    image: PathBuf,
    /// x0,y0,x1,y1 inclusive.
    #[arg(long = "box")]
    bbox: BBox,
    /// Single-channel PNG, 255 = foreground.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overlay: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long = "box")]
    bbox: BBox,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FoodsArgs {
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    common: Common,
}

enum Failure {
    Usage(String),
    Stage(StageError),
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::Stage(e)
    }
}

fn pipeline(common: &Common) -> Result<Pipeline, Failure> {
    let mut c = match &common.config {
        Some(p) => PipelineConfig::from_file(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &common.detector {
        c.detector = d.clone();
    }
    if let Some(v) = common.score_threshold {
        c.score_threshold = v;
    }
    if let Some(v) = common.iters {
        c.grabcut.max_iters = v;
    }
    if let Some(v) = common.tol {
        c.grabcut.rel_tol = v;
    }
    if let Some(v) = common.min_support {
        c.hough.min_support = v;
    }
    if let Some(p) = &common.shapes {
        c.shapes = Some(p.clone());
    }
    if let Some(p) = &common.nutrition {
        c.nutrition = Some(p.clone());
    }
    if let Some(v) = common.jobs {
        c.jobs = v;
    }
    Pipeline::new(c).map_err(|e| Failure::Usage(e.to_string()))
}

fn ingest_err(e: impl std::fmt::Display) -> StageError {
    StageError::new(Stage::Ingest, "Io", e)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), StageError> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(ingest_err),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_boxes(path: &Path, threshold: f64) -> Result<Vec<Detection>, StageError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
        let xml = std::fs::read_to_string(path).map_err(ingest_err)?;
        voc::parse_voc(&xml).map_err(|e| StageError::new(Stage::Ingest, e.code(), e))
    } else {
        Ok(sidecar_provider(path, threshold).map_err(StageError::from_detect)?.filtered())
    }
}

fn estimate(a: EstimateArgs) -> Result<(), Failure> {
    let p = pipeline(&a.common)?;
    let th = p.config.score_threshold;
    let top_boxes = a.top_boxes.as_deref().map(|b| read_boxes(b, th)).transpose()?;
    let side_boxes = a.side_boxes.as_deref().map(|b| read_boxes(b, th)).transpose()?;
    let est = p.estimate_files(&a.top, &a.side, top_boxes.as_deref(), side_boxes.as_deref())?;
    if let Some(dir) = &a.overlay {
        write_overlays(dir, &est, &a.top, &a.side)?;
    }
    let text = serde_json::to_string_pretty(&est.report).expect("report serializes");
    write_output(a.report.as_deref(), &text)?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let p = pipeline(&a.common)?;
    let manifest = load_manifest(&a.manifest).map_err(|e| StageError::new(Stage::Ingest, e.code(), e))?;
    let report = evaluate_manifest(&manifest, &p).map_err(|e| {
        let code = match e {
            foodcal::eval::EvalError::NoEvaluableRecords => "NoEvaluableRecords",
            _ => "EvalError",
        };
        StageError::new(Stage::Ingest, code, e)
    })?;
    write_output(Some(&a.report), &report.to_json())?;
    for t in &report.types {
        eprintln!("{:<20} n={:<4} ME={:+.4} discarded={}", t.food_label, t.n, t.mean_error, t.discarded);
    }
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<(), Failure> {
    let p = pipeline(&a.common)?;
    let opts: GrabCutOptions = p.config.grabcut;
    let image = load_image(&a.image).map_err(|e| StageError::new(Stage::Ingest, e.code(), e))?;
    let res = grabcut_run(&image, a.bbox, &opts).map_err(|e| StageError::new(Stage::Segment, e.code(), e))?;
    if let Some(out) = &a.out {
        res.mask.to_gray_image().save(out).map_err(ingest_err)?;
    }
    if let Some(out) = &a.overlay {
        let mut o = image.clone();
        for &(x, y) in &res.contour {
            o.put(x as u32, y as u32, [255, 230, 0]);
        }
        o.to_rgb_image().save(out).map_err(ingest_err)?;
    }
    let summary = json!({
        "schema": foodcal::pipeline::REPORT_SCHEMA,
        "box": a.bbox,
        "area_px": res.mask.count(),
        "mask_box": res.mask.bounding_box(),
        "contour_len": res.contour.len(),
        "iterations": res.iterations,
        "energies": res.energies,
    });
    write_output(None, &serde_json::to_string_pretty(&summary).expect("serializes"))?;
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<(), Failure> {
    let p = pipeline(&a.common)?;
    let opts: HoughOptions = p.config.hough;
    let image = load_image(&a.image).map_err(|e| StageError::new(Stage::Ingest, e.code(), e))?;
    let stage_err = |e: foodcal::calibrate::CalibrateError| StageError::new(Stage::Calibrate, e.code(), e);
    let circle = detect_coin(&image, a.bbox, &opts).map_err(stage_err)?;
    let scale = scale_from_coin(&circle, &CalibrationConstants::default()).map_err(stage_err)?;
    let out = json!({ "circle": circle, "scale": scale });
    write_output(None, &serde_json::to_string_pretty(&out).expect("serializes"))?;
    Ok(())
}

fn foods(a: FoodsArgs) -> Result<(), Failure> {
    let table = match &a.common.nutrition {
        Some(p) => NutritionTable::with_overrides_from(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => NutritionTable::builtin(),
    };
    if a.json {
        let rows: Vec<_> = table.iter().collect();
        println!("{}", serde_json::to_string_pretty(&rows).expect("serializes"));
    } else {
        println!("{:<20} {:>8} {:>8}  shape", "label", "g/cm3", "kcal/g");
        for s in table.iter() {
            println!("{:<20} {:>8} {:>8}  {}", s.label, s.density, s.energy, s.shape);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Segment(a) => segment(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Foods(a) => foods(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("{}", json!({ "error": e }));
            ExitCode::from(EXIT_STAGE)
        }
    }
}
