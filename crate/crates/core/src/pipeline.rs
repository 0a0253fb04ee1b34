//! End-to-end estimation for one top/side pair.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calibrate::{detect_coin, scale_from_coin, CalibrationConstants, CircleEstimate, HoughOptions, ScaleFactor};
use crate::detect::{
    detect, match_views, sidecar_provider, DetectError, Detection, DetectorProvider, SceneDetections,
    DEFAULT_SCORE_THRESHOLD,
};
use crate::ingest::View;
use crate::measure::{estimate_volume, silhouette_features, ShapeModel, ShapeTable};
use crate::nutrition::{calories_from_volume, NutritionTable};
use crate::raster::{BBox, Image};
use crate::segment::{grabcut_run, GrabCutOptions, GrabCutResult};

pub const REPORT_SCHEMA: u32 = 1;
pub const MAX_GRABCUT_ITERS: usize = 100;

/// Where food and coin boxes come from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DetectorChoice {
    /// Boxes stored with the dataset.
    #[default]
    Annotations,
    /// One `<image stem>.json` sidecar per image in this directory.
    Sidecar(PathBuf),
}

impl DetectorChoice {
    pub fn sidecar_for(dir: &Path, image: &Path) -> PathBuf {
        let stem = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        dir.join(format!("{stem}.json"))
    }
}

impl fmt::Display for DetectorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorChoice::Annotations => f.write_str("annotations"),
            DetectorChoice::Sidecar(dir) => write!(f, "sidecar:{}", dir.display()),
        }
    }
}

impl std::str::FromStr for DetectorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "annotations" => Ok(DetectorChoice::Annotations),
            Some(("sidecar", dir)) if !dir.is_empty() => Ok(DetectorChoice::Sidecar(PathBuf::from(dir))),
            _ => Err(format!("detector must be \"annotations\" or \"sidecar:<dir>\", got {s:?}")),
        }
    }
}

impl Serialize for DetectorChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DetectorChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Settings shared by every subcommand. All fields have defaults, so a
/// `--config` file may set any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detector: DetectorChoice,
    pub score_threshold: f64,
    pub grabcut: GrabCutOptions,
    pub hough: HoughOptions,
    pub shapes: Option<PathBuf>,
    pub nutrition: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: DetectorChoice::Annotations,
            score_threshold: DEFAULT_SCORE_THRESHOLD,
            grabcut: GrabCutOptions::default(),
            hough: HoughOptions::default(),
            shapes: None,
            nutrition: None,
            jobs: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{field} = {value} is outside {range}")]
    OutOfRange {
        field: &'static str,
        value: String,
        range: &'static str,
    },
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("nutrition table: {0}")]
    Nutrition(#[from] crate::nutrition::NutritionError),
    #[error("shape table: {0}")]
    Shapes(#[from] crate::measure::MeasureError),
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let read_err = |message: String| ConfigError::Read {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, field: &'static str, value: impl fmt::Display, range: &'static str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    field,
                    value: value.to_string(),
                    range,
                })
            }
        }
        let g = &self.grabcut;
        check((0.0..=1.0).contains(&self.score_threshold), "score_threshold", self.score_threshold, "[0, 1]")?;
        check((1..=MAX_GRABCUT_ITERS).contains(&g.max_iters), "grabcut.max_iters", g.max_iters, "[1, 100]")?;
        check(g.rel_tol.is_finite() && g.rel_tol >= 0.0, "grabcut.rel_tol", g.rel_tol, "[0, inf)")?;
        check(g.gamma.is_finite() && g.gamma > 0.0, "grabcut.gamma", g.gamma, "(0, inf)")?;
        check((0.0..=1.0).contains(&self.hough.min_support), "hough.min_support", self.hough.min_support, "[0, 1]")?;
        check(self.jobs >= 1, "jobs", self.jobs, "[1, inf)")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Detect,
    Calibrate,
    Segment,
    Measure,
    Nutrition,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Detect => "detect",
            Stage::Calibrate => "calibrate",
            Stage::Segment => "segment",
            Stage::Measure => "measure",
            Stage::Nutrition => "nutrition",
        })
    }
}

/// A failure attributed to one pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{stage} failed ({reason}): {message}")]
pub struct StageError {
    pub stage: Stage,
    /// Stable error code such as `NoCoin`.
    pub reason: String,
    pub message: String,
}

impl StageError {
    pub fn new(stage: Stage, reason: &str, message: impl fmt::Display) -> Self {
        Self {
            stage,
            reason: reason.to_string(),
            message: message.to_string(),
        }
    }

    pub fn from_detect(e: DetectError) -> Self {
        let stage = if e.is_coin_error() { Stage::Calibrate } else { Stage::Detect };
        Self::new(stage, e.code(), &e)
    }
}

/// Milliseconds spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub ingest_ms: f64,
    pub detect_ms: f64,
    pub calibrate_ms: f64,
    pub segment_ms: f64,
    pub measure_ms: f64,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *slot += t.elapsed().as_secs_f64() * 1e3;
    out
}

/// Config with its tables loaded.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub nutrition: NutritionTable,
    pub shapes: ShapeTable,
    pub constants: CalibrationConstants,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let nutrition = match &config.nutrition {
            Some(p) => NutritionTable::with_overrides_from(p)?,
            None => NutritionTable::builtin(),
        };
        let mut shapes = ShapeTable::from_nutrition(&nutrition);
        if let Some(p) = &config.shapes {
            shapes.apply_overrides_from(p)?;
        }
        Ok(Self {
            config,
            nutrition,
            shapes,
            constants: CalibrationConstants::default(),
        })
    }

    /// Provider for one image: the given annotations, or the configured
    /// sidecar file for `image_path`.
    pub fn provider_for(
        &self,
        image_path: &Path,
        annotations: Option<&[Detection]>,
    ) -> Result<Box<dyn DetectorProvider>, StageError> {
        match (&self.config.detector, annotations) {
            (DetectorChoice::Sidecar(dir), _) => {
                let p = DetectorChoice::sidecar_for(dir, image_path);
                let provider = sidecar_provider(&p, self.config.score_threshold).map_err(StageError::from_detect)?;
                Ok(Box::new(provider))
            }
            (DetectorChoice::Annotations, Some(boxes)) if !boxes.is_empty() => {
                Ok(Box::new(crate::detect::AnnotationProvider::new(boxes.to_vec())))
            }
            (DetectorChoice::Annotations, _) => Err(StageError::new(
                Stage::Detect,
                "MissingAnnotations",
                format!("no annotations for {}", image_path.display()),
            )),
        }
    }

    /// Runs detection through nutrition on a loaded pair.
    pub fn estimate(
        &self,
        top: &Image,
        side: &Image,
        top_provider: &dyn DetectorProvider,
        side_provider: &dyn DetectorProvider,
    ) -> Result<Estimate, StageError> {
        let mut timings = StageTimings::default();
        let top_scene = timed(&mut timings.detect_ms, || detect(top, top_provider)).map_err(StageError::from_detect)?;
        let side_scene =
            timed(&mut timings.detect_ms, || detect(side, side_provider)).map_err(StageError::from_detect)?;
        let pairs = match_views(&top_scene, &side_scene).map_err(StageError::from_detect)?;

        let calibrate = |image: &Image, scene: &SceneDetections| {
            let circle = detect_coin(image, scene.coin.bbox, &self.config.hough)
                .map_err(|e| StageError::new(Stage::Calibrate, e.code(), &e))?;
            let scale =
                scale_from_coin(&circle, &self.constants).map_err(|e| StageError::new(Stage::Calibrate, e.code(), &e))?;
            Ok::<_, StageError>((circle, scale))
        };
        let (top_circle, top_scale) = timed(&mut timings.calibrate_ms, || calibrate(top, &top_scene))?;
        let (side_circle, side_scale) = timed(&mut timings.calibrate_ms, || calibrate(side, &side_scene))?;

        let segment = |image: &Image, d: &Detection| {
            grabcut_run(image, d.bbox, &self.config.grabcut)
                .map_err(|e| StageError::new(Stage::Segment, e.code(), format!("{}: {e}", d.label)))
        };
        let mut foods = Vec::new();
        let mut top_segs = Vec::new();
        let mut side_segs = Vec::new();
        for (t, s) in pairs {
            let top_seg = timed(&mut timings.segment_ms, || segment(top, t))?;
            let side_seg = timed(&mut timings.segment_ms, || segment(side, s))?;
            let food = timed(&mut timings.measure_ms, || {
                self.measure_food(t, s, &top_seg, &side_seg, top_scale, side_scale)
            })?;
            foods.push(food);
            top_segs.push(top_seg);
            side_segs.push(side_seg);
        }
        let report = EstimateReport {
            schema: REPORT_SCHEMA,
            detector: self.config.detector.to_string(),
            top: ViewReport::new(&top_scene, top_circle, top_scale),
            side: ViewReport::new(&side_scene, side_circle, side_scale),
            foods,
        };
        Ok(Estimate {
            report,
            top: ViewAnalysis {
                scene: top_scene,
                circle: top_circle,
                segmentations: top_segs,
            },
            side: ViewAnalysis {
                scene: side_scene,
                circle: side_circle,
                segmentations: side_segs,
            },
            timings,
            images: None,
        })
    }

    fn measure_food(
        &self,
        top: &Detection,
        side: &Detection,
        top_seg: &GrabCutResult,
        side_seg: &GrabCutResult,
        top_scale: ScaleFactor,
        side_scale: ScaleFactor,
    ) -> Result<FoodReport, StageError> {
        let measure_err = |e: crate::measure::MeasureError| StageError::new(Stage::Measure, e.code(), &e);
        let shape = self.shapes.shape_for(&top.label).map_err(measure_err)?;
        let top_sil = silhouette_features(&top_seg.mask).map_err(measure_err)?;
        let side_sil = silhouette_features(&side_seg.mask).map_err(measure_err)?;
        let volume = estimate_volume(&top_sil, &side_sil, top_scale, side_scale, shape).map_err(measure_err)?;
        let spec = self
            .nutrition
            .lookup(&top.label)
            .map_err(|e| StageError::new(Stage::Nutrition, e.code(), &e))?;
        let cal = calories_from_volume(volume.volume, spec).map_err(|e| StageError::new(Stage::Nutrition, e.code(), &e))?;
        Ok(FoodReport {
            label: top.label.clone(),
            shape,
            volume_cm3: cal.volume,
            mass_g: cal.mass,
            calories_kcal: cal.calories,
            top_box: top.bbox,
            side_box: side.bbox,
            top_area_px: top_sil.area_px,
            side_height_px: side_sil.height_px,
            grabcut_iterations: [top_seg.iterations, side_seg.iterations],
        })
    }

    /// Loads both images and estimates them, using `annotations` when the
    /// detector is annotation-backed.
    pub fn estimate_files(
        &self,
        top_path: &Path,
        side_path: &Path,
        top_annotations: Option<&[Detection]>,
        side_annotations: Option<&[Detection]>,
    ) -> Result<Estimate, StageError> {
        let t = Instant::now();
        let load = |p: &Path| crate::ingest::load_image(p).map_err(|e| StageError::new(Stage::Ingest, e.code(), &e));
        let top = load(top_path)?;
        let side = load(side_path)?;
        let ingest_ms = t.elapsed().as_secs_f64() * 1e3;
        let top_provider = self.provider_for(top_path, top_annotations)?;
        let side_provider = self.provider_for(side_path, side_annotations)?;
        let mut est = self.estimate(&top, &side, top_provider.as_ref(), side_provider.as_ref())?;
        est.timings.ingest_ms = ingest_ms;
        est.images = Some((top, side));
        Ok(est)
    }
}

/// Result of [`Pipeline::estimate`] with the intermediate state kept for
/// overlays.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub report: EstimateReport,
    pub top: ViewAnalysis,
    pub side: ViewAnalysis,
    pub timings: StageTimings,
    /// Decoded inputs, when loaded from files.
    pub images: Option<(Image, Image)>,
}

#[derive(Debug, Clone)]
pub struct ViewAnalysis {
    pub scene: SceneDetections,
    pub circle: CircleEstimate,
    /// One per food, in label order.
    pub segmentations: Vec<GrabCutResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub schema: u32,
    pub detector: String,
    pub top: ViewReport,
    pub side: ViewReport,
    pub foods: Vec<FoodReport>,
}

impl EstimateReport {
    pub fn total_volume(&self) -> f64 {
        self.foods.iter().map(|f| f.volume_cm3).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewReport {
    pub coin_box: BBox,
    pub coin: CircleEstimate,
    pub scale: ScaleFactor,
    pub diagnostics: Vec<String>,
}

impl ViewReport {
    fn new(scene: &SceneDetections, coin: CircleEstimate, scale: ScaleFactor) -> Self {
        Self {
            coin_box: scene.coin.bbox,
            coin,
            scale,
            diagnostics: scene.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoodReport {
    pub label: String,
    pub shape: ShapeModel,
    pub volume_cm3: f64,
    pub mass_g: f64,
    pub calories_kcal: f64,
    pub top_box: BBox,
    pub side_box: BBox,
    pub top_area_px: u64,
    pub side_height_px: u32,
    /// GrabCut iterations run in the top and side view.
    pub grabcut_iterations: [usize; 2],
}

const BOX_COLOR: [u8; 3] = [40, 90, 255];
const COIN_COLOR: [u8; 3] = [0, 220, 0];
const CONTOUR_COLOR: [u8; 3] = [255, 230, 0];

/// Copy of `image` with boxes, the fitted coin circle and food contours drawn.
pub fn draw_overlay(image: &Image, view: &ViewAnalysis) -> Image {
    let mut out = image.clone();
    let mut plot = |x: i64, y: i64, c: [u8; 3]| {
        if x >= 0 && y >= 0 && (x as u32) < out.width() && (y as u32) < out.height() {
            out.put(x as u32, y as u32, c);
        }
    };
    for d in view.scene.foods.iter().chain(std::iter::once(&view.scene.coin)) {
        let b = d.bbox;
        for x in b.xmin..=b.xmax {
            plot(x, b.ymin, BOX_COLOR);
            plot(x, b.ymax, BOX_COLOR);
        }
        for y in b.ymin..=b.ymax {
            plot(b.xmin, y, BOX_COLOR);
            plot(b.xmax, y, BOX_COLOR);
        }
    }
    let c = view.circle;
    let steps = (2.0 * std::f64::consts::PI * c.r).ceil().max(16.0) as usize * 2;
    for i in 0..steps {
        let t = i as f64 / steps as f64 * std::f64::consts::TAU;
        plot((c.cx + c.r * t.cos()).round() as i64, (c.cy + c.r * t.sin()).round() as i64, COIN_COLOR);
    }
    for seg in &view.segmentations {
        for &(x, y) in &seg.contour {
            plot(x, y, CONTOUR_COLOR);
        }
    }
    out
}

/// Writes `<stem>.overlay.png` for both views into `dir`. Returns the paths.
pub fn write_overlays(
    dir: &Path,
    est: &Estimate,
    top_path: &Path,
    side_path: &Path,
) -> Result<[PathBuf; 2], StageError> {
    let (top, side) = est
        .images
        .as_ref()
        .ok_or_else(|| StageError::new(Stage::Ingest, "NoImages", "estimate was not loaded from files"))?;
    std::fs::create_dir_all(dir).map_err(|e| StageError::new(Stage::Ingest, "Io", e))?;
    let mut out = Vec::new();
    for (image, analysis, path, view) in [(top, &est.top, top_path, View::Top), (side, &est.side, side_path, View::Side)] {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| view.to_string());
        let target = dir.join(format!("{stem}.overlay.png"));
        draw_overlay(image, analysis)
            .to_rgb_image()
            .save(&target)
            .map_err(|e| StageError::new(Stage::Ingest, "Io", e))?;
        out.push(target);
    }
    Ok([out[0].clone(), out[1].clone()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Solid, SyntheticPair, ViewSetup};

    fn sphere_pair(with_coin: bool) -> SyntheticPair {
        let mut side = ViewSetup::new(12.0, 2);
        side.with_coin = with_coin;
        SyntheticPair::new("apple001", "apple", Solid::Sphere { radius_cm: 3.0 }, &ViewSetup::new(12.0, 1), &side)
    }

    fn run(p: &SyntheticPair) -> Result<Estimate, StageError> {
        let pipe = Pipeline::new(PipelineConfig::default()).unwrap();
        let top = crate::detect::AnnotationProvider::new(p.top.annotations(&p.label));
        let side = crate::detect::AnnotationProvider::new(p.side.annotations(&p.label));
        pipe.estimate(&p.top.image, &p.side.image, &top, &side)
    }

    #[test]
    fn detector_choice_round_trip() {
        for s in ["annotations", "sidecar:out/dets"] {
            let d: DetectorChoice = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("sidecar:".parse::<DetectorChoice>().is_err());
        assert!("yolo".parse::<DetectorChoice>().is_err());
        assert_eq!(
            DetectorChoice::sidecar_for(Path::new("d"), Path::new("imgs/apple001T.jpg")),
            PathBuf::from("d/apple001T.json")
        );
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = [
            PipelineConfig {
                score_threshold: 1.5,
                ..Default::default()
            },
            PipelineConfig {
                grabcut: GrabCutOptions {
                    max_iters: 0,
                    ..Default::default()
                },
                ..Default::default()
            },
            PipelineConfig {
                jobs: 0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        let parsed: PipelineConfig = serde_json::from_str(r#"{"jobs": 3, "detector": "sidecar:x"}"#).unwrap();
        assert_eq!(parsed.jobs, 3);
        assert_eq!(parsed.detector, DetectorChoice::Sidecar("x".into()));
        assert_eq!(parsed.grabcut, GrabCutOptions::default());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"jobz": 3}"#).is_err());
    }

    #[test]
    fn apple_scene_calories_follow_table() {
        let est = run(&sphere_pair(true)).unwrap();
        let r = &est.report;
        assert_eq!(r.schema, 1);
        assert_eq!(r.foods.len(), 1);
        let f = &r.foods[0];
        assert_eq!(f.label, "apple");
        assert_eq!(f.shape, ShapeModel::Ellipsoid);
        assert!((f.mass_g - f.volume_cm3 * 0.78).abs() < 1e-9);
        assert!((f.calories_kcal - f.volume_cm3 * 0.78 * 0.52).abs() < 1e-9);
        let truth = 4.0 / 3.0 * std::f64::consts::PI * 27.0;
        assert!((f.volume_cm3 - truth).abs() / truth < 0.1, "{} vs {truth}", f.volume_cm3);
        assert!((r.top.scale.cm_per_px() - 1.0 / 12.0).abs() < 0.01);
    }

    #[test]
    fn missing_coin_is_a_calibrate_failure() {
        let e = run(&sphere_pair(false)).unwrap_err();
        assert_eq!(e.stage, Stage::Calibrate);
        assert_eq!(e.reason, "NoCoin");
    }

    #[test]
    fn overlay_marks_contour() {
        let p = sphere_pair(true);
        let est = run(&p).unwrap();
        let o = draw_overlay(&p.top.image, &est.top);
        let (x, y) = est.top.segmentations[0].contour[0];
        assert_eq!(o.get(x as u32, y as u32), CONTOUR_COLOR);
        assert_eq!((o.width(), o.height()), (p.top.image.width(), p.top.image.height()));
    }
}
