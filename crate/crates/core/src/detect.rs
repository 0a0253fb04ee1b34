//! Labeled boxes for the foods and the coin in one view.
//!
//! Boxes come from a [`DetectorProvider`]: either the dataset's own
//! annotations replayed verbatim, or a JSON sidecar written by an external
//! detector. [`detect`] validates the provider output against the scene
//! rules (exactly one coin, one or two foods with distinct labels) and
//! never repairs a scene that breaks them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{ImagePairRecord, View};
use crate::nutrition::normalize_label;
use crate::raster::{BBox, Image};

pub const COIN_LABEL: &str = "coin";
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.5;
/// Same-label sidecar boxes overlapping more than this are one object.
pub const SAME_LABEL_IOU: f64 = 0.5;
pub const MAX_FOODS: usize = 2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DetectError {
    #[error("no coin detected")]
    NoCoin,
    #[error("{0} coins detected, expected one")]
    MultipleCoins(usize),
    #[error("no food detected")]
    NoFood,
    #[error("{0} foods detected, at most {MAX_FOODS} allowed")]
    TooManyFoods(usize),
    #[error("two foods share the label {0:?}")]
    DuplicateFoodLabels(String),
    #[error("record {pair_id} has no {view} annotations")]
    MissingAnnotations { pair_id: String, view: View },
    #[error("box for {label:?} lies outside the {width}x{height} image")]
    BoxOutsideImage { label: String, width: u32, height: u32 },
    #[error("sidecar parse error: {0}")]
    ParseError(String),
    #[error("sidecar schema error: {0}")]
    SchemaError(String),
    #[error("top view foods {top:?} differ from side view foods {side:?}")]
    ViewMismatch { top: Vec<String>, side: Vec<String> },
}

impl DetectError {
    pub fn code(&self) -> &'static str {
        match self {
            DetectError::NoCoin => "NoCoin",
            DetectError::MultipleCoins(_) => "MultipleCoins",
            DetectError::NoFood => "NoFood",
            DetectError::TooManyFoods(_) => "TooManyFoods",
            DetectError::DuplicateFoodLabels(_) => "DuplicateFoodLabels",
            DetectError::MissingAnnotations { .. } => "MissingAnnotations",
            DetectError::BoxOutsideImage { .. } => "BoxOutsideImage",
            DetectError::ParseError(_) => "ParseError",
            DetectError::SchemaError(_) => "SchemaError",
            DetectError::ViewMismatch { .. } => "ViewMismatch",
        }
    }

    /// Coin problems belong to calibration rather than food detection.
    pub fn is_coin_error(&self) -> bool {
        matches!(self, DetectError::NoCoin | DetectError::MultipleCoins(_))
    }
}

fn default_score() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    #[serde(flatten)]
    pub bbox: BBox,
    #[serde(default = "default_score")]
    pub score: f64,
}

impl Detection {
    pub fn new(label: &str, bbox: BBox, score: f64) -> Self {
        Self {
            label: label.to_string(),
            bbox,
            score,
        }
    }

    pub fn is_coin(&self) -> bool {
        normalize_label(&self.label) == COIN_LABEL
    }
}

/// A validated view: one coin, one or two distinctly labeled foods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneDetections {
    pub coin: Detection,
    /// Sorted by label.
    pub foods: Vec<Detection>,
    /// Notes about repaired input, e.g. clipped boxes.
    pub diagnostics: Vec<String>,
}

/// Source of raw boxes for one image.
pub trait DetectorProvider: Send + Sync {
    fn detections(&self, image: &Image) -> Result<Vec<Detection>, DetectError>;
}

/// Replays ground-truth boxes from a manifest record.
#[derive(Debug, Clone)]
pub struct AnnotationProvider {
    boxes: Vec<Detection>,
}

impl AnnotationProvider {
    pub fn new(boxes: Vec<Detection>) -> Self {
        Self { boxes }
    }
}

impl DetectorProvider for AnnotationProvider {
    fn detections(&self, _image: &Image) -> Result<Vec<Detection>, DetectError> {
        Ok(self.boxes.clone())
    }
}

pub fn annotation_provider(record: &ImagePairRecord, view: View) -> Result<AnnotationProvider, DetectError> {
    let boxes = record.annotations(view);
    if boxes.is_empty() {
        return Err(DetectError::MissingAnnotations {
            pair_id: record.pair_id.clone(),
            view,
        });
    }
    Ok(AnnotationProvider { boxes: boxes.to_vec() })
}

/// Sidecar file written by an external detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub image: String,
    pub detections: Vec<Detection>,
}

/// Boxes from an external detector, thresholded and de-duplicated.
#[derive(Debug, Clone)]
pub struct SidecarProvider {
    pub sidecar: Sidecar,
    pub threshold: f64,
}

impl SidecarProvider {
    pub fn from_sidecar(sidecar: Sidecar, threshold: f64) -> Result<Self, DetectError> {
        for d in &sidecar.detections {
            if d.label.trim().is_empty() {
                return Err(DetectError::SchemaError("empty label".into()));
            }
            if !(0.0..=1.0).contains(&d.score) {
                return Err(DetectError::SchemaError(format!("score {} of {:?} outside [0, 1]", d.score, d.label)));
            }
            if !d.bbox.is_proper() {
                return Err(DetectError::SchemaError(format!("degenerate box {} for {:?}", d.bbox, d.label)));
            }
        }
        Ok(Self { sidecar, threshold })
    }

    /// Drops boxes scoring below the threshold, then keeps only the
    /// higher-scoring box of any same-label pair overlapping by more than
    /// [`SAME_LABEL_IOU`] (earlier box on equal scores).
    pub fn filtered(&self) -> Vec<Detection> {
        let mut kept: Vec<Detection> = self
            .sidecar
            .detections
            .iter()
            .filter(|d| d.score >= self.threshold)
            .cloned()
            .collect();
        let mut order: Vec<usize> = (0..kept.len()).collect();
        order.sort_by(|&a, &b| kept[b].score.total_cmp(&kept[a].score).then(a.cmp(&b)));
        let mut keep = vec![true; kept.len()];
        for (n, &i) in order.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            for &j in &order[n + 1..] {
                if keep[j]
                    && normalize_label(&kept[i].label) == normalize_label(&kept[j].label)
                    && kept[i].bbox.iou(&kept[j].bbox) > SAME_LABEL_IOU
                {
                    keep[j] = false;
                }
            }
        }
        let mut k = keep.iter();
        kept.retain(|_| *k.next().unwrap());
        kept
    }
}

impl DetectorProvider for SidecarProvider {
    fn detections(&self, _image: &Image) -> Result<Vec<Detection>, DetectError> {
        Ok(self.filtered())
    }
}

pub fn sidecar_provider(path: &Path, threshold: f64) -> Result<SidecarProvider, DetectError> {
    let text = std::fs::read_to_string(path).map_err(|e| DetectError::ParseError(format!("{}: {e}", path.display())))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| {
        if e.is_data() {
            DetectError::SchemaError(e.to_string())
        } else {
            DetectError::ParseError(e.to_string())
        }
    })?;
    SidecarProvider::from_sidecar(sidecar, threshold)
}

/// Validated scene for `image`. Boxes reaching past the image edge are
/// clipped and noted in the diagnostics; a box entirely outside is an error.
pub fn detect(image: &Image, provider: &dyn DetectorProvider) -> Result<SceneDetections, DetectError> {
    let mut diagnostics = Vec::new();
    let mut coins = Vec::new();
    let mut foods = Vec::new();
    for mut d in provider.detections(image)? {
        d.label = normalize_label(&d.label);
        let clipped = d.bbox.clip(image.width(), image.height()).ok_or_else(|| DetectError::BoxOutsideImage {
            label: d.label.clone(),
            width: image.width(),
            height: image.height(),
        })?;
        if clipped != d.bbox {
            diagnostics.push(format!("{} box {} clipped to {}", d.label, d.bbox, clipped));
            d.bbox = clipped;
        }
        if d.label == COIN_LABEL {
            coins.push(d);
        } else {
            foods.push(d);
        }
    }
    let coin = match coins.len() {
        0 => return Err(DetectError::NoCoin),
        1 => coins.pop().expect("one coin"),
        n => return Err(DetectError::MultipleCoins(n)),
    };
    match foods.len() {
        0 => return Err(DetectError::NoFood),
        n if n > MAX_FOODS => return Err(DetectError::TooManyFoods(n)),
        _ => {}
    }
    foods.sort_by(|a, b| a.label.cmp(&b.label));
    if let [a, b] = foods.as_slice() {
        if a.label == b.label {
            return Err(DetectError::DuplicateFoodLabels(a.label.clone()));
        }
    }
    Ok(SceneDetections {
        coin,
        foods,
        diagnostics,
    })
}

/// Pairs top and side food boxes by label.
pub fn match_views<'a>(
    top: &'a SceneDetections,
    side: &'a SceneDetections,
) -> Result<Vec<(&'a Detection, &'a Detection)>, DetectError> {
    let labels = |s: &SceneDetections| s.foods.iter().map(|f| f.label.clone()).collect::<Vec<_>>();
    if labels(top) != labels(side) {
        return Err(DetectError::ViewMismatch {
            top: labels(top),
            side: labels(side),
        });
    }
    Ok(top.foods.iter().zip(&side.foods).collect())
}
