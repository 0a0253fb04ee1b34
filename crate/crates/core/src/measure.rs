//! Silhouette features and the per-food shape models that turn a top-view
//! and a side-view silhouette into a physical volume.
//!
//! All three models multiply pixel measurements by the per-view scale, so
//! scaling both views by `s` scales every volume by `s³`.
//!
//! * `Column`: top area × side height.
//! * `Ellipsoid`: `π/6 · major · minor · height`, with the major and minor
//!   extents taken from the top view's second moments.
//! * `Irregular`: stacks circular slices using each side-view row width as
//!   a diameter, flattened by the top view's minor/major ratio.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibrate::ScaleFactor;
use crate::nutrition::{normalize_label, NutritionTable};
use crate::raster::Mask;

#[derive(Debug, thiserror::Error)]
pub enum MeasureError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("top silhouette has zero principal extent")]
    DegenerateExtent,
    #[error("no shape model for food {0:?}")]
    UnknownFood(String),
    #[error("cannot read shape table {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse shape table: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeModel {
    Ellipsoid,
    Column,
    Irregular,
}

impl std::fmt::Display for ShapeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShapeModel::Ellipsoid => "ellipsoid",
            ShapeModel::Column => "column",
            ShapeModel::Irregular => "irregular",
        })
    }
}

impl std::str::FromStr for ShapeModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ellipsoid" => Ok(ShapeModel::Ellipsoid),
            "column" => Ok(ShapeModel::Column),
            "irregular" => Ok(ShapeModel::Irregular),
            other => Err(format!("unknown shape model {other:?}")),
        }
    }
}

/// Foreground measurements of one view, in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub area_px: u64,
    /// `rightmost - leftmost + 1` for each nonempty row, top to bottom.
    pub row_widths: Vec<u32>,
    /// Number of nonempty rows.
    pub height_px: u32,
    pub max_width_px: u32,
    /// Full axis lengths `(major, minor)` of the moment-equivalent ellipse.
    pub principal_extents: (f64, f64),
}

pub fn silhouette_features(mask: &Mask) -> Result<Silhouette, MeasureError> {
    let mut area = 0u64;
    let mut row_widths = Vec::new();
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for y in 0..mask.height() {
        let mut first = None;
        let mut last = 0;
        for x in 0..mask.width() {
            if mask.get(x, y) {
                first.get_or_insert(x);
                last = x;
                area += 1;
                sx += x as f64;
                sy += y as f64;
            }
        }
        if let Some(first) = first {
            row_widths.push(last - first + 1);
        }
    }
    if area == 0 {
        return Err(MeasureError::EmptyMask);
    }
    let n = area as f64;
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let (dx, dy) = (x as f64 - mx, y as f64 - my);
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
        }
    }
    // Each pixel is a unit square, not a point: add its own variance.
    let cxx = sxx / n + 1.0 / 12.0;
    let cyy = syy / n + 1.0 / 12.0;
    let cxy = sxy / n;
    let mean = 0.5 * (cxx + cyy);
    let disc = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
    let (l1, l2) = (mean + disc, (mean - disc).max(0.0));

    Ok(Silhouette {
        area_px: area,
        height_px: row_widths.len() as u32,
        max_width_px: row_widths.iter().copied().max().unwrap_or(0),
        row_widths,
        principal_extents: (4.0 * l1.sqrt(), 4.0 * l2.sqrt()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    /// cm³
    pub volume: f64,
    pub shape_used: ShapeModel,
    /// cm/px
    pub scale_top: f64,
    /// cm/px
    pub scale_side: f64,
}

pub fn estimate_volume(
    top: &Silhouette,
    side: &Silhouette,
    scale_top: ScaleFactor,
    scale_side: ScaleFactor,
    shape: ShapeModel,
) -> Result<VolumeEstimate, MeasureError> {
    if top.area_px == 0 || side.area_px == 0 {
        return Err(MeasureError::EmptyMask);
    }
    let st = scale_top.cm_per_px();
    let ss = scale_side.cm_per_px();
    let height_cm = side.height_px as f64 * ss;
    let (major, minor) = top.principal_extents;

    let volume = match shape {
        ShapeModel::Column => top.area_px as f64 * st * st * height_cm,
        ShapeModel::Ellipsoid => {
            if !(major > 0.0) {
                return Err(MeasureError::DegenerateExtent);
            }
            PI / 6.0 * (major * st) * (minor * st) * height_cm
        }
        ShapeModel::Irregular => {
            if !(major > 0.0) {
                return Err(MeasureError::DegenerateExtent);
            }
            let e = (minor / major).clamp(f64::MIN_POSITIVE, 1.0);
            side.row_widths
                .iter()
                .map(|&w| {
                    let d = w as f64 * ss;
                    PI / 4.0 * d * d * e * ss
                })
                .sum()
        }
    };
    if !(volume > 0.0) {
        return Err(MeasureError::DegenerateExtent);
    }
    Ok(VolumeEstimate {
        volume,
        shape_used: shape,
        scale_top: st,
        scale_side: ss,
    })
}

/// Label → shape model assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTable {
    shapes: BTreeMap<String, ShapeModel>,
}

impl Default for ShapeTable {
    fn default() -> Self {
        Self::from_nutrition(&NutritionTable::builtin())
    }
}

impl ShapeTable {
    pub fn from_nutrition(table: &NutritionTable) -> Self {
        Self {
            shapes: table.iter().map(|s| (s.label.clone(), s.shape)).collect(),
        }
    }

    /// Applies a JSON `{label: "ellipsoid"|"column"|"irregular"}` override file.
    pub fn apply_overrides_from(&mut self, path: &Path) -> Result<(), MeasureError> {
        let text = std::fs::read_to_string(path).map_err(|source| MeasureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let map: BTreeMap<String, ShapeModel> = serde_json::from_str(&text)?;
        self.apply_overrides(map);
        Ok(())
    }

    pub fn apply_overrides(&mut self, map: BTreeMap<String, ShapeModel>) {
        for (label, shape) in map {
            self.shapes.insert(normalize_label(&label), shape);
        }
    }

    pub fn shape_for(&self, label: &str) -> Result<ShapeModel, MeasureError> {
        self.shapes
            .get(&normalize_label(label))
            .copied()
            .ok_or_else(|| MeasureError::UnknownFood(label.to_string()))
    }
}

/// Shape model from the built-in assignment.
pub fn shape_for(label: &str) -> Result<ShapeModel, MeasureError> {
    ShapeTable::default().shape_for(label)
}

impl MeasureError {
    pub fn code(&self) -> &'static str {
        match self {
            MeasureError::EmptyMask => "EmptyMask",
            MeasureError::DegenerateExtent => "DegenerateExtent",
            MeasureError::UnknownFood(_) => "UnknownFood",
            MeasureError::Io { .. } => "Io",
            MeasureError::Parse(_) => "ParseError",
        }
    }
}
