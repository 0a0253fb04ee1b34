//! Food volume and calorie estimation from a top view and a side view,
//! each containing a reference coin.
//!
//! Stages: [`ingest`] loads manifests and images, [`detect`] validates
//! labeled boxes, [`calibrate`] finds the coin and a cm-per-pixel scale,
//! [`segment`] runs GrabCut inside each food box, [`measure`] turns the
//! two silhouettes into a volume, [`nutrition`] converts volume to mass and
//! calories, and [`eval`] scores a dataset. [`pipeline`] wires them together.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod detect;
pub mod eval;
pub mod ingest;
pub mod measure;
pub mod nutrition;
pub mod pipeline;
pub mod raster;
pub mod segment;
pub mod synth;

pub use calibrate::{detect_coin, scale_from_coin, CircleEstimate, ScaleFactor};
pub use detect::{detect, Detection, DetectorProvider, SceneDetections};
pub use ingest::{load_image, load_manifest, ImagePairRecord, Manifest, View};
pub use measure::{estimate_volume, silhouette_features, ShapeModel, Silhouette, VolumeEstimate};
pub use nutrition::{calories_from_volume, CalorieResult, NutritionTable};
pub use raster::{BBox, Image, Mask};
pub use segment::{grabcut_run, GrabCutOptions, GrabCutResult};
