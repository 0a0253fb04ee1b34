//! Dataset manifest and image loading.
//!
//! A manifest is one JSON file:
//!
//! ```json
//! {"dataset_root": "data",
//!  "records": [{"pair_id": "apple001", "food_label": "apple",
//!               "top_image": "apple001T.png", "side_image": "apple001S.png",
//!               "true_volume_cm3": 210.0, "true_mass_g": 163.8,
//!               "annotations": {"top": [{"label": "coin", "xmin": 10, "ymin": 12, "xmax": 60, "ymax": 62}],
//!                               "side": []}}]}
//! ```
//!
//! Image paths are relative to `dataset_root`, which is itself relative to
//! the manifest file. Box coordinates are inclusive pixel indices.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::Detection;
use crate::nutrition::is_dataset_label;
use crate::raster::{BBox, Image, MIN_IMAGE_SIDE};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} invalid record(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvariantViolation(Vec<RecordViolation>),
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("image {path} is {width}x{height}, below the {MIN_IMAGE_SIDE} px minimum")]
    TooSmall { path: PathBuf, width: u32, height: u32 },
    #[error("invalid annotation file: {0}")]
    Annotation(String),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::MissingFile(_) => "MissingFile",
            IngestError::Io { .. } => "Io",
            IngestError::Parse { .. } => "ParseError",
            IngestError::InvariantViolation(_) => "InvariantViolation",
            IngestError::Decode { .. } => "DecodeError",
            IngestError::TooSmall { .. } => "TooSmall",
            IngestError::Annotation(_) => "AnnotationError",
        }
    }
}

/// One rejected record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordViolation {
    pub pair_id: String,
    pub reason: String,
}

impl std::fmt::Display for RecordViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.pair_id, self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Top,
    Side,
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            View::Top => "top",
            View::Side => "side",
        })
    }
}

/// A top/side photograph pair of one serving.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePairRecord {
    pub pair_id: String,
    pub food_label: String,
    /// Relative to the dataset root.
    pub top_image: PathBuf,
    pub side_image: PathBuf,
    pub annotations_top: Vec<Detection>,
    pub annotations_side: Vec<Detection>,
    /// cm³, drainage-measured.
    pub true_volume: Option<f64>,
    /// g
    pub true_mass: Option<f64>,
}

impl ImagePairRecord {
    pub fn annotations(&self, view: View) -> &[Detection] {
        match view {
            View::Top => &self.annotations_top,
            View::Side => &self.annotations_side,
        }
    }

    pub fn image(&self, view: View) -> &Path {
        match view {
            View::Top => &self.top_image,
            View::Side => &self.side_image,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Absolute or manifest-relative root, already resolved.
    pub dataset_root: PathBuf,
    pub records: Vec<ImagePairRecord>,
}

impl Manifest {
    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.dataset_root.join(relative)
    }

    pub fn image_path(&self, record: &ImagePairRecord, view: View) -> PathBuf {
        self.resolve(record.image(view))
    }

    pub fn to_file(&self) -> ManifestFile {
        ManifestFile {
            dataset_root: self.dataset_root.to_string_lossy().into_owned(),
            records: self.records.iter().map(RecordFile::from).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("manifest serializes")
    }
}

/// On-disk manifest layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub dataset_root: String,
    pub records: Vec<RecordFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordFile {
    pub pair_id: String,
    pub food_label: String,
    pub top_image: String,
    pub side_image: String,
    #[serde(default)]
    pub true_volume_cm3: Option<f64>,
    #[serde(default)]
    pub true_mass_g: Option<f64>,
    #[serde(default)]
    pub annotations: AnnotationSet,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    #[serde(default)]
    pub top: Vec<BoxRecord>,
    #[serde(default)]
    pub side: Vec<BoxRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub label: String,
    pub xmin: i64,
    pub ymin: i64,
    pub xmax: i64,
    pub ymax: i64,
}

impl From<&Detection> for BoxRecord {
    fn from(d: &Detection) -> Self {
        BoxRecord {
            label: d.label.clone(),
            xmin: d.bbox.xmin,
            ymin: d.bbox.ymin,
            xmax: d.bbox.xmax,
            ymax: d.bbox.ymax,
        }
    }
}

impl From<&BoxRecord> for Detection {
    fn from(b: &BoxRecord) -> Self {
        Detection::new(&b.label, BBox::new(b.xmin, b.ymin, b.xmax, b.ymax), 1.0)
    }
}

impl From<&ImagePairRecord> for RecordFile {
    fn from(r: &ImagePairRecord) -> Self {
        RecordFile {
            pair_id: r.pair_id.clone(),
            food_label: r.food_label.clone(),
            top_image: r.top_image.to_string_lossy().into_owned(),
            side_image: r.side_image.to_string_lossy().into_owned(),
            true_volume_cm3: r.true_volume,
            true_mass_g: r.true_mass,
            annotations: AnnotationSet {
                top: r.annotations_top.iter().map(BoxRecord::from).collect(),
                side: r.annotations_side.iter().map(BoxRecord::from).collect(),
            },
        }
    }
}

/// Parses and validates a manifest. Any invalid record fails the whole load
/// and every offending record is listed.
pub fn load_manifest(path: &Path) -> Result<Manifest, IngestError> {
    if !path.is_file() {
        return Err(IngestError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ManifestFile = serde_json::from_str(&text).map_err(|e| IngestError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest_from_file(file, base)
}

/// Validates an in-memory manifest; relative roots resolve against `base`.
pub fn manifest_from_file(file: ManifestFile, base: &Path) -> Result<Manifest, IngestError> {
    let dataset_root = base.join(&file.dataset_root);
    let mut seen = HashSet::new();
    let mut violations = Vec::new();
    let mut records = Vec::with_capacity(file.records.len());

    for r in file.records {
        let mut reject = |reason: String| {
            violations.push(RecordViolation {
                pair_id: r.pair_id.clone(),
                reason,
            })
        };
        if r.pair_id.trim().is_empty() {
            reject("empty pair_id".into());
        }
        if !seen.insert(r.pair_id.clone()) {
            reject("duplicate".into());
        }
        if !is_dataset_label(&r.food_label) {
            reject(format!("unknown food label {:?}", r.food_label));
        }
        match r.true_volume_cm3 {
            Some(v) if !(v > 0.0 && v.is_finite()) => reject("nonpositive volume".into()),
            _ => {}
        }
        match r.true_mass_g {
            Some(m) if !(m > 0.0 && m.is_finite()) => reject("nonpositive mass".into()),
            _ => {}
        }
        let top = dataset_root.join(&r.top_image);
        let side = dataset_root.join(&r.side_image);
        if top == side {
            reject("top and side images are the same file".into());
        }
        for p in [&top, &side] {
            if !p.is_file() {
                reject(format!("missing image {}", p.display()));
            }
        }
        for (view, boxes) in [("top", &r.annotations.top), ("side", &r.annotations.side)] {
            for b in boxes {
                if b.xmin >= b.xmax || b.ymin >= b.ymax {
                    reject(format!("degenerate {view} box for {:?}", b.label));
                }
            }
        }
        records.push(ImagePairRecord {
            annotations_top: r.annotations.top.iter().map(Detection::from).collect(),
            annotations_side: r.annotations.side.iter().map(Detection::from).collect(),
            pair_id: r.pair_id,
            food_label: r.food_label,
            top_image: PathBuf::from(r.top_image),
            side_image: PathBuf::from(r.side_image),
            true_volume: r.true_volume_cm3,
            true_mass: r.true_mass_g,
        });
    }
    if !violations.is_empty() {
        return Err(IngestError::InvariantViolation(violations));
    }
    Ok(Manifest { dataset_root, records })
}

/// Decodes a PNG or JPEG, applying any EXIF orientation.
pub fn load_image(path: &Path) -> Result<Image, IngestError> {
    if !path.is_file() {
        return Err(IngestError::MissingFile(path.to_path_buf()));
    }
    let decode_err = |e: image::ImageError| IngestError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let reader = image::ImageReader::open(path)
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    match reader.format() {
        Some(image::ImageFormat::Png | image::ImageFormat::Jpeg) => {}
        other => {
            return Err(IngestError::Decode {
                path: path.to_path_buf(),
                message: format!("unsupported format {other:?}, expected PNG or JPEG"),
            })
        }
    }
    let mut decoder = reader.into_decoder().map_err(decode_err)?;
    use image::ImageDecoder;
    let orientation = decoder.orientation().unwrap_or(image::metadata::Orientation::NoTransforms);
    let mut img = image::DynamicImage::from_decoder(decoder).map_err(decode_err)?;
    img.apply_orientation(orientation);
    let rgb = img.into_rgb8();
    let (width, height) = rgb.dimensions();
    if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
        return Err(IngestError::TooSmall {
            path: path.to_path_buf(),
            width,
            height,
        });
    }
    Ok(Image::from_rgb_image(rgb))
}

/// Pascal-VOC style per-image XML annotations (`<object><name>` plus
/// `<bndbox><xmin>…`), the packaging of the public dataset release.
pub mod voc {
    use super::*;

    /// Boxes in an annotation document. Coordinates are taken verbatim and
    /// rounded when written as decimals.
    pub fn parse_voc(xml: &str) -> Result<Vec<Detection>, IngestError> {
        let doc = roxmltree::Document::parse(xml).map_err(|e| IngestError::Annotation(e.to_string()))?;
        let child_text = |n: roxmltree::Node, name: &str| {
            n.children()
                .find(|c| c.has_tag_name(name))
                .and_then(|c| c.text())
                .map(str::trim)
                .map(str::to_string)
        };
        let mut out = Vec::new();
        for obj in doc.descendants().filter(|n| n.has_tag_name("object")) {
            let name = child_text(obj, "name").ok_or_else(|| IngestError::Annotation("object without <name>".into()))?;
            let bnd = obj
                .children()
                .find(|c| c.has_tag_name("bndbox"))
                .ok_or_else(|| IngestError::Annotation(format!("object {name:?} without <bndbox>")))?;
            let coord = |tag: &str| -> Result<i64, IngestError> {
                let s = child_text(bnd, tag).ok_or_else(|| IngestError::Annotation(format!("missing <{tag}> for {name:?}")))?;
                s.parse::<f64>()
                    .map(|v| v.round() as i64)
                    .map_err(|_| IngestError::Annotation(format!("bad <{tag}> value {s:?}")))
            };
            let bbox = BBox::new(coord("xmin")?, coord("ymin")?, coord("xmax")?, coord("ymax")?);
            out.push(Detection::new(&name, bbox, 1.0));
        }
        Ok(out)
    }

    /// Builds a manifest record from two XML annotation files.
    #[allow(clippy::too_many_arguments)]
    pub fn record_from_voc(
        pair_id: &str,
        food_label: &str,
        top_image: &str,
        side_image: &str,
        top_xml: &Path,
        side_xml: &Path,
        true_volume_cm3: Option<f64>,
        true_mass_g: Option<f64>,
    ) -> Result<RecordFile, IngestError> {
        let read = |p: &Path| -> Result<Vec<BoxRecord>, IngestError> {
            let text = std::fs::read_to_string(p).map_err(|_| IngestError::MissingFile(p.to_path_buf()))?;
            Ok(parse_voc(&text)?.iter().map(BoxRecord::from).collect())
        };
        Ok(RecordFile {
            pair_id: pair_id.into(),
            food_label: food_label.into(),
            top_image: top_image.into(),
            side_image: side_image.into(),
            true_volume_cm3,
            true_mass_g,
            annotations: AnnotationSet {
                top: read(top_xml)?,
                side: read(side_xml)?,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, w: u32, h: u32) {
        image::RgbImage::from_pixel(w, h, image::Rgb([10, 20, 30])).save(path).unwrap();
    }

    fn fixture(dir: &Path, records: &str) -> PathBuf {
        for name in ["a_top.png", "a_side.png", "b_top.png", "b_side.png"] {
            write_png(&dir.join(name), 40, 40);
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, format!(r#"{{"dataset_root": ".", "records": [{records}]}}"#)).unwrap();
        path
    }

    const A: &str = r#"{"pair_id": "apple001", "food_label": "apple", "top_image": "a_top.png", "side_image": "a_side.png",
        "true_volume_cm3": 210.0, "true_mass_g": 163.8,
        "annotations": {"top": [{"label": "coin", "xmin": 1, "ymin": 1, "xmax": 10, "ymax": 10}], "side": []}}"#;
    const B: &str = r#"{"pair_id": "banana001", "food_label": "banana", "top_image": "b_top.png", "side_image": "b_side.png",
        "true_volume_cm3": null, "true_mass_g": null, "annotations": {"top": [], "side": []}}"#;

    #[test]
    fn loads_valid_records() {
        let dir = tempfile::tempdir().unwrap();
        let m = load_manifest(&fixture(dir.path(), &format!("{A},{B}"))).unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.records[0].true_volume, Some(210.0));
        assert_eq!(m.records[0].annotations_top[0].bbox, BBox::new(1, 1, 10, 10));
        assert_eq!(m.records[1].true_volume, None);
    }

    #[test]
    fn rejects_duplicates_and_bad_volumes() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_manifest(&fixture(dir.path(), &format!("{A},{A}"))).unwrap_err();
        match err {
            IngestError::InvariantViolation(v) => assert_eq!(
                v,
                vec![RecordViolation {
                    pair_id: "apple001".into(),
                    reason: "duplicate".into()
                }]
            ),
            e => panic!("{e}"),
        }
        let bad = A.replace("210.0", "-5");
        let err = load_manifest(&fixture(dir.path(), &bad)).unwrap_err();
        assert!(matches!(err, IngestError::InvariantViolation(ref v) if v[0].reason == "nonpositive volume"));
    }

    #[test]
    fn every_rejection_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let a = A.replace("\"apple\"", "\"pizza\"");
        let b = B.replace("b_side.png", "b_top.png");
        let err = load_manifest(&fixture(dir.path(), &format!("{a},{b}"))).unwrap_err();
        let IngestError::InvariantViolation(v) = err else { panic!() };
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].pair_id, "apple001");
        assert_eq!(v[1].pair_id, "banana001");
    }

    #[test]
    fn missing_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_manifest(&dir.path().join("nope.json")), Err(IngestError::MissingFile(_))));
        let p = dir.path().join("m.json");
        std::fs::write(&p, "{\"dataset_root\": \".\",\n \"records\": [ {\"pair_id\": 3} ]}").unwrap();
        assert!(matches!(load_manifest(&p), Err(IngestError::Parse { line: 2, .. })));
    }

    #[test]
    fn image_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        write_png(&p, 640, 480);
        let img = load_image(&p).unwrap();
        assert_eq!((img.width(), img.height()), (640, 480));

        write_png(&p, 16, 16);
        assert!(matches!(load_image(&p), Err(IngestError::TooSmall { .. })));

        let j = dir.path().join("x.jpg");
        image::RgbImage::from_pixel(64, 64, image::Rgb([200, 10, 10])).save(&j).unwrap();
        let bytes = std::fs::read(&j).unwrap();
        std::fs::write(&j, &bytes[..bytes.len() / 3]).unwrap();
        assert!(matches!(load_image(&j), Err(IngestError::Decode { .. })));
        assert!(matches!(load_image(&dir.path().join("none.png")), Err(IngestError::MissingFile(_))));
    }

    #[test]
    fn voc_boxes() {
        let xml = r#"<annotation><filename>apple001T(1).JPG</filename>
            <object><name>apple</name><bndbox><xmin>120</xmin><ymin>80</ymin><xmax>300.0</xmax><ymax>260</ymax></bndbox></object>
            <object><name>coin</name><bndbox><xmin>20</xmin><ymin>30</ymin><xmax>70</xmax><ymax>80</ymax></bndbox></object>
            </annotation>"#;
        let boxes = voc::parse_voc(xml).unwrap();
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes[0].label, "apple");
        assert_eq!(boxes[0].bbox, BBox::new(120, 80, 300, 260));
        assert!(voc::parse_voc("<annotation><object><name>x</name></object></annotation>").is_err());
    }
}
