//! Synthetic scenes with known geometry: rasterized coins and orthographic
//! renderings of spheres, cylinders and boxes photographed from the top and
//! from the side, each next to a 25 mm coin.
//!
//! Rasterization is binary (a pixel belongs to a shape when its center
//! does), so a coin of radius `r` px covers ≈ `π r²` pixels and implies
//! exactly `1 / px_per_cm` cm per pixel. Uniform noise is added afterwards
//! so no region is perfectly flat.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::detect::Detection;
use crate::raster::{BBox, Image, Mask};

/// Physical coin radius in cm.
pub const COIN_RADIUS_CM: f64 = 1.25;

pub fn paint(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Image {
    let mut img = Image::filled(width, height, [0, 0, 0]);
    for y in 0..height {
        for x in 0..width {
            img.put(x, y, f(x, y));
        }
    }
    img
}

/// Adds independent uniform noise in `[-amplitude, amplitude]` per channel.
pub fn with_noise(image: &Image, amplitude: u8, seed: u64) -> Image {
    let mut rng = StdRng::seed_from_u64(seed);
    let a = amplitude as i16;
    let data = image
        .as_raw()
        .iter()
        .map(|&v| (v as i16 + rng.gen_range(-a..=a)).clamp(0, 255) as u8)
        .collect();
    Image::from_raw(image.width(), image.height(), data).expect("same size")
}

pub fn fill_mask(image: &mut Image, mask: &Mask, color: [u8; 3]) {
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                image.put(x, y, color);
            }
        }
    }
}

/// Pixels whose centers lie within `r` of `(cx, cy)`.
pub fn disc_mask(width: u32, height: u32, cx: f64, cy: f64, r: f64) -> Mask {
    Mask::from_fn(width, height, |x, y| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
}

/// Pixels whose centers lie in the half-open rectangle `[x0, x1) × [y0, y1)`.
pub fn rect_mask(width: u32, height: u32, x0: f64, y0: f64, x1: f64, y1: f64) -> Mask {
    Mask::from_fn(width, height, |x, y| {
        let (px, py) = (x as f64, y as f64);
        px >= x0 && px < x1 && py >= y0 && py < y1
    })
}

/// A single coin on a plain background.
#[derive(Debug, Clone)]
pub struct CoinScene {
    pub image: Image,
    pub coin_box: BBox,
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

/// Random coin of radius `r` px with random position, colors and contrast.
pub fn coin_scene(r: f64, seed: u64) -> CoinScene {
    let mut rng = StdRng::seed_from_u64(seed);
    let margin = (0.2 * r).round() + 3.0;
    let size = (2.0 * (r + margin) + 40.0).ceil() as u32;
    let cx = rng.gen_range(r + margin + 2.0..size as f64 - r - margin - 2.0).round();
    let cy = rng.gen_range(r + margin + 2.0..size as f64 - r - margin - 2.0).round();
    let bg_level: u8 = rng.gen_range(40..=215);
    let contrast: i16 = rng.gen_range(40..=120) * if rng.gen_bool(0.5) { 1 } else { -1 };
    let coin_level = (bg_level as i16 + contrast).clamp(0, 255) as u8;
    let bg = [bg_level, bg_level.saturating_add(10), bg_level.saturating_sub(10)];
    let coin = [coin_level, coin_level, coin_level.saturating_sub(20)];

    let mut image = Image::filled(size, size, bg);
    fill_mask(&mut image, &disc_mask(size, size, cx, cy, r), coin);
    let image = with_noise(&image, 5, seed ^ 0x5eed);
    let m = margin as i64;
    let ri = r.floor() as i64;
    let coin_box = BBox::new(cx as i64 - ri - m, cy as i64 - ri - m, cx as i64 + ri + m, cy as i64 + ri + m);
    CoinScene {
        image,
        coin_box,
        cx,
        cy,
        r,
    }
}

/// Solid with an analytic volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Solid {
    Sphere { radius_cm: f64 },
    /// Upright cylinder.
    Cylinder { radius_cm: f64, height_cm: f64 },
    /// Axis-aligned box: `width` along x in both views, `depth` into the top
    /// view, `height` up in the side view.
    Cuboid { width_cm: f64, depth_cm: f64, height_cm: f64 },
}

impl Solid {
    pub fn volume_cm3(&self) -> f64 {
        match *self {
            Solid::Sphere { radius_cm } => 4.0 / 3.0 * PI * radius_cm.powi(3),
            Solid::Cylinder { radius_cm, height_cm } => PI * radius_cm * radius_cm * height_cm,
            Solid::Cuboid {
                width_cm,
                depth_cm,
                height_cm,
            } => width_cm * depth_cm * height_cm,
        }
    }

    /// Top-view silhouette extent (x, y) in cm.
    fn top_extent(&self) -> (f64, f64) {
        match *self {
            Solid::Sphere { radius_cm } | Solid::Cylinder { radius_cm, .. } => (2.0 * radius_cm, 2.0 * radius_cm),
            Solid::Cuboid { width_cm, depth_cm, .. } => (width_cm, depth_cm),
        }
    }

    /// Side-view silhouette extent (x, y) in cm.
    fn side_extent(&self) -> (f64, f64) {
        match *self {
            Solid::Sphere { radius_cm } => (2.0 * radius_cm, 2.0 * radius_cm),
            Solid::Cylinder { radius_cm, height_cm } => (2.0 * radius_cm, height_cm),
            Solid::Cuboid { width_cm, height_cm, .. } => (width_cm, height_cm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    Top,
    Side,
}

/// Rendering parameters for one view.
#[derive(Debug, Clone, Copy)]
pub struct ViewSetup {
    pub px_per_cm: f64,
    pub background: [u8; 3],
    pub food_color: [u8; 3],
    pub coin_color: [u8; 3],
    pub noise: u8,
    pub seed: u64,
    /// Whether to draw the coin at all.
    pub with_coin: bool,
}

impl ViewSetup {
    pub fn new(px_per_cm: f64, seed: u64) -> Self {
        Self {
            px_per_cm,
            background: [235, 232, 225],
            food_color: [190, 40, 35],
            coin_color: [150, 150, 155],
            noise: 6,
            seed,
            with_coin: true,
        }
    }
}

/// One rendered view with its ground truth.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub image: Image,
    pub food_mask: Mask,
    pub food_box: BBox,
    pub coin_box: Option<BBox>,
    pub coin_radius_px: f64,
}

impl RenderedView {
    /// Annotation boxes as a dataset would carry them.
    pub fn annotations(&self, label: &str) -> Vec<Detection> {
        let mut out = Vec::new();
        if let Some(b) = self.coin_box {
            out.push(Detection::new("coin", b, 1.0));
        }
        out.push(Detection::new(label, self.food_box, 1.0));
        out
    }
}

/// Orthographic rendering of `solid` in `view`: coin on the left, food on
/// the right.
pub fn render_view(solid: &Solid, view: ViewKind, setup: &ViewSetup) -> RenderedView {
    let ppc = setup.px_per_cm;
    let (ex, ey) = match view {
        ViewKind::Top => solid.top_extent(),
        ViewKind::Side => solid.side_extent(),
    };
    let (fw, fh) = (ex * ppc, ey * ppc);
    let coin_r = COIN_RADIUS_CM * ppc;
    let pad = (0.6 * ppc).max(24.0);
    let width = (pad + 2.0 * coin_r + pad + fw + pad).ceil() as u32;
    let height = (fh.max(2.0 * coin_r) + 2.0 * pad).ceil() as u32;

    let mut image = Image::filled(width, height, setup.background);
    let ccx = (pad + coin_r).round();
    let ccy = (height as f64 / 2.0).round();
    let coin_box = setup.with_coin.then(|| {
        fill_mask(&mut image, &disc_mask(width, height, ccx, ccy, coin_r), setup.coin_color);
        let ri = coin_r.floor() as i64;
        BBox::new(ccx as i64 - ri - 3, ccy as i64 - ri - 3, ccx as i64 + ri + 3, ccy as i64 + ri + 3)
    });

    let fx0 = (pad + 2.0 * coin_r + pad).round();
    let fcy = height as f64 / 2.0;
    let food_mask = match (solid, view) {
        (Solid::Sphere { .. }, _) | (Solid::Cylinder { .. }, ViewKind::Top) => {
            let r = fw / 2.0;
            disc_mask(width, height, fx0 + r, fcy, r)
        }
        _ => rect_mask(width, height, fx0, fcy - fh / 2.0, fx0 + fw, fcy + fh / 2.0),
    };
    fill_mask(&mut image, &food_mask, setup.food_color);
    let image = with_noise(&image, setup.noise, setup.seed);
    let margin = (0.15 * fw.min(fh)).round().max(6.0) as i64;
    let food_box = food_mask
        .bounding_box()
        .expect("food is visible")
        .expand(margin)
        .clip(width, height)
        .expect("inside image");
    RenderedView {
        image,
        food_mask,
        food_box,
        coin_box,
        coin_radius_px: coin_r,
    }
}

/// A top/side pair of one solid.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub pair_id: String,
    pub label: String,
    pub solid: Solid,
    pub top: RenderedView,
    pub side: RenderedView,
}

impl SyntheticPair {
    pub fn new(pair_id: &str, label: &str, solid: Solid, top: &ViewSetup, side: &ViewSetup) -> Self {
        Self {
            pair_id: pair_id.to_string(),
            label: label.to_string(),
            solid,
            top: render_view(&solid, ViewKind::Top, top),
            side: render_view(&solid, ViewKind::Side, side),
        }
    }

    pub fn true_volume_cm3(&self) -> f64 {
        self.solid.volume_cm3()
    }
}

/// Writes PNGs and a manifest for `pairs` under `dir`. Returns the manifest path.
pub fn write_dataset(dir: &Path, pairs: &[SyntheticPair], density: impl Fn(&str) -> Option<f64>) -> std::io::Result<PathBuf> {
    use crate::ingest::{AnnotationSet, BoxRecord, ManifestFile, RecordFile};

    std::fs::create_dir_all(dir.join("images"))?;
    let mut records = Vec::new();
    for p in pairs {
        let top = format!("images/{}_top.png", p.pair_id);
        let side = format!("images/{}_side.png", p.pair_id);
        let save = |img: &Image, rel: &str| {
            img.to_rgb_image()
                .save(dir.join(rel))
                .map_err(|e| std::io::Error::other(e.to_string()))
        };
        save(&p.top.image, &top)?;
        save(&p.side.image, &side)?;
        let volume = p.true_volume_cm3();
        let boxes = |v: &RenderedView| v.annotations(&p.label).iter().map(BoxRecord::from).collect();
        records.push(RecordFile {
            pair_id: p.pair_id.clone(),
            food_label: p.label.clone(),
            top_image: top,
            side_image: side,
            true_volume_cm3: Some(volume),
            true_mass_g: density(&p.label).map(|d| d * volume),
            annotations: AnnotationSet {
                top: boxes(&p.top),
                side: boxes(&p.side),
            },
        });
    }
    let manifest = ManifestFile {
        dataset_root: ".".into(),
        records,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}
