//! Coin localization with a gradient-directed circular Hough transform and
//! the conversion of the coin's known diameter into centimeters per pixel.
//!
//! Detection runs only inside the coin's detection box:
//!
//! 1. luma conversion and 3×3 Sobel gradients,
//! 2. edge pixels = gradient magnitude at or above the box's 80th percentile,
//! 3. every edge pixel votes into a `(cx, cy, r)` accumulator with 1 px bins,
//!    along its gradient direction in both senses (bright or dark coins),
//! 4. local maxima of the radius-normalized accumulator (3×3×3 neighborhood)
//!    become candidates, ranked by perimeter coverage, larger radius first on
//!    ties,
//! 5. the winner is refined by a weighted algebraic circle fit over the edge
//!    pixels in a ±2 px band around it.

use serde::{Deserialize, Serialize};

use crate::raster::{BBox, Image};

/// Default minimum perimeter coverage for accepting a circle.
pub const DEFAULT_MIN_SUPPORT: f64 = 0.4;
/// Smallest coin box side the transform accepts.
pub const MIN_COIN_BOX_SIDE: i64 = 16;
/// Radius search range as fractions of the box's shorter side.
pub const RADIUS_RATIO: (f64, f64) = (0.25, 0.6);
const EDGE_PERCENTILE: f64 = 0.8;
/// Candidates scoring below this fraction of the best accumulator peak are ignored.
const CANDIDATE_FRACTION: f64 = 0.5;
const MAX_CANDIDATES: usize = 64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CalibrateError {
    #[error("no circle found (best support {support:.3} below {min_support})")]
    NoCircle { support: f64, min_support: f64 },
    #[error("coin box {0} is smaller than {MIN_COIN_BOX_SIDE} px on a side")]
    BoxTooSmall(BBox),
    #[error("coin box {0} lies outside the image")]
    BoxOutsideImage(BBox),
    #[error("invalid scale {0} cm/px")]
    InvalidScale(f64),
    #[error("invalid circle radius {0}")]
    InvalidCircle(f64),
}

/// A detected circle in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleEstimate {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
    /// Fraction of the perimeter backed by edge pixels, in `[0, 1]`.
    pub support: f64,
}

/// Centimeters per pixel for one view.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "ScaleRepr", into = "ScaleRepr")]
pub struct ScaleFactor(f64);

#[derive(Serialize, Deserialize)]
struct ScaleRepr {
    cm_per_px: f64,
}

impl TryFrom<ScaleRepr> for ScaleFactor {
    type Error = CalibrateError;

    fn try_from(r: ScaleRepr) -> Result<Self, Self::Error> {
        ScaleFactor::new(r.cm_per_px)
    }
}

impl From<ScaleFactor> for ScaleRepr {
    fn from(s: ScaleFactor) -> Self {
        ScaleRepr { cm_per_px: s.0 }
    }
}

impl ScaleFactor {
    pub fn new(cm_per_px: f64) -> Result<Self, CalibrateError> {
        if cm_per_px.is_finite() && cm_per_px > 0.0 {
            Ok(Self(cm_per_px))
        } else {
            Err(CalibrateError::InvalidScale(cm_per_px))
        }
    }

    pub fn cm_per_px(self) -> f64 {
        self.0
    }
}

/// Physical size of the calibration object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    /// One Yuan coin, 25.0 mm.
    pub coin_diameter_cm: f64,
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        Self {
            coin_diameter_cm: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughOptions {
    pub min_support: f64,
}

impl Default for HoughOptions {
    fn default() -> Self {
        Self {
            min_support: DEFAULT_MIN_SUPPORT,
        }
    }
}

pub fn scale_from_coin(
    circle: &CircleEstimate,
    constants: &CalibrationConstants,
) -> Result<ScaleFactor, CalibrateError> {
    if !(circle.r > 0.0) || !circle.r.is_finite() {
        return Err(CalibrateError::InvalidCircle(circle.r));
    }
    ScaleFactor::new(constants.coin_diameter_cm / (2.0 * circle.r))
}

/// Edge pixels of the search box with unit gradient directions.
struct EdgeMap {
    bbox: BBox,
    w: usize,
    h: usize,
    is_edge: Vec<bool>,
    edges: Vec<Edge>,
}

#[derive(Clone, Copy)]
struct Edge {
    x: f64,
    y: f64,
    ux: f64,
    uy: f64,
    mag: f64,
}

impl EdgeMap {
    fn build(image: &Image, bbox: BBox) -> Self {
        let (iw, ih) = (image.width() as i64, image.height() as i64);
        // luma over the box plus a one-pixel clamped border
        let gray_at = {
            let gx0 = (bbox.xmin - 1).max(0);
            let gy0 = (bbox.ymin - 1).max(0);
            let gx1 = (bbox.xmax + 1).min(iw - 1);
            let gy1 = (bbox.ymax + 1).min(ih - 1);
            let gw = (gx1 - gx0 + 1) as usize;
            let mut g = Vec::with_capacity(gw * (gy1 - gy0 + 1) as usize);
            for y in gy0..=gy1 {
                for x in gx0..=gx1 {
                    let [r, gr, b] = image.get(x as u32, y as u32);
                    g.push(0.299 * r as f64 + 0.587 * gr as f64 + 0.114 * b as f64);
                }
            }
            move |x: i64, y: i64| {
                let x = x.clamp(gx0, gx1);
                let y = y.clamp(gy0, gy1);
                g[(y - gy0) as usize * gw + (x - gx0) as usize]
            }
        };

        let w = bbox.width() as usize;
        let h = bbox.height() as usize;
        let mut grads = Vec::with_capacity(w * h);
        for y in bbox.ymin..=bbox.ymax {
            for x in bbox.xmin..=bbox.xmax {
                let p = |dx: i64, dy: i64| gray_at(x + dx, y + dy);
                let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
                let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
                grads.push((gx, gy, gx.hypot(gy)));
            }
        }

        let mut mags: Vec<f64> = grads.iter().map(|g| g.2).collect();
        mags.sort_by(f64::total_cmp);
        let threshold = mags[((mags.len() - 1) as f64 * EDGE_PERCENTILE).floor() as usize].max(1e-9);

        let mut is_edge = vec![false; w * h];
        let mut edges = Vec::new();
        for (i, &(gx, gy, mag)) in grads.iter().enumerate() {
            if mag >= threshold {
                is_edge[i] = true;
                edges.push(Edge {
                    x: (bbox.xmin + (i % w) as i64) as f64,
                    y: (bbox.ymin + (i / w) as i64) as f64,
                    ux: gx / mag,
                    uy: gy / mag,
                    mag,
                });
            }
        }
        Self {
            bbox,
            w,
            h,
            is_edge,
            edges,
        }
    }

    fn edge_near(&self, x: i64, y: i64) -> bool {
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (lx, ly) = (x + dx - self.bbox.xmin, y + dy - self.bbox.ymin);
                if lx >= 0 && ly >= 0 && (lx as usize) < self.w && (ly as usize) < self.h && self.is_edge[ly as usize * self.w + lx as usize] {
                    return true;
                }
            }
        }
        false
    }

    /// Fraction of perimeter samples with an edge pixel within one pixel.
    fn coverage(&self, cx: f64, cy: f64, r: f64) -> f64 {
        let n = ((2.0 * std::f64::consts::PI * r).round() as usize).max(16);
        let hits = (0..n)
            .filter(|&k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                self.edge_near((cx + r * t.cos()).round() as i64, (cy + r * t.sin()).round() as i64)
            })
            .count();
        hits as f64 / n as f64
    }
}

struct Accumulator {
    w: usize,
    h: usize,
    r_min: usize,
    nr: usize,
    votes: Vec<u32>,
}

impl Accumulator {
    fn idx(&self, ri: usize, y: usize, x: usize) -> usize {
        (ri * self.h + y) * self.w + x
    }

    fn score(&self, i: usize) -> f64 {
        let r = self.r_min + i / (self.w * self.h);
        self.votes[i] as f64 / (2.0 * std::f64::consts::PI * r as f64)
    }
}

fn vote(edges: &EdgeMap, r_min: usize, r_max: usize) -> Accumulator {
    let (w, h) = (edges.w, edges.h);
    let nr = r_max - r_min + 1;
    let mut acc = Accumulator {
        w,
        h,
        r_min,
        nr,
        votes: vec![0; w * h * nr],
    };
    let (x0, y0) = (edges.bbox.xmin as f64, edges.bbox.ymin as f64);
    for e in &edges.edges {
        for ri in 0..nr {
            let r = (r_min + ri) as f64;
            for sign in [1.0, -1.0] {
                let cx = (e.x + sign * r * e.ux - x0).round();
                let cy = (e.y + sign * r * e.uy - y0).round();
                if cx >= 0.0 && cy >= 0.0 && (cx as usize) < w && (cy as usize) < h {
                    let i = acc.idx(ri, cy as usize, cx as usize);
                    acc.votes[i] += 1;
                }
            }
        }
    }
    acc
}

/// Local maxima over the 3×3×3 neighborhood, best normalized score first.
fn peaks(acc: &Accumulator) -> Vec<(usize, usize, usize, f64)> {
    let mut out = Vec::new();
    for ri in 0..acc.nr {
        for y in 0..acc.h {
            for x in 0..acc.w {
                let i = acc.idx(ri, y, x);
                if acc.votes[i] == 0 {
                    continue;
                }
                let s = acc.score(i);
                let mut is_peak = true;
                'n: for dr in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (r2, y2, x2) = (ri as i64 + dr, y as i64 + dy, x as i64 + dx);
                            if (dr, dy, dx) == (0, 0, 0)
                                || r2 < 0
                                || y2 < 0
                                || x2 < 0
                                || r2 as usize >= acc.nr
                                || y2 as usize >= acc.h
                                || x2 as usize >= acc.w
                            {
                                continue;
                            }
                            if acc.score(acc.idx(r2 as usize, y2 as usize, x2 as usize)) > s {
                                is_peak = false;
                                break 'n;
                            }
                        }
                    }
                }
                if is_peak {
                    out.push((ri, y, x, s));
                }
            }
        }
    }
    out.sort_by(|a, b| b.3.total_cmp(&a.3).then((a.0, a.1, a.2).cmp(&(b.0, b.1, b.2))));
    out
}

/// Weighted algebraic circle fit over edge pixels near `(cx, cy, r)` whose
/// gradient is roughly radial.
fn refine(edges: &EdgeMap, cx: f64, cy: f64, r: f64) -> Option<(f64, f64, f64)> {
    // solve for (a, b, c) in x² + y² + a x + b y + c = 0
    let mut m = [[0.0f64; 3]; 3];
    let mut v = [0.0f64; 3];
    let mut count = 0usize;
    for e in &edges.edges {
        let (dx, dy) = (e.x - cx, e.y - cy);
        let d = dx.hypot(dy);
        if d < 1e-9 || (d - r).abs() > 2.0 || ((e.ux * dx + e.uy * dy) / d).abs() < 0.7 {
            continue;
        }
        // local coordinates keep the normal equations well conditioned
        let (x, y, wgt) = (dx, dy, e.mag);
        let row = [x, y, 1.0];
        let rhs = -(x * x + y * y);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += wgt * row[i] * row[j];
            }
            v[i] += wgt * row[i] * rhs;
        }
        count += 1;
    }
    if count < 8 {
        return None;
    }
    let sol = solve3(m, v)?;
    let (ox, oy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let rr = ox * ox + oy * oy - sol[2];
    (rr > 0.0).then(|| (cx + ox, cy + oy, rr.sqrt()))
}

fn solve3(m: [[f64; 3]; 3], v: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = v[i];
        }
        *o = det(mk) / d;
    }
    Some(out)
}

/// Finds the coin circle inside `bbox`.
pub fn detect_coin(image: &Image, bbox: BBox, options: &HoughOptions) -> Result<CircleEstimate, CalibrateError> {
    if !bbox.is_proper() || !bbox.within(image.width(), image.height()) {
        return Err(CalibrateError::BoxOutsideImage(bbox));
    }
    let side = bbox.min_side();
    if side < MIN_COIN_BOX_SIDE {
        return Err(CalibrateError::BoxTooSmall(bbox));
    }
    let r_min = (RADIUS_RATIO.0 * side as f64).ceil() as usize;
    let r_max = (RADIUS_RATIO.1 * side as f64).floor() as usize;

    let edges = EdgeMap::build(image, bbox);
    let no_circle = |support| CalibrateError::NoCircle {
        support,
        min_support: options.min_support,
    };
    if edges.edges.is_empty() {
        return Err(no_circle(0.0));
    }

    let acc = vote(&edges, r_min, r_max);
    let peaks = peaks(&acc);
    let Some(best_score) = peaks.first().map(|p| p.3) else {
        return Err(no_circle(0.0));
    };

    let (x0, y0) = (bbox.xmin as f64, bbox.ymin as f64);
    let mut candidates: Vec<CircleEstimate> = peaks
        .iter()
        .take_while(|p| p.3 >= CANDIDATE_FRACTION * best_score)
        .take(MAX_CANDIDATES)
        .map(|&(ri, y, x, _)| {
            let (cx, cy, r) = (x0 + x as f64, y0 + y as f64, (r_min + ri) as f64);
            CircleEstimate {
                cx,
                cy,
                r,
                support: edges.coverage(cx, cy, r),
            }
        })
        .collect();
    // highest coverage first; ties go to the larger radius
    const TIE: f64 = 1e-9;
    candidates.sort_by(|a, b| {
        if (a.support - b.support).abs() <= TIE {
            b.r.total_cmp(&a.r)
        } else {
            b.support.total_cmp(&a.support)
        }
    });
    let best = candidates[0];

    let refined = refine(&edges, best.cx, best.cy, best.r)
        .filter(|&(cx, cy, r)| bbox.contains_f(cx, cy) && (r - best.r).abs() <= 2.0)
        .map(|(cx, cy, r)| CircleEstimate {
            cx,
            cy,
            r,
            support: edges.coverage(cx, cy, r),
        })
        .filter(|c| c.support + TIE >= best.support || c.support >= options.min_support);
    let circle = refined.unwrap_or(best);

    if circle.support < options.min_support {
        return Err(no_circle(circle.support));
    }
    Ok(circle)
}

impl CalibrateError {
    pub fn code(&self) -> &'static str {
        match self {
            CalibrateError::NoCircle { .. } => "NoCircle",
            CalibrateError::BoxTooSmall(_) => "BoxTooSmall",
            CalibrateError::BoxOutsideImage(_) => "BoxOutsideImage",
            CalibrateError::InvalidScale(_) => "InvalidScale",
            CalibrateError::InvalidCircle(_) => "InvalidCircle",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Midpoint circle outline.
    fn draw_circle(img: &mut Image, cx: i64, cy: i64, r: i64, color: [u8; 3]) {
        let (mut x, mut y, mut err) = (r, 0i64, 1 - r);
        while x >= y {
            for (px, py) in [(x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)] {
                img.put((cx + px) as u32, (cy + py) as u32, color);
            }
            y += 1;
            if err < 0 {
                err += 2 * y + 1;
            } else {
                x -= 1;
                err += 2 * (y - x) + 1;
            }
        }
    }

    #[test]
    fn scale_formula() {
        let c = CalibrationConstants::default();
        for (r, expect) in [(50.0, 0.025), (125.0, 0.010), (12.5, 0.100)] {
            let circle = CircleEstimate {
                cx: 0.0,
                cy: 0.0,
                r,
                support: 1.0,
            };
            let s = scale_from_coin(&circle, &c).unwrap();
            assert!((s.cm_per_px() - expect).abs() < 1e-15);
        }
        let bad = CircleEstimate {
            cx: 0.0,
            cy: 0.0,
            r: 0.0,
            support: 1.0,
        };
        assert!(scale_from_coin(&bad, &c).is_err());
    }

    #[test]
    fn scale_is_monotone_in_radius() {
        let c = CalibrationConstants::default();
        let mut prev = f64::INFINITY;
        for r in 1..200 {
            let s = scale_from_coin(
                &CircleEstimate {
                    cx: 0.0,
                    cy: 0.0,
                    r: r as f64,
                    support: 1.0,
                },
                &c,
            )
            .unwrap()
            .cm_per_px();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn finds_midpoint_outline() {
        let mut img = Image::filled(100, 100, [30, 30, 30]);
        draw_circle(&mut img, 50, 50, 20, [220, 220, 220]);
        let c = detect_coin(&img, BBox::new(22, 22, 78, 78), &HoughOptions::default()).unwrap();
        assert!((c.cx - 50.0).abs() <= 2.0, "{c:?}");
        assert!((c.cy - 50.0).abs() <= 2.0, "{c:?}");
        assert!((c.r - 20.0).abs() <= 2.0, "{c:?}");
        assert!(c.support > 0.9);
    }

    #[test]
    fn blank_box_has_no_circle() {
        let img = Image::filled(64, 64, [128, 128, 128]);
        let err = detect_coin(&img, BBox::new(8, 8, 55, 55), &HoughOptions::default()).unwrap_err();
        assert!(matches!(err, CalibrateError::NoCircle { support, .. } if support == 0.0));
    }

    #[test]
    fn concentric_tie_prefers_larger_radius() {
        let mut img = Image::filled(100, 100, [20, 20, 20]);
        draw_circle(&mut img, 50, 50, 18, [230, 230, 230]);
        draw_circle(&mut img, 50, 50, 22, [230, 230, 230]);
        let c = detect_coin(&img, BBox::new(10, 10, 89, 89), &HoughOptions::default()).unwrap();
        assert!((c.r - 22.0).abs() <= 1.0, "{c:?}");
        // deterministic
        let again = detect_coin(&img, BBox::new(10, 10, 89, 89), &HoughOptions::default()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn box_checks() {
        let img = Image::filled(64, 64, [0, 0, 0]);
        assert!(matches!(
            detect_coin(&img, BBox::new(0, 0, 14, 30), &HoughOptions::default()),
            Err(CalibrateError::BoxTooSmall(_))
        ));
        assert!(matches!(
            detect_coin(&img, BBox::new(40, 40, 70, 70), &HoughOptions::default()),
            Err(CalibrateError::BoxOutsideImage(_))
        ));
    }

    #[test]
    fn scale_factor_json_shape() {
        let s = ScaleFactor::new(0.025).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"cm_per_px":0.025}"#);
        assert!(serde_json::from_str::<ScaleFactor>(r#"{"cm_per_px":-1}"#).is_err());
    }
}
