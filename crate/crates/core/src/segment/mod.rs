//! GrabCut foreground extraction from a bounding box.
//!
//! The energy being minimized over the per-pixel labels `α` is
//!
//! ```text
//! E(α) = Σ_n D_α(n)(z_n) + Σ_(m,n) [α_m ≠ α_n] · γ · exp(-β‖z_m − z_n‖²) / dist(m, n)
//! ```
//!
//! where `D_fg(z) = min_k -ln(π_k N(z | μ_k, Σ_k))` under the foreground
//! mixture (likewise for background), the sum runs over all 8-neighbor
//! pairs, and `β = 1 / (2 · mean ‖z_m − z_n‖²)`. Every step of
//! [`grabcut_run`] (component assignment, mixture re-estimation, min cut)
//! lowers `E` for the current labels, so the recorded energies never rise.
//!
//! Only pixels in the initialization box (plus a one-pixel ring of fixed
//! background around it) enter the flow graph: pixels farther out are fixed
//! background with no neighbor whose label can change, so they only add a
//! constant to the cut.

pub mod contour;
pub mod gmm;
pub mod maxflow;

use serde::{Deserialize, Serialize};

use crate::raster::{BBox, Image, Mask};
use gmm::{kmeans, total_variance, Color, GaussianMixture};
pub use maxflow::{min_cut, CutGraph, MinCut};

/// Mixture components per side.
pub const COMPONENTS: usize = 5;
pub const DEFAULT_GAMMA: f64 = 50.0;
pub const DEFAULT_MAX_ITERS: usize = 5;
pub const DEFAULT_REL_TOL: f64 = 1e-3;
pub const KMEANS_ITERS: usize = 10;
/// Smallest initialization box area in px².
pub const MIN_BOX_AREA: i64 = 64;
/// A region whose total color variance is below this has no usable model.
pub const MIN_COLOR_VARIANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SegmentError {
    #[error("segmentation box {0} is smaller than {MIN_BOX_AREA} px²")]
    BoxTooSmall(BBox),
    #[error("segmentation box {0} lies outside the image")]
    BoxOutsideImage(BBox),
    #[error("degenerate colors: {0}")]
    DegenerateColors(&'static str),
    #[error("the cut assigned no pixel to the foreground")]
    EmptyForeground,
    #[error("max_iters must be at least 1")]
    NoIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrimapLabel {
    SureBackground,
    SureForeground,
    ProbableBackground,
    ProbableForeground,
}

impl TrimapLabel {
    pub fn is_foreground(self) -> bool {
        matches!(self, TrimapLabel::SureForeground | TrimapLabel::ProbableForeground)
    }

    pub fn is_sure(self) -> bool {
        matches!(self, TrimapLabel::SureForeground | TrimapLabel::SureBackground)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trimap {
    width: u32,
    height: u32,
    labels: Vec<TrimapLabel>,
}

impl Trimap {
    /// `ProbableForeground` inside `bbox`, `SureBackground` elsewhere.
    pub fn from_box(width: u32, height: u32, bbox: BBox) -> Self {
        let mut labels = vec![TrimapLabel::SureBackground; width as usize * height as usize];
        for y in bbox.ymin..=bbox.ymax {
            for x in bbox.xmin..=bbox.xmax {
                labels[y as usize * width as usize + x as usize] = TrimapLabel::ProbableForeground;
            }
        }
        Self { width, height, labels }
    }

    pub fn labels(&self) -> &[TrimapLabel] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> TrimapLabel {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self, label: TrimapLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn foreground_mask(&self) -> Mask {
        Mask::from_vec(self.width, self.height, self.labels.iter().map(|l| l.is_foreground()).collect())
            .expect("same dimensions")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrabCutOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub gamma: f64,
}

impl Default for GrabCutOptions {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            gamma: DEFAULT_GAMMA,
        }
    }
}

/// Evolving segmentation of one box in one image.
#[derive(Debug, Clone)]
pub struct SegState<'a> {
    pub image: &'a Image,
    pub bbox: BBox,
    pub trimap: Trimap,
    pub fg_gmm: GaussianMixture,
    pub bg_gmm: GaussianMixture,
    /// Mixture component of each pixel within its current side's mixture.
    pub components: Vec<usize>,
    pub beta: f64,
    pub gamma: f64,
}

/// `1 / (2 · mean ‖z_m − z_n‖²)` over all 8-neighbor pairs.
pub fn contrast_beta(image: &Image) -> Option<f64> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for y in 0..h {
        for x in 0..w {
            let z = image.color_f64(y * w + x);
            for (nx, ny) in forward_neighbors(x, y, w, h) {
                sum += dist2(&z, &image.color_f64(ny * w + nx));
                pairs += 1;
            }
        }
    }
    (pairs > 0 && sum > 0.0).then(|| pairs as f64 / (2.0 * sum))
}

/// Right, down-left, down, down-right: each undirected 8-neighbor pair once.
#[inline]
fn forward_neighbors(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let mut out = [(usize::MAX, 0); 4];
    if x + 1 < w {
        out[0] = (x + 1, y);
    }
    if y + 1 < h {
        if x > 0 {
            out[1] = (x - 1, y + 1);
        }
        out[2] = (x, y + 1);
        if x + 1 < w {
            out[3] = (x + 1, y + 1);
        }
    }
    out.into_iter().filter(|p| p.0 != usize::MAX)
}

#[inline]
fn dist2(a: &Color, b: &Color) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

#[inline]
fn neighbor_dist(x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
    if x0 != x1 && y0 != y1 {
        std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

pub fn seg_init<'a>(image: &'a Image, bbox: BBox, gamma: f64) -> Result<SegState<'a>, SegmentError> {
    if !bbox.is_proper() || !bbox.within(image.width(), image.height()) {
        return Err(SegmentError::BoxOutsideImage(bbox));
    }
    if bbox.area() < MIN_BOX_AREA {
        return Err(SegmentError::BoxTooSmall(bbox));
    }
    let trimap = Trimap::from_box(image.width(), image.height(), bbox);
    let (fg_idx, bg_idx): (Vec<usize>, Vec<usize>) =
        (0..image.len()).partition(|&i| trimap.labels[i].is_foreground());
    if bg_idx.is_empty() {
        return Err(SegmentError::DegenerateColors("no background sample outside the box"));
    }
    let fg: Vec<Color> = fg_idx.iter().map(|&i| image.color_f64(i)).collect();
    let bg: Vec<Color> = bg_idx.iter().map(|&i| image.color_f64(i)).collect();
    if total_variance(&fg) < MIN_COLOR_VARIANCE || total_variance(&bg) < MIN_COLOR_VARIANCE {
        return Err(SegmentError::DegenerateColors("zero color variance in a region"));
    }
    let beta = contrast_beta(image).ok_or(SegmentError::DegenerateColors("uniform image"))?;

    let mut fg_labels = kmeans(&fg, COMPONENTS, KMEANS_ITERS);
    let mut bg_labels = kmeans(&bg, COMPONENTS, KMEANS_ITERS);
    let fg_gmm = GaussianMixture::fit(&fg, &mut fg_labels, COMPONENTS);
    let bg_gmm = GaussianMixture::fit(&bg, &mut bg_labels, COMPONENTS);

    let mut components = vec![0; image.len()];
    for (&i, &k) in fg_idx.iter().zip(&fg_labels) {
        components[i] = k;
    }
    for (&i, &k) in bg_idx.iter().zip(&bg_labels) {
        components[i] = k;
    }
    Ok(SegState {
        image,
        bbox,
        trimap,
        fg_gmm,
        bg_gmm,
        components,
        beta,
        gamma,
    })
}

impl SegState<'_> {
    fn gmm_for(&self, foreground: bool) -> &GaussianMixture {
        if foreground {
            &self.fg_gmm
        } else {
            &self.bg_gmm
        }
    }

    /// `(D_fg, D_bg)` for pixel `i`.
    #[inline]
    fn data_terms(&self, i: usize) -> (f64, f64) {
        let z = self.image.color_f64(i);
        (self.fg_gmm.best_component(&z).1, self.bg_gmm.best_component(&z).1)
    }

    /// Pixels that can enter the flow graph: the box plus a one-pixel ring.
    pub fn graph_region(&self) -> BBox {
        self.bbox
            .expand(1)
            .clip(self.image.width(), self.image.height())
            .unwrap_or(self.bbox)
    }
}

/// Every pixel takes the most likely component of its current side's mixture.
pub fn assign_components(state: &mut SegState<'_>) {
    for i in 0..state.image.len() {
        let fg = state.trimap.labels[i].is_foreground();
        let z = state.image.color_f64(i);
        state.components[i] = state.gmm_for(fg).best_component(&z).0;
    }
}

/// Re-estimates both mixtures from the current component assignments.
pub fn learn_gmm(state: &mut SegState<'_>) {
    for side in [true, false] {
        let idx: Vec<usize> = (0..state.image.len())
            .filter(|&i| state.trimap.labels[i].is_foreground() == side)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let samples: Vec<Color> = idx.iter().map(|&i| state.image.color_f64(i)).collect();
        let mut labels: Vec<usize> = idx.iter().map(|&i| state.components[i]).collect();
        let gmm = GaussianMixture::fit(&samples, &mut labels, COMPONENTS);
        for (&i, &k) in idx.iter().zip(&labels) {
            state.components[i] = k;
        }
        if side {
            state.fg_gmm = gmm;
        } else {
            state.bg_gmm = gmm;
        }
    }
}

/// Flow graph over [`SegState::graph_region`]; node `i` is region pixel
/// `(region.xmin + i % region_width, region.ymin + i / region_width)`.
/// The source side is foreground.
#[derive(Debug, Clone)]
pub struct PixelGraph {
    pub region: BBox,
    /// Hard-constraint capacity on sure pixels.
    pub big: f64,
    pub graph: CutGraph,
}

impl PixelGraph {
    pub fn node(&self, x: i64, y: i64) -> usize {
        ((y - self.region.ymin) * self.region.width() + (x - self.region.xmin)) as usize
    }

    pub fn pixel(&self, node: usize) -> (i64, i64) {
        let w = self.region.width() as usize;
        (self.region.xmin + (node % w) as i64, self.region.ymin + (node / w) as i64)
    }
}

pub fn build_graph(state: &SegState<'_>) -> PixelGraph {
    let region = state.graph_region();
    let rw = region.width() as usize;
    let rh = region.height() as usize;
    let iw = state.image.width() as usize;
    let pix = |node: usize| (region.xmin as usize + node % rw, region.ymin as usize + node / rw);

    let mut graph = CutGraph::new(rw * rh);
    let mut smooth_sum = vec![0.0f64; rw * rh];
    for ly in 0..rh {
        for lx in 0..rw {
            let a = ly * rw + lx;
            let (x, y) = pix(a);
            let za = state.image.color_f64(y * iw + x);
            for (nlx, nly) in forward_neighbors(lx, ly, rw, rh) {
                let b = nly * rw + nlx;
                let (nx, ny) = pix(b);
                let zb = state.image.color_f64(ny * iw + nx);
                let cap = state.gamma * (-state.beta * dist2(&za, &zb)).exp() / neighbor_dist(x, y, nx, ny);
                graph.add_edge(a, b, cap, cap);
                smooth_sum[a] += cap;
                smooth_sum[b] += cap;
            }
        }
    }

    // data terms, shifted per pixel only if a likelihood exceeds one
    let mut probable = Vec::new();
    let mut max_data = 0.0f64;
    for node in 0..rw * rh {
        let (x, y) = pix(node);
        let i = y * iw + x;
        if state.trimap.labels[i].is_sure() {
            continue;
        }
        let (d_fg, d_bg) = state.data_terms(i);
        let shift = d_fg.min(d_bg).min(0.0);
        let (source, sink) = (d_bg - shift, d_fg - shift);
        max_data = max_data.max(source).max(sink);
        probable.push((node, source, sink));
    }
    let big = 1.0 + max_data + smooth_sum.iter().copied().fold(0.0, f64::max);
    for node in 0..rw * rh {
        let (x, y) = pix(node);
        match state.trimap.labels[y * iw + x] {
            TrimapLabel::SureBackground => graph.set_terminals(node, 0.0, big),
            TrimapLabel::SureForeground => graph.set_terminals(node, big, 0.0),
            _ => {}
        }
    }
    for (node, source, sink) in probable {
        graph.set_terminals(node, source, sink);
    }
    PixelGraph { region, big, graph }
}

/// Energy of the current labeling; see the module docs.
pub fn seg_energy(state: &SegState<'_>) -> f64 {
    let (w, h) = (state.image.width() as usize, state.image.height() as usize);
    let labels = &state.trimap.labels;
    let mut data = 0.0;
    let mut smooth = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let fg = labels[i].is_foreground();
            let z = state.image.color_f64(i);
            data += state.gmm_for(fg).best_component(&z).1;
            for (nx, ny) in forward_neighbors(x, y, w, h) {
                let j = ny * w + nx;
                if labels[j].is_foreground() != fg {
                    let zn = state.image.color_f64(j);
                    smooth += state.gamma * (-state.beta * dist2(&z, &zn)).exp() / neighbor_dist(x, y, nx, ny);
                }
            }
        }
    }
    data + smooth
}

/// Runs the cut on `graph` and writes the result into the probable pixels.
/// Returns the flow value.
pub fn apply_cut(state: &mut SegState<'_>, graph: &PixelGraph) -> f64 {
    let cut = min_cut(&graph.graph);
    let iw = state.image.width() as usize;
    for (node, &fg) in cut.source_side.iter().enumerate() {
        let (x, y) = graph.pixel(node);
        let i = y as usize * iw + x as usize;
        if !state.trimap.labels[i].is_sure() {
            state.trimap.labels[i] = if fg {
                TrimapLabel::ProbableForeground
            } else {
                TrimapLabel::ProbableBackground
            };
        }
    }
    cut.flow
}

#[derive(Debug, Clone, Serialize)]
pub struct GrabCutResult {
    /// Largest 4-connected foreground component.
    #[serde(skip)]
    pub mask: Mask,
    /// Raw foreground labels after the last cut.
    #[serde(skip)]
    pub raw_mask: Mask,
    /// Outer boundary of `mask`, clockwise.
    pub contour: Vec<(i64, i64)>,
    /// Number of min cuts performed.
    pub iterations: usize,
    /// Energy before the first cut, then after each cut.
    pub energies: Vec<f64>,
}

pub fn grabcut_run(image: &Image, bbox: BBox, options: &GrabCutOptions) -> Result<GrabCutResult, SegmentError> {
    if options.max_iters == 0 {
        return Err(SegmentError::NoIterations);
    }
    let mut state = seg_init(image, bbox, options.gamma)?;
    let mut energies = Vec::with_capacity(options.max_iters + 1);
    let mut iterations = 0;
    for it in 0..options.max_iters {
        assign_components(&mut state);
        learn_gmm(&mut state);
        if it == 0 {
            energies.push(seg_energy(&state));
        }
        let graph = build_graph(&state);
        apply_cut(&mut state, &graph);
        iterations += 1;
        let e = seg_energy(&state);
        let prev = *energies.last().expect("initial energy recorded");
        energies.push(e);
        if it > 0 && (prev - e) / prev.abs().max(f64::MIN_POSITIVE) < options.rel_tol {
            break;
        }
    }
    let raw_mask = state.trimap.foreground_mask();
    if raw_mask.count() == 0 {
        return Err(SegmentError::EmptyForeground);
    }
    let mask = contour::largest_component(&raw_mask);
    let contour = contour::trace_boundary(&mask);
    Ok(GrabCutResult {
        mask,
        raw_mask,
        contour,
        iterations,
        energies,
    })
}

impl SegmentError {
    pub fn code(&self) -> &'static str {
        match self {
            SegmentError::BoxTooSmall(_) => "BoxTooSmall",
            SegmentError::BoxOutsideImage(_) => "BoxOutsideImage",
            SegmentError::DegenerateColors(_) => "DegenerateColors",
            SegmentError::EmptyForeground => "EmptyForeground",
            SegmentError::NoIterations => "NoIterations",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn noisy(w: u32, h: u32, seed: u64, paint: impl Fn(u32, u32) -> [u8; 3]) -> Image {
        synth::with_noise(&synth::paint(w, h, paint), 6, seed)
    }

    #[test]
    fn init_counts() {
        let img = noisy(100, 100, 1, |x, _| if x < 50 { [200, 30, 30] } else { [30, 30, 200] });
        let s = seg_init(&img, BBox::new(30, 30, 69, 69), DEFAULT_GAMMA).unwrap();
        assert_eq!(s.trimap.count(TrimapLabel::ProbableForeground), 1600);
        assert_eq!(s.trimap.count(TrimapLabel::SureBackground), 8400);
        assert!(s.beta > 0.0);
        assert!((s.fg_gmm.weight_sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn init_errors() {
        let img = noisy(64, 64, 2, |_, _| [100, 120, 140]);
        assert!(matches!(
            seg_init(&img, img.full_box(), DEFAULT_GAMMA),
            Err(SegmentError::DegenerateColors(_))
        ));
        let gray = Image::filled(64, 64, [128, 128, 128]);
        assert!(matches!(
            seg_init(&gray, BBox::new(10, 10, 40, 40), DEFAULT_GAMMA),
            Err(SegmentError::DegenerateColors(_))
        ));
        assert_eq!(
            seg_init(&img, BBox::new(10, 10, 16, 16), DEFAULT_GAMMA).unwrap_err(),
            SegmentError::BoxTooSmall(BBox::new(10, 10, 16, 16))
        );
        assert!(matches!(
            seg_init(&img, BBox::new(10, 10, 80, 40), DEFAULT_GAMMA),
            Err(SegmentError::BoxOutsideImage(_))
        ));
    }

    #[test]
    fn graph_capacities() {
        // two identical neighbors: smoothness is exactly gamma / dist
        let mut img = noisy(40, 40, 3, |x, y| if (10..30).contains(&x) && (10..30).contains(&y) { [220, 40, 40] } else { [40, 40, 220] });
        img.put(15, 15, [90, 90, 90]);
        img.put(16, 15, [90, 90, 90]);
        img.put(16, 16, [90, 90, 90]);
        let s = seg_init(&img, BBox::new(5, 5, 34, 34), DEFAULT_GAMMA).unwrap();
        let g = build_graph(&s);
        let (a, b, c) = (g.node(15, 15), g.node(16, 15), g.node(16, 16));
        let cap = |p: usize, q: usize| {
            g.graph
                .edges
                .iter()
                .find(|e| (e.0, e.1) == (p, q) || (e.0, e.1) == (q, p))
                .map(|e| {
                    assert_eq!(e.2, e.3, "symmetric");
                    e.2
                })
                .unwrap()
        };
        assert_eq!(cap(a, b), DEFAULT_GAMMA);
        assert_eq!(cap(b, c), DEFAULT_GAMMA);
        assert!((cap(a, c) - DEFAULT_GAMMA / std::f64::consts::SQRT_2).abs() < 1e-12);

        // the ring pixel outside the box is sure background
        let ring = g.node(4, 4);
        assert_eq!(g.graph.terminals[ring], (0.0, g.big));
        for &(s, t) in &g.graph.terminals {
            assert!(s >= 0.0 && t >= 0.0 && s.is_finite() && t.is_finite());
            assert!(s <= g.big && t <= g.big);
        }
    }

    #[test]
    fn uniform_region_energy_is_data_only() {
        let img = noisy(40, 40, 4, |x, _| if x < 20 { [200, 200, 30] } else { [30, 200, 200] });
        let mut s = seg_init(&img, BBox::new(8, 8, 31, 31), DEFAULT_GAMMA).unwrap();
        // force every pixel to background
        for l in s.trimap.labels.iter_mut() {
            if !l.is_sure() {
                *l = TrimapLabel::ProbableBackground;
            }
        }
        let data: f64 = (0..img.len()).map(|i| s.bg_gmm.best_component(&img.color_f64(i)).1).sum();
        assert!((seg_energy(&s) - data).abs() <= 1e-9 * data.abs());
    }

    #[test]
    fn flipping_interior_pixel_raises_energy() {
        let img = noisy(40, 40, 5, |x, _| if x < 20 { [200, 200, 30] } else { [30, 200, 200] });
        let mut s = seg_init(&img, BBox::new(8, 8, 31, 31), DEFAULT_GAMMA).unwrap();
        let before = seg_energy(&s);
        let i = 20 * 40 + 20;
        s.trimap.labels[i] = TrimapLabel::ProbableBackground;
        // same pixel, its data term moves to the other mixture
        let z = img.color_f64(i);
        let data_delta = s.bg_gmm.best_component(&z).1 - s.fg_gmm.best_component(&z).1;
        let after = seg_energy(&s);
        assert!(after - before > data_delta, "smoothness must be added");
    }

    #[test]
    fn cut_never_raises_energy() {
        let img = noisy(60, 60, 6, |x, y| {
            if (x as i32 - 30).pow(2) + (y as i32 - 30).pow(2) < 225 {
                [220, 120, 20]
            } else {
                [60, 140, 60]
            }
        });
        let mut s = seg_init(&img, BBox::new(10, 10, 49, 49), DEFAULT_GAMMA).unwrap();
        for _ in 0..3 {
            assign_components(&mut s);
            learn_gmm(&mut s);
            let before = seg_energy(&s);
            let g = build_graph(&s);
            apply_cut(&mut s, &g);
            assert!(seg_energy(&s) <= before + 1e-9);
        }
    }

    #[test]
    fn square_on_field() {
        let truth = Mask::from_fn(120, 120, |x, y| (30..90).contains(&x) && (30..90).contains(&y));
        let img = noisy(120, 120, 7, |x, y| if truth.get(x, y) { [210, 30, 30] } else { [30, 40, 200] });
        let r = grabcut_run(&img, BBox::new(20, 20, 99, 99), &GrabCutOptions::default()).unwrap();
        assert!(r.mask.iou(&truth) >= 0.95, "iou {}", r.mask.iou(&truth));
        for w in r.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", r.energies);
        }
        assert!(!r.contour.is_empty());
    }

    #[test]
    fn one_iteration_is_one_cut() {
        let img = noisy(60, 60, 8, |x, y| if (20..40).contains(&x) && (20..40).contains(&y) { [250, 250, 0] } else { [0, 0, 90] });
        let opts = GrabCutOptions {
            max_iters: 1,
            ..Default::default()
        };
        let r = grabcut_run(&img, BBox::new(12, 12, 47, 47), &opts).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.energies.len(), 2);
        let zero = GrabCutOptions {
            max_iters: 0,
            ..Default::default()
        };
        assert_eq!(grabcut_run(&img, BBox::new(12, 12, 47, 47), &zero).unwrap_err(), SegmentError::NoIterations);
    }

    #[test]
    fn background_only_box_is_empty() {
        let truth = Mask::from_fn(160, 120, |x, y| (20..60).contains(&x) && (30..90).contains(&y));
        let img = noisy(160, 120, 9, |x, y| if truth.get(x, y) { [210, 30, 30] } else { [30, 40, 200] });
        let err = grabcut_run(&img, BBox::new(95, 30, 140, 90), &GrabCutOptions::default()).unwrap_err();
        assert_eq!(err, SegmentError::EmptyForeground);
    }
}
