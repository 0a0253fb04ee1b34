//! Full-covariance Gaussian mixtures in RGB space and the k-means used to
//! seed them.

use serde::{Deserialize, Serialize};

/// Added to every covariance diagonal after estimation.
pub const COV_REGULARIZATION: f64 = 1e-3;

pub type Color = [f64; 3];
type Mat3 = [[f64; 3]; 3];

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: Color,
    pub cov: Mat3,
    #[serde(skip)]
    inv_cov: Mat3,
    #[serde(skip)]
    log_det: f64,
}

impl Gaussian {
    /// Component with the given parameters; `cov` must be positive definite.
    pub fn new(weight: f64, mean: Color, cov: Mat3) -> Self {
        let det = det3(&cov);
        assert!(det > 0.0, "covariance must be positive definite (det = {det})");
        Self {
            weight,
            mean,
            cov,
            inv_cov: inv3(&cov, det),
            log_det: det.ln(),
        }
    }

    fn empty() -> Self {
        let cov = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        Self {
            weight: 0.0,
            mean: [0.0; 3],
            cov,
            inv_cov: cov,
            log_det: 0.0,
        }
    }

    /// `-ln(weight · N(z | mean, cov))`; infinite for an unused component.
    #[inline]
    pub fn neg_log_weighted(&self, z: &Color) -> f64 {
        if self.weight <= 0.0 {
            return f64::INFINITY;
        }
        let d = [z[0] - self.mean[0], z[1] - self.mean[1], z[2] - self.mean[2]];
        let m = &self.inv_cov;
        let mahal = d[0] * (m[0][0] * d[0] + m[0][1] * d[1] + m[0][2] * d[2])
            + d[1] * (m[1][0] * d[0] + m[1][1] * d[1] + m[1][2] * d[2])
            + d[2] * (m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2]);
        -self.weight.ln() + 0.5 * (self.log_det + 3.0 * LN_2PI + mahal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn new(components: Vec<Gaussian>) -> Self {
        Self { components }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Component with the smallest `-ln(π_k N_k(z))`, lowest index on ties.
    #[inline]
    pub fn best_component(&self, z: &Color) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, c) in self.components.iter().enumerate() {
            let v = c.neg_log_weighted(z);
            if v < best.1 {
                best = (k, v);
            }
        }
        best
    }

    /// `-ln Σ_k π_k N_k(z)`.
    pub fn neg_log_likelihood(&self, z: &Color) -> f64 {
        let terms: Vec<f64> = self.components.iter().map(|c| -c.neg_log_weighted(z)).collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        -(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
    }

    /// Maximum-likelihood re-estimation from hard assignments.
    ///
    /// `labels[i]` is the component of `samples[i]` and is updated in place
    /// when an empty component is re-seeded: the sample with the lowest
    /// likelihood under the populated components (lowest index on ties)
    /// moves into it. Only samples whose component keeps at least one other
    /// member are eligible, so a component is never emptied by re-seeding.
    pub fn fit(samples: &[Color], labels: &mut [usize], k: usize) -> Self {
        assert_eq!(samples.len(), labels.len());
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let populated = Self::estimate(samples, labels, k);
            let mut target: Option<(usize, f64)> = None;
            for (i, z) in samples.iter().enumerate() {
                if counts[labels[i]] < 2 {
                    continue;
                }
                let nll = populated.neg_log_likelihood(z);
                if target.is_none_or(|(_, best)| nll > best) {
                    target = Some((i, nll));
                }
            }
            let Some((i, _)) = target else {
                break;
            };
            counts[labels[i]] -= 1;
            labels[i] = empty;
            counts[empty] = 1;
        }
        Self::estimate(samples, labels, k)
    }

    fn estimate(samples: &[Color], labels: &[usize], k: usize) -> Self {
        let mut n = vec![0usize; k];
        let mut sum = vec![[0.0f64; 3]; k];
        for (z, &l) in samples.iter().zip(labels) {
            n[l] += 1;
            for c in 0..3 {
                sum[l][c] += z[c];
            }
        }
        let means: Vec<Color> = (0..k)
            .map(|j| {
                if n[j] == 0 {
                    [0.0; 3]
                } else {
                    let m = n[j] as f64;
                    [sum[j][0] / m, sum[j][1] / m, sum[j][2] / m]
                }
            })
            .collect();
        let mut scatter = vec![[[0.0f64; 3]; 3]; k];
        for (z, &l) in samples.iter().zip(labels) {
            let d = [z[0] - means[l][0], z[1] - means[l][1], z[2] - means[l][2]];
            for a in 0..3 {
                for b in 0..3 {
                    scatter[l][a][b] += d[a] * d[b];
                }
            }
        }
        let total = samples.len() as f64;
        let components = (0..k)
            .map(|j| {
                if n[j] == 0 {
                    return Gaussian::empty();
                }
                let m = n[j] as f64;
                let mut cov = scatter[j];
                for (a, row) in cov.iter_mut().enumerate() {
                    for v in row.iter_mut() {
                        *v /= m;
                    }
                    row[a] += COV_REGULARIZATION;
                }
                // exact symmetry
                #[allow(clippy::needless_range_loop)]
                for a in 0..3 {
                    for b in 0..a {
                        let s = 0.5 * (cov[a][b] + cov[b][a]);
                        cov[a][b] = s;
                        cov[b][a] = s;
                    }
                }
                Gaussian::new(m / total, means[j], cov)
            })
            .collect();
        Self { components }
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &Mat3, det: f64) -> Mat3 {
    let d = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * d,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * d,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * d,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * d,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * d,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * d,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * d,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * d,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * d,
        ],
    ]
}

fn dist2(a: &Color, b: &Color) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Sum of per-channel variances.
pub fn total_variance(samples: &[Color]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len() as f64;
    let mut mean = [0.0; 3];
    for z in samples {
        for c in 0..3 {
            mean[c] += z[c] / n;
        }
    }
    samples.iter().map(|z| dist2(z, &mean)).sum::<f64>() / n
}

/// Lloyd's k-means with farthest-point seeding.
///
/// The first seed is the sample farthest from the sample mean; each next
/// seed maximizes the distance to its nearest chosen seed. Ties go to the
/// lowest sample index, so the result is fully deterministic. Returns one
/// cluster label per sample.
pub fn kmeans(samples: &[Color], k: usize, iters: usize) -> Vec<usize> {
    if samples.is_empty() {
        return Vec::new();
    }
    let n = samples.len() as f64;
    let mut mean = [0.0; 3];
    for z in samples {
        for c in 0..3 {
            mean[c] += z[c] / n;
        }
    }
    let argmax = |f: &dyn Fn(&Color) -> f64| {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, z) in samples.iter().enumerate() {
            let v = f(z);
            if v > best.1 {
                best = (i, v);
            }
        }
        best.0
    };
    let mut centers = vec![samples[argmax(&|z| dist2(z, &mean))]];
    let mut nearest: Vec<f64> = samples.iter().map(|z| dist2(z, &centers[0])).collect();
    while centers.len() < k {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &d) in nearest.iter().enumerate() {
            if d > best.1 {
                best = (i, d);
            }
        }
        let c = samples[best.0];
        for (d, z) in nearest.iter_mut().zip(samples) {
            *d = d.min(dist2(z, &c));
        }
        centers.push(c);
    }

    let assign = |centers: &[Color], labels: &mut [usize]| {
        for (l, z) in labels.iter_mut().zip(samples) {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centers.iter().enumerate() {
                let d = dist2(z, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            *l = best.0;
        }
    };
    let mut labels = vec![0; samples.len()];
    for _ in 0..iters {
        assign(&centers, &mut labels);
        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (z, &l) in samples.iter().zip(&labels) {
            counts[l] += 1;
            for c in 0..3 {
                sums[l][c] += z[c];
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let m = counts[j] as f64;
                centers[j] = [sums[j][0] / m, sums[j][1] / m, sums[j][2] / m];
            }
        }
    }
    assign(&centers, &mut labels);
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(weight: f64, mean: Color, var: f64) -> Gaussian {
        Gaussian::new(weight, mean, [[var, 0.0, 0.0], [0.0, var, 0.0], [0.0, 0.0, var]])
    }

    #[test]
    fn density_matches_closed_form() {
        let g = iso(1.0, [10.0, 20.0, 30.0], 4.0);
        let z = [11.0, 22.0, 30.0];
        let expect = 0.5 * (3.0 * (4.0f64).ln() + 3.0 * LN_2PI + 5.0 / 4.0);
        assert!((g.neg_log_weighted(&z) - expect).abs() < 1e-12);
    }

    #[test]
    fn mean_pixel_picks_its_component() {
        let gmm = GaussianMixture::new(vec![
            iso(0.5, [0.0; 3], 10.0),
            iso(0.5, [100.0; 3], 10.0),
        ]);
        assert_eq!(gmm.best_component(&[100.0; 3]).0, 1);
        assert_eq!(gmm.best_component(&[0.0; 3]).0, 0);
    }

    #[test]
    fn symmetric_tie_goes_to_lowest_index() {
        let gmm = GaussianMixture::new(vec![
            iso(0.5, [0.0, 0.0, 0.0], 25.0),
            iso(0.5, [20.0, 0.0, 0.0], 25.0),
        ]);
        // exactly halfway
        let (k, _) = gmm.best_component(&[10.0, 5.0, -3.0]);
        assert_eq!(k, 0);
        let (a, b) = (
            gmm.components[0].neg_log_weighted(&[10.0, 5.0, -3.0]),
            gmm.components[1].neg_log_weighted(&[10.0, 5.0, -3.0]),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn single_color_fit_is_regularization_only() {
        let samples = vec![[50.0, 60.0, 70.0]; 12];
        let mut labels = vec![0; 12];
        let gmm = GaussianMixture::fit(&samples, &mut labels, 5);
        for c in &gmm.components {
            assert_eq!(c.mean, [50.0, 60.0, 70.0]);
            for a in 0..3 {
                for b in 0..3 {
                    let expect = if a == b { COV_REGULARIZATION } else { 0.0 };
                    assert!((c.cov[a][b] - expect).abs() < 1e-12);
                }
            }
        }
        assert!((gmm.weight_sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn starved_component_reseeds_at_least_likely_sample() {
        // two tight clusters plus one outlier, all assigned to component 0 or 1
        let mut samples = Vec::new();
        for i in 0..10 {
            samples.push([10.0 + (i % 3) as f64, 10.0 + (i % 2) as f64, 10.0]);
            samples.push([200.0 + (i % 2) as f64, 50.0, 60.0 + (i % 3) as f64]);
        }
        samples.push([120.0, 240.0, 5.0]);
        let mut labels: Vec<usize> = samples.iter().map(|z| if z[0] < 100.0 { 0 } else { 1 }).collect();

        // brute force: likelihood under the populated components
        let populated = GaussianMixture::estimate(&samples, &labels, 3);
        let mut worst = (usize::MAX, f64::NEG_INFINITY);
        for (i, z) in samples.iter().enumerate() {
            let p: f64 = populated
                .components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| (-c.neg_log_weighted(z)).exp())
                .sum();
            let nll = -p.ln();
            if nll > worst.1 {
                worst = (i, nll);
            }
        }
        assert_eq!(worst.0, samples.len() - 1);

        let gmm = GaussianMixture::fit(&samples, &mut labels, 3);
        assert_eq!(labels[worst.0], 2);
        assert_eq!(gmm.components[2].mean, samples[worst.0]);
        assert!((gmm.weight_sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kmeans_separates_clusters_deterministically() {
        let mut samples = Vec::new();
        for i in 0..30 {
            let j = (i % 5) as f64;
            samples.push([j, j, j]);
            samples.push([200.0 + j, 10.0, 10.0]);
        }
        let a = kmeans(&samples, 2, 10);
        assert_eq!(a, kmeans(&samples, 2, 10));
        for (i, z) in samples.iter().enumerate() {
            let expect = a[if z[0] < 100.0 { 0 } else { 1 }];
            assert_eq!(a[i], expect);
        }
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn variance() {
        assert_eq!(total_variance(&[[3.0; 3]; 4]), 0.0);
        let v = total_variance(&[[0.0; 3], [2.0, 0.0, 0.0]]);
        assert!((v - 1.0).abs() < 1e-12);
    }
}
