//! Density and distribution detectors: KDE, GMM, HBOS, LODA, COPOD, ECOD, QMCD.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::common::{kmeans, log_sum_exp, random_subset, sq_dist, Points};

/// Lower bound on the KDE bandwidth.
pub const BANDWIDTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Kde {
    pub points: Points,
    pub bandwidth: f64,
}

impl Kde {
    /// `bandwidth <= 0` selects Scott's rule on the mean per-column variance.
    pub fn fit(points: Points, bandwidth: f64) -> Self {
        let bandwidth = if bandwidth > 0.0 {
            bandwidth
        } else {
            let n = points.len() as f64;
            let p = points.width as f64;
            let var = points.variance();
            let sigma = (var.iter().sum::<f64>() / p).sqrt();
            n.powf(-1.0 / (p + 4.0)) * sigma
        }
        .max(BANDWIDTH_FLOOR);
        Self { points, bandwidth }
    }

    /// Negative log density under a Gaussian product kernel.
    pub fn score(&self, q: &[f64]) -> f64 {
        let h2 = self.bandwidth * self.bandwidth;
        let lse = log_sum_exp(self.points.rows().map(|r| -sq_dist(q, r) / (2.0 * h2)));
        let n = self.points.len() as f64;
        let p = self.points.width as f64;
        let log_norm = p * (self.bandwidth * (2.0 * std::f64::consts::PI).sqrt()).ln();
        -(lse - n.ln() - log_norm)
    }
}

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl Gmm {
    pub fn fit<R: Rng>(points: &Points, components: usize, reg: f64, max_iter: usize, rng: &mut R) -> Self {
        let n = points.len();
        let p = points.width;
        let k = components.min(n).max(1);
        let means = kmeans(points, k, 20, rng);
        let k = means.len();
        let mut gmm = Gmm {
            weights: vec![1.0 / k as f64; k],
            means,
            variances: vec![vec![1.0; p]; k],
        };
        // start from hard assignments to the k-means centroids
        let mut resp = vec![0.0; n * k];
        for (i, r) in points.rows().enumerate() {
            let c = (0..k)
                .min_by(|&a, &b| sq_dist(r, &gmm.means[a]).total_cmp(&sq_dist(r, &gmm.means[b])))
                .unwrap_or(0);
            resp[i * k + c] = 1.0;
        }
        gmm.m_step(points, &resp, reg);
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..max_iter {
            let ll = gmm.e_step(points, &mut resp);
            gmm.m_step(points, &resp, reg);
            if (ll - prev).abs() < 1e-6 {
                break;
            }
            prev = ll;
        }
        gmm
    }

    fn component_log_pdf(&self, c: usize, q: &[f64]) -> f64 {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let mut s = 0.0;
        for ((x, m), v) in q.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            s += ln2pi + v.ln() + (x - m) * (x - m) / v;
        }
        self.weights[c].ln() - 0.5 * s
    }

    /// Fills responsibilities; returns the mean log-likelihood.
    fn e_step(&self, points: &Points, resp: &mut [f64]) -> f64 {
        let k = self.weights.len();
        let mut total = 0.0;
        for (i, r) in points.rows().enumerate() {
            let logs: Vec<f64> = (0..k).map(|c| self.component_log_pdf(c, r)).collect();
            let lse = log_sum_exp(logs.iter().copied());
            total += lse;
            for c in 0..k {
                resp[i * k + c] = (logs[c] - lse).exp();
            }
        }
        total / points.len() as f64
    }

    fn m_step(&mut self, points: &Points, resp: &[f64], reg: f64) {
        let k = self.weights.len();
        let n = points.len() as f64;
        for c in 0..k {
            let nc: f64 = (0..points.len()).map(|i| resp[i * k + c]).sum();
            if nc < 1e-10 {
                // keep the previous parameters of a starved component
                continue;
            }
            let mut mean = vec![0.0; points.width];
            for (i, r) in points.rows().enumerate() {
                let w = resp[i * k + c];
                for (m, x) in mean.iter_mut().zip(r) {
                    *m += w * x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nc);
            let mut var = vec![0.0; points.width];
            for (i, r) in points.rows().enumerate() {
                let w = resp[i * k + c];
                for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                    *v += w * (x - m) * (x - m);
                }
            }
            var.iter_mut().for_each(|v| *v = *v / nc + reg);
            self.weights[c] = nc / n;
            self.means[c] = mean;
            self.variances[c] = var;
        }
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        -log_sum_exp((0..self.weights.len()).map(|c| self.component_log_pdf(c, q)))
    }
}

/// Equal-width histogram over `[lo, hi]`; a zero-width range is one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<f64>,
}

impl Histogram {
    pub fn fit(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = if hi > lo { bins } else { 1 };
        let mut h = Self {
            lo,
            hi,
            counts: vec![0.0; bins],
        };
        for &v in values {
            if let Some(b) = h.bin(v) {
                h.counts[b] += 1.0;
            }
        }
        h
    }

    pub fn bin(&self, v: f64) -> Option<usize> {
        if v < self.lo || v > self.hi {
            return None;
        }
        let bins = self.counts.len();
        if bins == 1 {
            return Some(0);
        }
        let b = ((v - self.lo) / (self.hi - self.lo) * bins as f64) as usize;
        Some(b.min(bins - 1))
    }

    /// Bin count at `v`; empty and out-of-range bins count as half a sample.
    pub fn count(&self, v: f64) -> f64 {
        self.bin(v).map_or(0.0, |b| self.counts[b]).max(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Hbos {
    pub histograms: Vec<Histogram>,
}

impl Hbos {
    pub fn fit(points: &Points, bins: usize) -> Self {
        let histograms = (0..points.width)
            .map(|d| Histogram::fit(&points.column_sorted(d), bins))
            .collect();
        Self { histograms }
    }

    /// Sum of `-log` bin heights normalized by the tallest bin.
    pub fn score(&self, q: &[f64]) -> f64 {
        self.histograms
            .iter()
            .zip(q)
            .map(|(h, &v)| {
                let max = h.counts.iter().copied().fold(0.0, f64::max);
                -(h.count(v) / max).ln()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Projection {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub histogram: Histogram,
}

impl Projection {
    fn project(&self, q: &[f64]) -> f64 {
        self.indices.iter().zip(&self.weights).map(|(&i, w)| q[i] * w).sum()
    }
}

/// Lightweight on-line detector of anomalies: histograms on sparse random
/// projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Loda {
    pub projections: Vec<Projection>,
    pub n: usize,
}

impl Loda {
    pub fn fit<R: Rng>(points: &Points, projections: usize, bins: usize, rng: &mut R) -> Self {
        let p = points.width;
        let nonzero = (p as f64).sqrt().ceil() as usize;
        let projections = (0..projections)
            .map(|_| {
                let indices = random_subset(rng, p, nonzero.max(1));
                let weights: Vec<f64> = indices.iter().map(|_| rng.sample(StandardNormal)).collect();
                let mut proj = Projection {
                    indices,
                    weights,
                    histogram: Histogram::fit(&[0.0], 1),
                };
                let values: Vec<f64> = points.rows().map(|r| proj.project(r)).collect();
                proj.histogram = Histogram::fit(&values, bins);
                proj
            })
            .collect();
        Self {
            projections,
            n: points.len(),
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let n = self.n as f64;
        let total: f64 = self
            .projections
            .iter()
            .map(|pr| -(pr.histogram.count(pr.project(q)) / n).ln())
            .sum();
        total / self.projections.len() as f64
    }
}

/// Per-column empirical distribution used by the copula detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Ecdf {
    pub sorted: Vec<Vec<f64>>,
    /// Sign of the sample skewness per column.
    pub skew_negative: Vec<bool>,
}

/// `-log` of the smoothed left, right and skew-selected tail probabilities.
struct Tails {
    left: f64,
    right: f64,
    skew: f64,
}

impl Ecdf {
    pub fn fit(points: &Points) -> Self {
        let sorted: Vec<Vec<f64>> = (0..points.width).map(|d| points.column_sorted(d)).collect();
        let skew_negative = sorted.iter().map(|c| skewness(c) < 0.0).collect();
        Self {
            sorted,
            skew_negative,
        }
    }

    fn tails(&self, d: usize, v: f64) -> Tails {
        let c = &self.sorted[d];
        let n = c.len() as f64;
        let le = c.partition_point(|x| *x <= v) as f64;
        let ge = n - c.partition_point(|x| *x < v) as f64;
        let left = -((le + 1.0) / (n + 1.0)).ln();
        let right = -((ge + 1.0) / (n + 1.0)).ln();
        let skew = if self.skew_negative[d] { left } else { right };
        Tails { left, right, skew }
    }

    /// Largest of the three summed tail scores.
    pub fn copod_score(&self, q: &[f64]) -> f64 {
        let (mut l, mut r, mut s) = (0.0, 0.0, 0.0);
        for (d, &v) in q.iter().enumerate() {
            let t = self.tails(d, v);
            l += t.left;
            r += t.right;
            s += t.skew;
        }
        l.max(r).max(s)
    }

    /// Sum over columns of the more extreme tail.
    pub fn ecod_score(&self, q: &[f64]) -> f64 {
        q.iter()
            .enumerate()
            .map(|(d, &v)| {
                let t = self.tails(d, v);
                t.left.max(t.right).max(t.skew)
            })
            .sum()
    }
}

fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Wrap-around quasi-Monte Carlo discrepancy on coordinates scaled by the
/// training range. The kernel `1.5 - t + t^2` is largest for rows close to
/// the query on the torus, so its mean measures how typical the query is; the
/// score is its negative log. Coordinates outside the unit cube are clamped
/// and their excess (in training spans) is added, so points beyond the
/// training range always score higher than the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Qmcd {
    pub lo: Vec<f64>,
    pub span: Vec<f64>,
    pub scaled: Points,
}

impl Qmcd {
    pub fn fit(points: &Points) -> Self {
        let p = points.width;
        let mut lo = vec![f64::INFINITY; p];
        let mut hi = vec![f64::NEG_INFINITY; p];
        for r in points.rows() {
            for d in 0..p {
                lo[d] = lo[d].min(r[d]);
                hi[d] = hi[d].max(r[d]);
            }
        }
        let span: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        let mut me = Self {
            lo,
            span,
            scaled: Points::new(Vec::new(), p),
        };
        let data = points.rows().flat_map(|r| me.scale(r)).collect();
        me.scaled = Points::new(data, p);
        me
    }

    fn scale(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.lo)
            .zip(&self.span)
            .map(|((x, l), s)| (x - l) / s)
            .collect()
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let z = self.scale(q);
        let excess: f64 = z.iter().map(|v| (v - v.clamp(0.0, 1.0)).abs()).sum();
        let terms = self.scaled.rows().map(|r| {
            r.iter()
                .zip(&z)
                .map(|(x, y)| {
                    let t = (x - y.clamp(0.0, 1.0)).abs();
                    (1.5 - t + t * t).ln()
                })
                .sum::<f64>()
        });
        (self.scaled.len() as f64).ln() - log_sum_exp(terms) + excess
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(n: usize, p: usize, seed: u64) -> Points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Points::new((0..n * p).map(|_| rng.sample(StandardNormal)).collect(), p)
    }

    #[test]
    fn gmm_single_component_mean_concentrates() {
        let pts = gaussian(400, 1, 5);
        let g = Gmm::fit(&pts, 1, 1e-6, 100, &mut ChaCha8Rng::seed_from_u64(1));
        let bound = 3.0 / (400f64).sqrt();
        assert!(g.means[0][0].abs() < bound, "{}", g.means[0][0]);
        // single component: the MLE is the sample mean and population variance
        let m = pts.mean()[0];
        let v = pts.variance()[0];
        assert!((g.means[0][0] - m).abs() < 1e-12);
        assert!((g.variances[0][0] - v - 1e-6).abs() < 1e-12);
    }

    #[test]
    fn kde_matches_direct_sum() {
        let pts = Points::new(vec![0.0, 1.0, 3.0], 1);
        let k = Kde::fit(pts, 0.5);
        let q = 0.7f64;
        let dens: f64 = [0.0f64, 1.0, 3.0]
            .iter()
            .map(|x| (-(q - x).powi(2) / (2.0 * 0.25)).exp() / (0.5 * (2.0 * std::f64::consts::PI).sqrt()))
            .sum::<f64>()
            / 3.0;
        assert!((k.score(&[q]) + dens.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_column_histogram_is_one_bin() {
        let h = Histogram::fit(&[2.0, 2.0, 2.0], 10);
        assert_eq!(h.counts, vec![3.0]);
        assert_eq!(h.bin(2.0), Some(0));
        assert_eq!(h.bin(2.5), None);
    }

    #[test]
    fn ecdf_tails_on_small_column() {
        let e = Ecdf::fit(&Points::new(vec![1.0, 2.0, 3.0], 1));
        let t = e.tails(0, 2.0);
        assert!((t.left - -(3f64 / 4.0).ln()).abs() < 1e-15);
        assert!((t.right - -(3f64 / 4.0).ln()).abs() < 1e-15);
        let t = e.tails(0, 10.0);
        assert!((t.left - 0.0).abs() < 1e-15);
        assert!((t.right - -(1f64 / 4.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn qmcd_gap_scores_above_dense_region() {
        // Mass on [0, 0.5] plus one row at 1 to set the range.
        let mut v: Vec<f64> = (0..=50).map(|i| i as f64 / 100.0).collect();
        v.push(1.0);
        let q = Qmcd::fit(&Points::new(v, 1));
        assert!(q.score(&[0.75]) > q.score(&[0.25]));
        assert!(q.score(&[3.0]) > q.score(&[1.0]));
    }
}
