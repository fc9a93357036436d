//! Helpers shared by the detectors: point storage, distances, neighbor search,
//! Euclidean k-means and small dense linear algebra.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Training rows stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Points {
    pub data: Vec<f64>,
    pub width: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, width: usize) -> Self {
        Self { data, width }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.width)
    }

    pub fn subset(&self, idx: &[usize]) -> Points {
        let mut data = Vec::with_capacity(idx.len() * self.width);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Points::new(data, self.width)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.width];
        for r in self.rows() {
            for (a, v) in m.iter_mut().zip(r) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Population variance per column.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut v = vec![0.0; self.width];
        for r in self.rows() {
            for ((a, x), m) in v.iter_mut().zip(r).zip(&mean) {
                *a += (x - m) * (x - m);
            }
        }
        let n = self.len() as f64;
        v.iter_mut().for_each(|a| *a /= n);
        v
    }

    pub fn column_sorted(&self, col: usize) -> Vec<f64> {
        let mut c: Vec<f64> = self.rows().map(|r| r[col]).collect();
        c.sort_by(f64::total_cmp);
        c
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The `k` nearest rows to `q` as `(index, distance)`, ascending by distance
/// then index. `exclude` drops one row (the query itself during fitting).
pub(crate) fn knn(points: &Points, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .rows()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, r)| (i, sq_dist(q, r)))
        .collect();
    let k = k.min(all.len());
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < all.len() && k > 0 {
        all.select_nth_unstable_by(k - 1, cmp);
    }
    all.truncate(k);
    all.sort_by(cmp);
    all.into_iter().map(|(i, d)| (i, d.sqrt())).collect()
}

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Euclidean k-means (k-means++ seeding, Lloyd iterations).
pub(crate) fn kmeans<R: Rng>(points: &Points, k: usize, max_iter: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let k = k.min(n).max(1);
    let mut centroids: Vec<Vec<f64>> = vec![points.row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = points.rows().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in nearest.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, r) in points.rows().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(r, &c));
        }
        centroids.push(c);
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, r) in points.rows().enumerate() {
            let (best, d) = nearest_centroid(&centroids, r);
            dists[i] = d;
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; points.width]; k];
        let mut counts = vec![0usize; k];
        for (i, r) in points.rows().enumerate() {
            counts[assign[i]] += 1;
            for (a, v) in sums[assign[i]].iter_mut().zip(r) {
                *a += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed from the point farthest from its centroid
                let far = (0..n).max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    centroids[c] = points.row(i).to_vec();
                    dists[i] = 0.0;
                    changed = true;
                }
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    centroids
}

pub(crate) fn nearest_centroid(centroids: &[Vec<f64>], q: &[f64]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(c, cen)| (c, dist(cen, q)))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
}

/// Sample covariance (population normalization) of selected rows, plus mean.
pub(crate) fn mean_cov(points: &Points, idx: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let p = points.width;
    let h = idx.len() as f64;
    let mut mean = DVector::zeros(p);
    for &i in idx {
        mean += DVector::from_column_slice(points.row(i));
    }
    mean /= h;
    let mut cov = DMatrix::zeros(p, p);
    for &i in idx {
        let c = DVector::from_column_slice(points.row(i)) - &mean;
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov /= h;
    (mean, cov)
}

/// Lower Cholesky factor of `m + ridge*I`, growing the ridge until it succeeds.
pub(crate) fn cholesky_with_ridge(m: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut r = ridge;
    loop {
        let a = m + DMatrix::identity(n, n) * r;
        if let Some(c) = a.cholesky() {
            return c.l();
        }
        r = if r == 0.0 { 1e-12 } else { r * 10.0 };
    }
}

/// `|L^{-1} v|^2` for a lower-triangular factor `L`.
pub(crate) fn whitened_sq_norm(l: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    l.solve_lower_triangular(v)
        .map(|z| z.norm_squared())
        .unwrap_or(f64::MAX)
}

pub(crate) fn random_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx = sample(rng, n, k.min(n)).into_vec();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn knn_orders_by_distance_then_index() {
        let p = Points::new(vec![0.0, 2.0, 1.0, -1.0, 5.0], 1);
        let nn = knn(&p, &[0.0], 3, None);
        assert_eq!(nn.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 2, 3]);
        let nn = knn(&p, &[0.0], 2, Some(0));
        assert_eq!(nn.iter().map(|x| x.0).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let p = Points::new(vec![0.0, 0.0, 2.0, 0.0], 2);
        let c = kmeans(&p, 1, 10, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(c, vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
