//! Nearest-neighbor detectors: KNN, LOF, COF, ABOD, SOD, Sampling, SOS, INNE.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use super::common::{dist, dot, knn, random_subset, sq_dist, Points};

/// Guard added to reachability sums so duplicates do not divide by zero.
const LRD_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Knn {
    pub points: Points,
    pub k: usize,
}

impl Knn {
    pub fn score(&self, q: &[f64]) -> f64 {
        let nn = knn(&self.points, q, self.k, None);
        nn.iter().map(|x| x.1).sum::<f64>() / nn.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Lof {
    pub points: Points,
    pub k: usize,
    pub k_dist: Vec<f64>,
    pub lrd: Vec<f64>,
}

impl Lof {
    pub fn fit(points: Points, k: usize) -> Self {
        let n = points.len();
        let neigh: Vec<Vec<(usize, f64)>> =
            (0..n).map(|i| knn(&points, points.row(i), k, Some(i))).collect();
        let k_dist: Vec<f64> = neigh.iter().map(|nn| nn.last().map_or(0.0, |x| x.1)).collect();
        let lrd = neigh.iter().map(|nn| local_reach_density(nn, &k_dist)).collect();
        Self {
            points,
            k,
            k_dist,
            lrd,
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let nn = knn(&self.points, q, self.k, None);
        let lrd_q = local_reach_density(&nn, &self.k_dist);
        let mean_lrd = nn.iter().map(|(o, _)| self.lrd[*o]).sum::<f64>() / nn.len() as f64;
        mean_lrd / lrd_q
    }
}

fn local_reach_density(nn: &[(usize, f64)], k_dist: &[f64]) -> f64 {
    let reach = nn.iter().map(|(o, d)| k_dist[*o].max(*d)).sum::<f64>() / nn.len() as f64;
    1.0 / (reach + LRD_EPS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Cof {
    pub points: Points,
    pub k: usize,
    pub ac_dist: Vec<f64>,
}

impl Cof {
    pub fn fit(points: Points, k: usize) -> Self {
        let ac_dist = (0..points.len())
            .map(|i| {
                let nn = knn(&points, points.row(i), k, Some(i));
                chaining_distance(&points, &nn)
            })
            .collect();
        Self { points, k, ac_dist }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let nn = knn(&self.points, q, self.k, None);
        let ac_q = chaining_distance(&self.points, &nn);
        let mean = nn.iter().map(|(o, _)| self.ac_dist[*o]).sum::<f64>() / nn.len() as f64;
        if ac_q == 0.0 {
            0.0
        } else {
            ac_q / (mean + LRD_EPS)
        }
    }
}

/// Average chaining distance along the set-based nearest path from a point
/// through its neighbors; `nn` holds the neighbors and their distances to it.
fn chaining_distance(points: &Points, nn: &[(usize, f64)]) -> f64 {
    let k = nn.len();
    if k == 0 {
        return 0.0;
    }
    // distance of each unvisited neighbor to the visited set
    let mut to_set: Vec<f64> = nn.iter().map(|x| x.1).collect();
    let mut visited = vec![false; k];
    let mut total = 0.0;
    let kf = k as f64;
    for step in 1..=k {
        let next = (0..k)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| to_set[a].total_cmp(&to_set[b]).then(a.cmp(&b)))
            .expect("unvisited neighbor");
        let cost = to_set[next];
        total += 2.0 * (kf + 1.0 - step as f64) / (kf * (kf + 1.0)) * cost;
        visited[next] = true;
        let row = points.row(nn[next].0);
        for j in 0..k {
            if !visited[j] {
                to_set[j] = to_set[j].min(dist(row, points.row(nn[j].0)));
            }
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Abod {
    pub points: Points,
    pub k: usize,
}

impl Abod {
    /// Negative weighted variance of angle factors over the k nearest
    /// neighbors at nonzero distance (an exact copy of the query is skipped).
    pub fn score(&self, q: &[f64]) -> f64 {
        let nn = knn(&self.points, q, self.k + 1, None);
        let vecs: Vec<Vec<f64>> = nn
            .iter()
            .filter(|(_, d)| *d > 1e-12)
            .take(self.k)
            .map(|(o, _)| self.points.row(*o).iter().zip(q).map(|(a, b)| a - b).collect())
            .collect();
        let norms: Vec<f64> = vecs.iter().map(|v| dot(v, v)).collect();
        let (mut sw, mut swt, mut swt2) = (0.0, 0.0, 0.0);
        for a in 0..vecs.len() {
            for b in a + 1..vecs.len() {
                let (na, nb) = (norms[a], norms[b]);
                let w = 1.0 / (na * nb).sqrt();
                let t = dot(&vecs[a], &vecs[b]) / (na * nb);
                sw += w;
                swt += w * t;
                swt2 += w * t * t;
            }
        }
        if sw == 0.0 {
            return 0.0;
        }
        let mean = swt / sw;
        -(swt2 / sw - mean * mean).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Sod {
    pub points: Points,
    /// Size of the reference set.
    pub k: usize,
    /// Size of the neighborhoods used for shared-neighbor similarity.
    pub n_neighbors: usize,
    pub alpha: f64,
    pub neighborhoods: Vec<Vec<usize>>,
}

impl Sod {
    pub fn fit(points: Points, k: usize, alpha: f64) -> Self {
        let n_neighbors = (2 * k).min(points.len() - 1).max(1);
        let neighborhoods = (0..points.len())
            .map(|i| {
                knn(&points, points.row(i), n_neighbors, Some(i))
                    .into_iter()
                    .map(|x| x.0)
                    .collect()
            })
            .collect();
        Self {
            points,
            k,
            n_neighbors,
            alpha,
            neighborhoods,
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let nn = knn(&self.points, q, self.n_neighbors, None);
        let own: HashSet<usize> = nn.iter().map(|x| x.0).collect();
        let mut cand: Vec<(usize, usize, f64)> = self
            .neighborhoods
            .iter()
            .enumerate()
            .map(|(o, nb)| {
                let shared = nb.iter().filter(|i| own.contains(i)).count();
                (o, shared, sq_dist(q, self.points.row(o)))
            })
            .collect();
        cand.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)));
        let reference: Vec<usize> = cand.iter().take(self.k).map(|c| c.0).collect();
        let r = self.points.subset(&reference);
        let mean = r.mean();
        let var = r.variance();
        let total = var.iter().sum::<f64>() / var.len() as f64;
        let mut sum = 0.0;
        let mut selected = 0usize;
        for d in 0..q.len() {
            if var[d] < self.alpha * total || total == 0.0 {
                sum += (q[d] - mean[d]).powi(2);
                selected += 1;
            }
        }
        if selected == 0 {
            0.0
        } else {
            sum.sqrt() / selected as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Sampling {
    pub subset: Points,
}

impl Sampling {
    pub fn fit<R: Rng>(points: &Points, size: usize, rng: &mut R) -> Self {
        let idx = random_subset(rng, points.len(), size);
        Self {
            subset: points.subset(&idx),
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        self.subset
            .rows()
            .map(|r| sq_dist(q, r))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Stochastic outlier selection: each training point binds to others with
/// perplexity-calibrated affinities; a query's outlier probability is the
/// chance that no training point binds to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Sos {
    pub points: Points,
    pub beta: Vec<f64>,
    /// Per-point offset subtracted from squared distances before exponentiating.
    pub shift: Vec<f64>,
    /// Shifted affinity mass of each training point to the other training points.
    pub mass: Vec<f64>,
}

impl Sos {
    pub fn fit(points: Points, perplexity: f64) -> Self {
        let n = points.len();
        let target = perplexity.ln();
        let mut beta = vec![1.0; n];
        let mut shift = vec![0.0; n];
        let mut mass = vec![0.0; n];
        for i in 0..n {
            let d2: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| sq_dist(points.row(i), points.row(j)))
                .collect();
            let m = d2.iter().copied().fold(f64::INFINITY, f64::min);
            let d2: Vec<f64> = d2.iter().map(|d| d - m).collect();
            let (b, z) = calibrate_beta(&d2, target);
            beta[i] = b;
            shift[i] = m;
            mass[i] = z;
        }
        Self {
            points,
            beta,
            shift,
            mass,
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let mut log_p = 0.0;
        for (j, r) in self.points.rows().enumerate() {
            let a = (-self.beta[j] * (sq_dist(q, r) - self.shift[j])).exp();
            let b = a / (self.mass[j] + a);
            log_p += (-b).ln_1p();
        }
        log_p.exp()
    }
}

/// Binary search on the precision so the affinity distribution's entropy
/// matches `target` (nats). Returns `(beta, normalizer)`.
fn calibrate_beta(d2: &[f64], target: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut beta = 1.0;
    let mut z = 0.0;
    for _ in 0..100 {
        z = d2.iter().map(|d| (-beta * d).exp()).sum::<f64>();
        let weighted = d2.iter().map(|d| d * (-beta * d).exp()).sum::<f64>();
        let h = z.ln() + beta * weighted / z;
        let diff = h - target;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    (beta, z)
}

/// Isolation using nearest-neighbor ensembles of random hyperspheres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Inne {
    pub ensembles: Vec<InneSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct InneSet {
    pub centers: Points,
    pub radius: Vec<f64>,
    /// Radius of each center's nearest neighbor center.
    pub neighbor_radius: Vec<f64>,
}

impl Inne {
    pub fn fit<R: Rng>(points: &Points, estimators: usize, samples: usize, rng: &mut R) -> Self {
        let ensembles = (0..estimators)
            .map(|_| {
                let idx = random_subset(rng, points.len(), samples);
                let centers = points.subset(&idx);
                let m = centers.len();
                let mut radius = vec![0.0; m];
                let mut nearest = vec![0usize; m];
                for i in 0..m {
                    let nn = knn(&centers, centers.row(i), 1, Some(i));
                    radius[i] = nn[0].1;
                    nearest[i] = nn[0].0;
                }
                let neighbor_radius = nearest.iter().map(|&j| radius[j]).collect();
                InneSet {
                    centers,
                    radius,
                    neighbor_radius,
                }
            })
            .collect();
        Self { ensembles }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let total: f64 = self
            .ensembles
            .iter()
            .map(|set| {
                let cover = (0..set.centers.len())
                    .filter(|&c| dist(q, set.centers.row(c)) <= set.radius[c])
                    .min_by(|&a, &b| set.radius[a].total_cmp(&set.radius[b]).then(a.cmp(&b)));
                match cover {
                    None => 1.0,
                    Some(c) if set.radius[c] == 0.0 => 0.0,
                    Some(c) => 1.0 - set.neighbor_radius[c] / set.radius[c],
                }
            })
            .sum();
        total / self.ensembles.len() as f64
    }
}
