//! Shape-based distance (SBD) and k-means clustering under SBD.
//!
//! `SBD(x, y) = 1 - max_s CC_s(x, y) / (|x| |y|)` where `CC_s` is the
//! zero-padded cross-correlation at integer shift `s`. Sequences are used as
//! given (no z-normalization). The result lies in `[0, 2]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length at or above which cross-correlation goes through the FFT.
pub const FFT_CROSSOVER: usize = 256;

/// A univariate real sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence(Vec<f64>);

impl Sequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sequence must be nonempty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sequence contains non-finite values"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `CC_s = sum_i x[i] * y[i - s]` for `s` in `-(m-1)..=(m-1)`, index `s + m - 1`.
pub fn cross_correlation_direct(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut out = vec![0.0; 2 * m - 1];
    for (idx, slot) in out.iter_mut().enumerate() {
        let s = idx as isize - (m as isize - 1);
        let lo = s.max(0) as usize;
        let hi = (m as isize + s.min(0)) as usize;
        *slot = (lo..hi).map(|i| x[i] * y[(i as isize - s) as usize]).sum();
    }
    out
}

/// Same layout as [`cross_correlation_direct`], computed via FFT.
pub fn cross_correlation_fft(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let len = (2 * m - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&a| Complex::new(a, 0.0)).collect();
        buf.resize(len, Complex::new(0.0, 0.0));
        buf
    };
    let mut fx = pad(x);
    let mut fy = pad(y);
    fwd.process(&mut fx);
    fwd.process(&mut fy);
    let mut prod: Vec<Complex<f64>> = fx.iter().zip(&fy).map(|(a, b)| a * b.conj()).collect();
    inv.process(&mut prod);
    let scale = len as f64;
    (0..2 * m - 1)
        .map(|idx| {
            let s = idx as isize - (m as isize - 1);
            let k = if s >= 0 { s as usize } else { (len as isize + s) as usize };
            prod[k].re / scale
        })
        .collect()
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("empty sequences"));
    }
    Ok(())
}

/// Best shift and its normalized cross-correlation. Two all-zero inputs have
/// NCC 1 (identical degenerate shapes); one all-zero input has NCC 0.
fn best_shift_with(cc: impl Fn(&[f64], &[f64]) -> Vec<f64>, x: &[f64], y: &[f64]) -> (isize, f64) {
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 && ny == 0.0 {
        return (0, 1.0);
    }
    if nx == 0.0 || ny == 0.0 {
        return (0, 0.0);
    }
    let m = x.len() as isize;
    let c = cc(x, y);
    let (idx, best) = c
        .iter()
        .enumerate()
        .fold((m as usize - 1, f64::NEG_INFINITY), |acc, (i, &v)| {
            if v > acc.1 {
                (i, v)
            } else {
                acc
            }
        });
    (idx as isize - (m - 1), best / (nx * ny))
}

fn ncc_to_sbd(ncc: f64) -> f64 {
    (1.0 - ncc).clamp(0.0, 2.0)
}

/// SBD by explicit shift enumeration, `O(m^2)`.
pub fn sbd_direct(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(ncc_to_sbd(best_shift_with(cross_correlation_direct, x, y).1))
}

/// SBD through FFT cross-correlation, `O(m log m)`.
pub fn sbd_fft(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(ncc_to_sbd(best_shift_with(cross_correlation_fft, x, y).1))
}

fn best_shift(x: &[f64], y: &[f64]) -> (isize, f64) {
    if x.len() >= FFT_CROSSOVER {
        best_shift_with(cross_correlation_fft, x, y)
    } else {
        best_shift_with(cross_correlation_direct, x, y)
    }
}

/// Shape-based distance; picks the direct or FFT path by length.
pub fn sbd(x: &Sequence, y: &Sequence) -> Result<f64> {
    sbd_slices(x.as_slice(), y.as_slice())
}

pub fn sbd_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(ncc_to_sbd(best_shift(x, y).1))
}

/// `y` shifted right by `s` with zero fill.
pub fn shift_zero_padded(y: &[f64], s: isize) -> Vec<f64> {
    let m = y.len() as isize;
    (0..m)
        .map(|i| {
            let j = i - s;
            if (0..m).contains(&j) {
                y[j as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Result of k-means under SBD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbdClustering {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Sequence>,
    /// Mean member-to-centroid SBD per cluster.
    pub intra: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Sum of member-to-centroid SBD after initialization and each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl SbdClustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

fn aligned_mean(members: &[&[f64]], reference: &[f64]) -> Vec<f64> {
    let m = reference.len();
    let mut acc = vec![0.0; m];
    for y in members {
        let (s, _) = best_shift(reference, y);
        for (a, v) in acc.iter_mut().zip(shift_zero_padded(y, s)) {
            *a += v;
        }
    }
    let n = members.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    ncc_to_sbd(best_shift(x, y).1)
}

/// Lloyd-style k-means with SBD and shift-aligned mean centroids.
///
/// Initialization is k-means++ under SBD. A centroid update is kept only if it
/// does not raise its cluster's total SBD, so the objective never increases.
/// An empty cluster is re-seeded with the point farthest from its centroid.
pub fn sbd_kmeans(seqs: &[Sequence], k: usize, seed: u64, max_iter: usize) -> Result<SbdClustering> {
    let n = seqs.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in 1..={n}")));
    }
    let m = seqs[0].len();
    if seqs.iter().any(|s| s.len() != m) {
        return Err(Error::invalid("sequences must share a length"));
    }
    let data: Vec<&[f64]> = seqs.iter().map(Sequence::as_slice).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = data.iter().map(|x| dist(data[chosen[0]], x)).collect();
    while chosen.len() < k {
        let weights: Vec<f64> = nearest
            .iter()
            .enumerate()
            .map(|(i, d)| if chosen.contains(&i) { 0.0 } else { d * d })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            if chosen.contains(&pick) {
                (0..n).rev().find(|i| weights[*i] > 0.0).unwrap_or(pick)
            } else {
                pick
            }
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, x) in data.iter().enumerate() {
            nearest[i] = nearest[i].min(dist(data[next], x));
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| data[i].to_vec()).collect();

    let assign = |centroids: &[Vec<f64>]| -> (Vec<usize>, Vec<f64>) {
        data.iter()
            .map(|x| {
                centroids
                    .iter()
                    .enumerate()
                    .map(|(c, cen)| (c, dist(cen, x)))
                    .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
            })
            .unzip()
    };

    let (mut assignments, mut dists) = assign(&centroids);
    let mut trace = vec![dists.iter().sum::<f64>()];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        // refill empty clusters from the worst-fitting points
        for c in 0..k {
            if !assignments.contains(&c) {
                let far = (0..n)
                    .filter(|&i| assignments.iter().filter(|&&a| a == assignments[i]).count() > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    centroids[c] = data[i].to_vec();
                    assignments[i] = c;
                    dists[i] = 0.0;
                }
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64]> = (0..n).filter(|&i| assignments[i] == c).map(|i| data[i]).collect();
            if members.is_empty() {
                continue;
            }
            let candidate = aligned_mean(&members, centroid);
            let old: f64 = members.iter().map(|x| dist(centroid, x)).sum();
            let new: f64 = members.iter().map(|x| dist(&candidate, x)).sum();
            if new <= old {
                *centroid = candidate;
            }
        }
        let (next, next_d) = assign(&centroids);
        trace.push(next_d.iter().sum());
        let changed = next != assignments;
        assignments = next;
        dists = next_d;
        if !changed {
            break;
        }
    }

    let mut sizes = vec![0usize; k];
    let mut sums = vec![0.0; k];
    for (i, &c) in assignments.iter().enumerate() {
        sizes[c] += 1;
        sums[c] += dists[i];
    }
    let intra = sums
        .iter()
        .zip(&sizes)
        .map(|(s, &z)| if z > 0 { s / z as f64 } else { f64::INFINITY })
        .collect();
    Ok(SbdClustering {
        assignments,
        centroids: centroids.into_iter().map(Sequence).collect(),
        intra,
        sizes,
        objective_trace: trace,
        iterations,
    })
}

/// Cluster with the smallest mean member-to-centroid SBD; ties go to the larger
/// cluster, then the lower index.
pub fn most_concentrated_cluster(c: &SbdClustering) -> usize {
    most_concentrated_cluster_with_min_size(c, 0).unwrap_or(0)
}

/// As [`most_concentrated_cluster`], restricted to clusters with at least
/// `min_size` members.
pub fn most_concentrated_cluster_with_min_size(c: &SbdClustering, min_size: usize) -> Option<usize> {
    (0..c.intra.len())
        .filter(|&i| c.sizes.get(i).copied().unwrap_or(0) >= min_size)
        .min_by(|&a, &b| {
            c.intra[a]
                .total_cmp(&c.intra[b])
                .then(c.sizes[b].cmp(&c.sizes[a]))
                .then(a.cmp(&b))
        })
}
