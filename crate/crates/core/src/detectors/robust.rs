//! Location/scale detectors: MAD, MSD, MCD.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::common::{cholesky_with_ridge, mean_cov, random_subset, whitened_sq_norm, Points};

/// Ridge added to covariance estimates.
pub const COV_RIDGE: f64 = 1e-9;
/// Consistency constant turning a MAD into a normal standard deviation.
const MAD_SCALE: f64 = 1.4826;
const SCALE_FLOOR: f64 = 1e-9;

/// Per-column center and scale; score is the largest standardized deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CenterScale {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl CenterScale {
    pub fn mad(points: &Points) -> Self {
        let mut center = Vec::with_capacity(points.width);
        let mut scale = Vec::with_capacity(points.width);
        for d in 0..points.width {
            let col = points.column_sorted(d);
            let med = median_sorted(&col);
            let mut dev: Vec<f64> = col.iter().map(|x| (x - med).abs()).collect();
            dev.sort_by(f64::total_cmp);
            center.push(med);
            scale.push((median_sorted(&dev) * MAD_SCALE).max(SCALE_FLOOR));
        }
        Self { center, scale }
    }

    pub fn msd(points: &Points) -> Self {
        Self {
            center: points.mean(),
            scale: points
                .variance()
                .iter()
                .map(|v| v.sqrt().max(SCALE_FLOOR))
                .collect(),
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        q.iter()
            .zip(&self.center)
            .zip(&self.scale)
            .map(|((x, c), s)| (x - c).abs() / s)
            .fold(0.0, f64::max)
    }
}

pub(crate) fn median_sorted(x: &[f64]) -> f64 {
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        (x[n / 2 - 1] + x[n / 2]) / 2.0
    }
}

/// Minimum covariance determinant estimate via random starts and
/// concentration steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Mcd {
    pub location: Vec<f64>,
    /// Row-major lower Cholesky factor of the robust covariance.
    pub chol: Vec<f64>,
}

impl Mcd {
    pub fn fit<R: Rng>(points: &Points, support: f64, starts: usize, rng: &mut R) -> Self {
        let n = points.len();
        let h = ((support * n as f64).ceil() as usize).clamp(1, n);
        let mut best: Option<(f64, DVector<f64>, DMatrix<f64>)> = None;
        for _ in 0..starts.max(1) {
            let mut subset = random_subset(rng, n, h);
            let mut state = concentrate(points, &subset);
            for _ in 0..30 {
                let next = smallest_distances(points, &state.0, &state.2, h);
                if next == subset {
                    break;
                }
                subset = next;
                state = concentrate(points, &subset);
            }
            let logdet = 2.0 * state.2.diagonal().iter().map(|d| d.ln()).sum::<f64>();
            if best.as_ref().is_none_or(|b| logdet < b.0) {
                best = Some((logdet, state.0, state.2));
            }
        }
        let (_, loc, l) = best.expect("at least one start");
        Self {
            location: loc.iter().copied().collect(),
            chol: l.transpose().iter().copied().collect(),
        }
    }

    /// Mahalanobis distance to the robust location.
    pub fn score(&self, q: &[f64]) -> f64 {
        let p = self.location.len();
        let l = DMatrix::from_row_slice(p, p, &self.chol);
        let v = DVector::from_iterator(p, q.iter().zip(&self.location).map(|(x, m)| x - m));
        whitened_sq_norm(&l, &v).sqrt()
    }
}

fn concentrate(points: &Points, subset: &[usize]) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (mean, cov) = mean_cov(points, subset);
    let l = cholesky_with_ridge(&cov, COV_RIDGE);
    (mean, cov, l)
}

fn smallest_distances(points: &Points, mean: &DVector<f64>, l: &DMatrix<f64>, h: usize) -> Vec<usize> {
    let mut d: Vec<(usize, f64)> = points
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let v = DVector::from_column_slice(r) - mean;
            (i, whitened_sq_norm(l, &v))
        })
        .collect();
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut idx: Vec<usize> = d.into_iter().take(h).map(|x| x.0).collect();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mad_examples() {
        let p = Points::new(vec![1.0, 2.0, 3.0, 4.0, 100.0], 1);
        let m = CenterScale::mad(&p);
        assert_eq!(m.center, vec![3.0]);
        // deviations 2,1,0,1,97 -> median 1
        assert!((m.scale[0] - 1.4826).abs() < 1e-12);
        assert!((m.score(&[6.0]) - 3.0 / 1.4826).abs() < 1e-12);
    }

    #[test]
    fn msd_constant_column_is_finite() {
        let p = Points::new(vec![2.0, 2.0, 2.0], 1);
        let m = CenterScale::msd(&p);
        assert!(m.score(&[3.0]).is_finite());
        assert_eq!(m.score(&[2.0]), 0.0);
    }

    #[test]
    fn mcd_ignores_gross_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data = Vec::new();
        for _ in 0..90 {
            data.push(rng.sample::<f64, _>(rand_distr::StandardNormal));
            data.push(rng.sample::<f64, _>(rand_distr::StandardNormal));
        }
        for _ in 0..10 {
            data.push(50.0);
            data.push(50.0);
        }
        let p = Points::new(data, 2);
        let m = Mcd::fit(&p, 0.75, 10, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(m.location.iter().all(|x| x.abs() < 0.5), "{:?}", m.location);
        assert!(m.score(&[50.0, 50.0]) > 20.0);
    }
}
