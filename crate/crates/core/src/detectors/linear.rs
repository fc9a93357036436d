//! Linear-model detectors: PCA reconstruction error, Cook's distance and the
//! linear forecaster.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::common::Points;

/// Ridge on normal equations.
const NORMAL_RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Pca {
    pub mean: Vec<f64>,
    /// Retained principal directions, each of length `width`.
    pub components: Vec<Vec<f64>>,
}

impl Pca {
    /// Keeps the fewest leading components whose variance reaches `variance`
    /// of the total, never all of them, so a residual subspace remains.
    pub fn fit(points: &Points, variance: f64) -> Self {
        let p = points.width;
        let idx: Vec<usize> = (0..points.len()).collect();
        let (mean, cov) = super::common::mean_cov(points, &idx);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        let mut q = 0;
        if total > 0.0 {
            let mut acc = 0.0;
            for &j in &order {
                if acc >= variance * total {
                    break;
                }
                acc += eig.eigenvalues[j].max(0.0);
                q += 1;
            }
        }
        let q = q.min(p.saturating_sub(1));
        let components = order[..q]
            .iter()
            .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
            .collect();
        Self {
            mean: mean.iter().copied().collect(),
            components,
        }
    }

    /// Squared distance to the principal subspace.
    pub fn score(&self, q: &[f64]) -> f64 {
        let mut r: Vec<f64> = q.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for c in &self.components {
            let proj: f64 = r.iter().zip(c).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(c).for_each(|(a, b)| *a -= proj * b);
        }
        r.iter().map(|x| x * x).sum()
    }
}

/// Ridge least squares of `targets` on `[1, inputs]`. Returns the coefficient
/// matrix (rows = inputs + 1) and the inverse Gram matrix.
fn least_squares(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = inputs.nrows();
    let design = DMatrix::from_fn(n, inputs.ncols() + 1, |i, j| if j == 0 { 1.0 } else { inputs[(i, j - 1)] });
    let p = design.ncols();
    let mut gram = design.transpose() * &design;
    let mut ridge = NORMAL_RIDGE;
    let inv = loop {
        let a = &gram + DMatrix::identity(p, p) * ridge;
        if let Some(c) = a.cholesky() {
            break c.inverse();
        }
        ridge *= 10.0;
    };
    gram = inv;
    let beta = &gram * design.transpose() * targets;
    (beta, gram)
}

fn with_intercept(x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len() + 1, std::iter::once(1.0).chain(x.iter().copied()))
}

/// Cook's distance of a query against a fit of the last row coordinate on
/// the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Cooks {
    pub beta: Vec<f64>,
    /// Row-major inverse Gram matrix, `(width) x (width)` including intercept.
    pub gram_inv: Vec<f64>,
    pub s2: f64,
}

impl Cooks {
    pub fn fit(points: &Points) -> Self {
        let n = points.len();
        let p = points.width;
        let inputs = DMatrix::from_fn(n, p - 1, |i, j| points.row(i)[j]);
        let targets = DMatrix::from_fn(n, 1, |i, _| points.row(i)[p - 1]);
        let (beta, gram_inv) = least_squares(&inputs, &targets);
        let beta: Vec<f64> = beta.column(0).iter().copied().collect();
        let rss: f64 = points
            .rows()
            .map(|r| {
                let e = r[p - 1] - predict(&beta, &r[..p - 1]);
                e * e
            })
            .sum();
        let s2 = (rss / n.saturating_sub(p).max(1) as f64).max(1e-12);
        Self {
            beta,
            gram_inv: gram_inv.transpose().iter().copied().collect(),
            s2,
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let p = q.len();
        let x = with_intercept(&q[..p - 1]);
        let g = DMatrix::from_row_slice(p, p, &self.gram_inv);
        let h = x.dot(&(&g * &x)).max(0.0);
        let e = q[p - 1] - predict(&self.beta, &q[..p - 1]);
        e * e * h / (p as f64 * self.s2 * (1.0 + h))
    }
}

fn predict(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// Predicts the last time step of every dimension from the preceding steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Forecaster {
    pub window: usize,
    pub dims: usize,
    /// Row-major `(inputs + 1) x dims` coefficients.
    pub beta: Vec<f64>,
}

impl Forecaster {
    fn split(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = self.window;
        let mut inputs = Vec::with_capacity((w - 1) * self.dims);
        let mut targets = Vec::with_capacity(self.dims);
        for d in 0..self.dims {
            inputs.extend_from_slice(&q[d * w..d * w + w - 1]);
            targets.push(q[d * w + w - 1]);
        }
        (inputs, targets)
    }

    pub fn fit(points: &Points, window: usize, dims: usize) -> Self {
        let mut me = Self {
            window,
            dims,
            beta: Vec::new(),
        };
        let n = points.len();
        let m = (window - 1) * dims;
        let mut inputs = DMatrix::zeros(n, m);
        let mut targets = DMatrix::zeros(n, dims);
        for (i, r) in points.rows().enumerate() {
            let (x, y) = me.split(r);
            inputs.row_mut(i).copy_from_slice(&x);
            targets.row_mut(i).copy_from_slice(&y);
        }
        let (beta, _) = least_squares(&inputs, &targets);
        me.beta = beta.transpose().iter().copied().collect();
        me
    }

    /// Euclidean norm of the prediction error at the window's last step.
    pub fn score(&self, q: &[f64]) -> f64 {
        let (x, y) = self.split(q);
        let m = x.len() + 1;
        let beta = DMatrix::from_row_slice(m, self.dims, &self.beta);
        let pred = beta.transpose() * with_intercept(&x);
        y.iter()
            .zip(pred.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forecaster_recovers_linear_recurrence() {
        // a sinusoid obeys x_t = 2 cos(w) x_{t-1} - x_{t-2}
        let w = 0.3f64;
        let series: Vec<f64> = (0..60).map(|t| (w * f64::from(t)).sin()).collect();
        let rows: Vec<f64> = series.windows(3).flatten().copied().collect();
        let f = Forecaster::fit(&Points::new(rows, 3), 3, 1);
        let q: Vec<f64> = (0..3).map(|t| 2.0 * (w * f64::from(t) + 1.1).sin()).collect();
        assert!(f.score(&q) < 1e-4, "{}", f.score(&q));
        let mut bad = q.clone();
        bad[2] += 1.0;
        assert!((f.score(&bad) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn pca_residual_of_line_data() {
        // points on y = x: one component explains everything
        let rows: Vec<f64> = (0..10).flat_map(|i| [f64::from(i), f64::from(i)]).collect();
        let p = Pca::fit(&Points::new(rows, 2), 0.9);
        assert_eq!(p.components.len(), 1);
        assert!(p.score(&[3.0, 3.0]) < 1e-18);
        // residual of (1,-1) about mean (4.5,4.5): orthogonal part has norm^2 = 2
        assert!((p.score(&[5.5, 3.5]) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cooks_zero_for_points_on_the_fit() {
        let rows: Vec<f64> = (0..10).flat_map(|i| [f64::from(i), 2.0 * f64::from(i) + 1.0]).collect();
        let c = Cooks::fit(&Points::new(rows, 2));
        assert!(c.score(&[4.0, 9.0]) < 1e-9);
        assert!(c.score(&[4.0, 20.0]) > 1.0);
    }
}
