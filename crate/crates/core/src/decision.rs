//! Turning aligned anomaly scores into health indicators and binary labels.
//!
//! The decision function is learned from validation scores only:
//!
//! ```text
//! D(a) = max((erf((a - mu - sigma) / (sqrt(2) * sigma)) - 0.5) * 2, 0)
//! ```
//!
//! and a point is an outlier when `D(a) >= T`, with the default threshold
//! `T = 1 - (1 - erf(2 / sqrt(2))) / 2`, i.e. the standard normal CDF at 2.
//!
//! `sigma` is the population standard deviation of the validation scores.
//! Note that under this formula `D(mu + 3 sigma) ~ 0.909 < T`; the crossing
//! sits near `mu + 3.563 sigma`. The threshold can be overridden.

use libm::erf;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{AlignedScores, LabelSeries};

/// Lower bound on the learned spread.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// `1 - (1 - erf(2/sqrt(2)))/2`.
pub fn default_threshold() -> f64 {
    1.0 - (1.0 - erf(2.0 / std::f64::consts::SQRT_2)) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    pub mu: f64,
    pub sigma: f64,
    pub threshold: f64,
}

impl DecisionModel {
    pub fn new(mu: f64, sigma: f64, threshold: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || !threshold.is_finite() {
            return Err(Error::invalid("decision parameters must be finite"));
        }
        Ok(Self {
            mu,
            sigma: sigma.max(SIGMA_FLOOR),
            threshold,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Health indicator in `[0, 1]`, nondecreasing in `a_hat`.
    pub fn decide(&self, a_hat: f64) -> f64 {
        let z = (a_hat - self.mu - self.sigma) / (std::f64::consts::SQRT_2 * self.sigma);
        ((erf(z) - 0.5) * 2.0).max(0.0)
    }

    pub fn is_outlier(&self, health: f64) -> bool {
        health >= self.threshold
    }
}

/// Learns `(mu, sigma)` from validation scores; sigma is the population
/// standard deviation floored at [`SIGMA_FLOOR`].
pub fn learn_decision(validation: &AlignedScores) -> Result<DecisionModel> {
    let v = validation.as_slice();
    if v.is_empty() {
        return Err(Error::invalid("cannot learn a decision function from no scores"));
    }
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    DecisionModel::new(mu, var.sqrt(), default_threshold())
}

pub fn decide(model: &DecisionModel, a_hat: f64) -> f64 {
    model.decide(a_hat)
}

/// Per-point health indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthSeries(Vec<f64>);

impl HealthSeries {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Health indicators and labels; ties at the threshold are outliers.
pub fn health_series(model: &DecisionModel, scores: &AlignedScores) -> (HealthSeries, LabelSeries) {
    let health: Vec<f64> = scores.as_slice().iter().map(|&a| model.decide(a)).collect();
    let labels = LabelSeries::from_bools(health.iter().map(|&h| model.is_outlier(h)));
    (HealthSeries(health), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Maclaurin series of erf, summed until terms vanish.
    fn erf_series(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = x; // (-1)^n x^(2n+1) / n!
        let mut n = 0u32;
        loop {
            let contrib = term / f64::from(2 * n + 1);
            sum += contrib;
            if contrib.abs() < 1e-18 {
                break;
            }
            n += 1;
            term *= -x * x / f64::from(n);
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    fn aligned(v: Vec<f64>) -> AlignedScores {
        AlignedScores::new(v).unwrap()
    }

    #[test]
    fn erf_matches_series_oracle() {
        for i in 0..=60 {
            let x = -3.0 + 0.1 * f64::from(i);
            assert!((erf(x) - erf_series(x)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn threshold_constant() {
        let t = default_threshold();
        let oracle = 1.0 - (1.0 - erf_series(std::f64::consts::SQRT_2)) / 2.0;
        assert!((t - oracle).abs() < 1e-12);
        assert!((t - 0.9772498681).abs() < 1e-9);
        // standard normal CDF at 2 through the complementary function
        let phi2 = 0.5 * libm::erfc(-2.0 / std::f64::consts::SQRT_2);
        assert!((t - phi2).abs() < 1e-12);
        assert!(t > 0.9 && t < 1.0);
    }

    #[test]
    fn learn_examples() {
        let m = learn_decision(&aligned(vec![0.0; 4])).unwrap();
        assert_eq!((m.mu, m.sigma), (0.0, SIGMA_FLOOR));
        let m = learn_decision(&aligned(vec![1.0, 3.0])).unwrap();
        assert_eq!((m.mu, m.sigma), (2.0, 1.0));
        let m = learn_decision(&aligned(vec![2.0, 2.0, 2.0, 6.0])).unwrap();
        assert_eq!(m.mu, 3.0);
        assert!((m.sigma - 3f64.sqrt()).abs() < 1e-15);
        assert!(learn_decision(&aligned(vec![])).is_err());
    }

    #[test]
    fn decide_examples() {
        let m = DecisionModel::new(0.0, 1.0, default_threshold()).unwrap();
        assert_eq!(m.decide(1.0), 0.0);
        assert!((m.decide(1e6) - 1.0).abs() < 1e-15);
        let expected = (erf_series(std::f64::consts::SQRT_2) - 0.5) * 2.0;
        assert!((m.decide(3.0) - expected).abs() < 1e-12);
        assert!((m.decide(3.0) - 0.909_000).abs() < 1e-6);
        assert!(m.decide(3.0) < m.threshold);
    }

    #[test]
    fn health_examples() {
        let m = DecisionModel::new(1.0, 0.5, default_threshold()).unwrap();
        let (h, l) = health_series(&m, &aligned(vec![0.0, 1.0, 1.5]));
        assert!(h.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(l.count_ones(), 0);
        let (h, l) = health_series(&m, &aligned(vec![1.0 + 10.0 * 0.5]));
        assert!(h.as_slice()[0] >= m.threshold);
        assert_eq!(l.as_slice(), &[1]);
        let scores = aligned(vec![0.0, 2.5, 3.0, 1.9, 10.0]);
        let (h, l) = health_series(&m, &scores);
        for (hv, lv) in h.as_slice().iter().zip(l.as_slice()) {
            assert_eq!(*lv == 1, *hv >= m.threshold);
        }
    }

    #[test]
    fn threshold_tie_is_outlier() {
        let m = DecisionModel::new(0.0, 1.0, 0.5).unwrap();
        assert!(m.is_outlier(0.5));
    }

    proptest! {
        #[test]
        fn decide_monotone_and_bounded(
            mu in -10.0f64..10.0, sigma in 1e-3f64..10.0, a in -50.0f64..50.0, d in 0.0f64..20.0
        ) {
            let m = DecisionModel::new(mu, sigma, default_threshold()).unwrap();
            let (h1, h2) = (m.decide(a), m.decide(a + d));
            prop_assert!(h1 <= h2);
            prop_assert!((0.0..=1.0).contains(&h1) && (0.0..=1.0).contains(&h2));
        }

        #[test]
        fn labels_affine_invariant(
            v in prop::collection::vec(0.0f64..1.0, 5..40),
            t in prop::collection::vec(0.0f64..3.0, 1..40),
            c in 0.1f64..10.0, b in -5.0f64..5.0
        ) {
            let m1 = learn_decision(&aligned(v.clone())).unwrap();
            let m2 = learn_decision(&aligned(v.iter().map(|x| c * x + b).collect())).unwrap();
            prop_assume!(m1.sigma > 1e-6);
            let (h1, l1) = health_series(&m1, &aligned(t.clone()));
            let (_, l2) = health_series(&m2, &aligned(t.iter().map(|x| c * x + b).collect()));
            // skip points sitting on the threshold, where rounding decides
            for i in 0..t.len() {
                if (h1.as_slice()[i] - m1.threshold).abs() > 1e-9 {
                    prop_assert_eq!(l1.as_slice()[i], l2.as_slice()[i]);
                }
            }
        }
    }
}
