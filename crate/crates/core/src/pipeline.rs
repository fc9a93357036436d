//! Training on a standard series and testing unseen series.
//!
//! Training splits the standard series contiguously into a training prefix and
//! a validation suffix, fits the normalizer and detector on the prefix, scores
//! the validation windows and learns the decision function from those scores.
//! Windows never straddle the split.

use serde::{Deserialize, Serialize};

use crate::decision::{health_series, learn_decision, DecisionModel, HealthSeries};
use crate::detectors::{self, DetectorSpec, FittedDetector};
use crate::error::{Error, Result};
use crate::preprocess::{
    acf_window_length, align_scores, extract_windows, fft_window_length, fit_normalizer, Normalizer,
    ScoreAlignment,
};
use crate::series::{AlignedScores, LabelSeries, TimeSeries, WindowConfig, WindowSelector};

/// Version tag written into serialized pipelines.
pub const FORMAT_VERSION: u32 = 1;

pub const DEFAULT_SPLIT: f64 = 0.7;

/// Largest window the ACF/FFT selectors may choose.
pub const DEFAULT_MAX_WINDOW: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: WindowSelector,
    pub stride: usize,
    /// Upper bound for data-driven window selection.
    pub max_window: usize,
    pub detector: DetectorSpec,
    pub split_fraction: f64,
    /// Seeds the detector; overrides the seed inside `detector`.
    pub seed: u64,
    /// Overrides the default decision threshold.
    pub threshold: Option<f64>,
}

impl PipelineConfig {
    pub fn new(detector: DetectorSpec, window: WindowSelector) -> Self {
        Self {
            window,
            stride: 1,
            max_window: DEFAULT_MAX_WINDOW,
            detector,
            split_fraction: DEFAULT_SPLIT,
            seed: 0,
            threshold: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold must lie in [0, 1], got {t}")));
            }
        }
        self.detector.validate()
    }
}

/// Contiguous split at `floor(fraction * n)`.
pub fn split_series(series: &TimeSeries, fraction: f64) -> Result<(TimeSeries, TimeSeries)> {
    let n = series.len();
    let cut = (fraction * n as f64).floor() as usize;
    if cut == 0 || cut >= n {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    Ok((series.slice(0, cut)?, series.slice(cut, n)?))
}

/// Everything needed to test new series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub format_version: u32,
    pub dims: usize,
    pub normalizer: Normalizer,
    pub window: WindowConfig,
    pub alignment: ScoreAlignment,
    pub detector: FittedDetector,
    pub decision: DecisionModel,
}

/// Per-point outputs of testing one series.
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutput {
    pub scores: AlignedScores,
    pub health: HealthSeries,
    pub labels: LabelSeries,
}

fn resolve_window(cfg: &PipelineConfig, train: &TimeSeries) -> Result<WindowConfig> {
    let length = match cfg.window {
        WindowSelector::Fixed(w) => w,
        WindowSelector::Acf => acf_window_length(train, cfg.max_window)?,
        WindowSelector::Fft => fft_window_length(train, cfg.max_window)?,
    };
    Ok(WindowConfig {
        length,
        stride: cfg.stride,
        selector: cfg.window,
    })
}

pub fn train(standard: &TimeSeries, cfg: &PipelineConfig) -> Result<TrainedPipeline> {
    cfg.validate()?;
    let (x_train, x_val) = split_series(standard, cfg.split_fraction)?;
    let normalizer = fit_normalizer(&x_train);
    let y_train = normalizer.apply(&x_train)?;
    let y_val = normalizer.apply(&x_val)?;
    let window = resolve_window(cfg, &y_train)?;
    let shortest = x_train.len().min(x_val.len());
    if window.length > shortest {
        return Err(Error::TooShort {
            needed: window.length,
            got: shortest,
        });
    }
    let w_train = extract_windows(&y_train, window)?;
    let w_val = extract_windows(&y_val, window)?;
    let spec = DetectorSpec {
        seed: cfg.seed,
        ..cfg.detector.clone()
    };
    let detector = detectors::fit(&spec, &w_train)?;
    let alignment = spec.id.alignment();
    let val_scores = detectors::score(&detector, &w_val)?;
    let aligned = align_scores(&val_scores, window, x_val.len(), alignment)?;
    let mut decision = learn_decision(&aligned)?;
    if let Some(t) = cfg.threshold {
        decision = decision.with_threshold(t);
    }
    Ok(TrainedPipeline {
        format_version: FORMAT_VERSION,
        dims: standard.dims(),
        normalizer,
        window,
        alignment,
        detector,
        decision,
    })
}

impl TrainedPipeline {
    /// Aligned anomaly scores of `series` before the decision function.
    pub fn score(&self, series: &TimeSeries) -> Result<AlignedScores> {
        if series.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: series.dims(),
            });
        }
        if series.len() < self.window.length {
            return Err(Error::TooShort {
                needed: self.window.length,
                got: series.len(),
            });
        }
        let y = self.normalizer.apply(series)?;
        let w = extract_windows(&y, self.window)?;
        let s = detectors::score(&self.detector, &w)?;
        align_scores(&s, self.window, series.len(), self.alignment)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(s)?;
        if v.format_version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported pipeline format version {} (expected {FORMAT_VERSION})",
                v.format_version
            )));
        }
        Ok(serde_json::from_str(s)?)
    }
}

pub fn test(tp: &TrainedPipeline, series: &TimeSeries) -> Result<TestOutput> {
    let scores = tp.score(series)?;
    let (health, labels) = health_series(&tp.decision, &scores);
    Ok(TestOutput {
        scores,
        health,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorId;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noisy_sine(n: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..n)
            .map(|t| {
                let e: f64 = rng.sample(StandardNormal);
                (2.0 * std::f64::consts::PI * t as f64 / 25.0).sin() + 0.05 * e
            })
            .collect();
        TimeSeries::univariate("sine", v).unwrap()
    }

    fn knn_cfg(w: usize) -> PipelineConfig {
        PipelineConfig::new(DetectorSpec::new(DetectorId::Knn), WindowSelector::Fixed(w))
    }

    #[test]
    fn split_sizes() {
        let s = TimeSeries::univariate("x", (0..1000).map(f64::from).collect()).unwrap();
        let (a, b) = split_series(&s, 0.7).unwrap();
        assert_eq!((a.len(), b.len()), (700, 300));
    }

    #[test]
    fn constant_series_trains_with_floor_sigma() {
        let s = TimeSeries::univariate("c", vec![3.0; 200]).unwrap();
        let tp = train(&s, &knn_cfg(10)).unwrap();
        assert_eq!(tp.decision.sigma, crate::decision::SIGMA_FLOOR);
    }

    #[test]
    fn validation_copy_raises_no_alarm() {
        let s = noisy_sine(1000, 3);
        let tp = train(&s, &knn_cfg(25)).unwrap();
        let (_, val) = split_series(&s, 0.7).unwrap();
        let out = test(&tp, &val).unwrap();
        assert_eq!(out.labels.count_ones(), 0);
        assert_eq!(out.scores.len(), val.len());
        assert_eq!(out.health.len(), val.len());
    }

    #[test]
    fn injected_segment_is_flagged() {
        let s = noisy_sine(1000, 3);
        let tp = train(&s, &knn_cfg(25)).unwrap();
        let mut v = noisy_sine(400, 9).values().to_vec();
        for x in &mut v[200..240] {
            *x = 20.0;
        }
        let t = TimeSeries::univariate("t", v).unwrap();
        let out = test(&tp, &t).unwrap();
        assert!(out.labels.as_slice()[200..240].contains(&1));
        // prefix of the standard series is healthier than the injected series
        let clean = test(&tp, &s.slice(0, 400).unwrap()).unwrap();
        let mean = |h: &HealthSeries| h.as_slice().iter().sum::<f64>() / h.len() as f64;
        assert!(mean(&clean.health) < mean(&out.health));
    }

    #[test]
    fn errors() {
        let s = noisy_sine(100, 1);
        assert!(matches!(train(&s, &knn_cfg(50)), Err(Error::TooShort { .. })));
        let tp = train(&s, &knn_cfg(5)).unwrap();
        let short = TimeSeries::univariate("s", vec![0.0; 3]).unwrap();
        assert!(matches!(test(&tp, &short), Err(Error::TooShort { .. })));
        let two = TimeSeries::new("m", 2, vec![0.0; 40]).unwrap();
        assert!(matches!(test(&tp, &two), Err(Error::DimensionMismatch { .. })));
        let mut bad = knn_cfg(5);
        bad.split_fraction = 1.0;
        assert!(matches!(train(&s, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn json_roundtrip_and_version() {
        let s = noisy_sine(300, 2);
        let tp = train(&s, &knn_cfg(10)).unwrap();
        let json = tp.to_json().unwrap();
        let back = TrainedPipeline::from_json(&json).unwrap();
        assert_eq!(back, tp);
        let t = noisy_sine(120, 5);
        assert_eq!(test(&back, &t).unwrap(), test(&tp, &t).unwrap());
        let bumped = json.replacen("\"format_version\":1", "\"format_version\":99", 1);
        assert!(TrainedPipeline::from_json(&bumped).is_err());
    }

    #[test]
    fn data_driven_window_and_forecaster() {
        let s = noisy_sine(800, 4);
        let mut cfg = knn_cfg(1);
        cfg.window = WindowSelector::Acf;
        let tp = train(&s, &cfg).unwrap();
        assert!((24..=26).contains(&tp.window.length), "{}", tp.window.length);
        let cfg = PipelineConfig::new(
            DetectorSpec::new(DetectorId::LinearRegression),
            WindowSelector::Fixed(8),
        );
        let tp = train(&s, &cfg).unwrap();
        assert_eq!(tp.alignment, ScoreAlignment::LastPoint);
        assert_eq!(test(&tp, &noisy_sine(50, 8)).unwrap().scores.len(), 50);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn split_is_contiguous(n in 4usize..300, f in 0.1f64..0.9) {
            let s = TimeSeries::univariate("x", (0..n).map(|i| i as f64).collect()).unwrap();
            if let Ok((a, b)) = split_series(&s, f) {
                let mut joined = a.values().to_vec();
                joined.extend_from_slice(b.values());
                prop_assert_eq!(joined, s.values().to_vec());
                prop_assert_eq!(a.len(), (f * n as f64).floor() as usize);
            }
        }

        #[test]
        fn deterministic(seed in 0u64..50) {
            let s = noisy_sine(300, seed);
            let cfg = PipelineConfig::new(DetectorSpec::new(DetectorId::Iforest), WindowSelector::Fixed(10))
                .with_seed(seed);
            let t = noisy_sine(100, seed + 1);
            let a = test(&train(&s, &cfg).unwrap(), &t).unwrap();
            let b = test(&train(&s, &cfg).unwrap(), &t).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
