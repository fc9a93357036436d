//! TOML run configuration. Every default lives in the `Default` impls here;
//! unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::stats::{Correction, DEFAULT_ALPHA};
use crate::bench::BenchConfig;
use crate::datagen::{BundleParams, DEFAULT_BAND, DEFAULT_K_CLUSTERS, DEFAULT_QUALITY_FLOOR};
use crate::detectors::{DetectorId, DetectorSpec};
use crate::difficulty::{DEFAULT_KNC_K, DEFAULT_NA_CLUSTERS};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::MetricConfig;
use crate::pipeline::{PipelineConfig, DEFAULT_MAX_WINDOW, DEFAULT_SPLIT};
use crate::series::WindowSelector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    /// Detector keys or names; `detect` uses the first.
    pub detectors: Vec<String>,
    /// Window selectors (`acf`, `fft` or a length); `detect` uses the first.
    pub windows: Vec<String>,
    pub pipeline: PipelineSection,
    /// Hyperparameter overrides per detector, e.g. `[params.knn] k = 5`.
    pub params: BTreeMap<String, BTreeMap<String, f64>>,
    pub metrics: MetricsSection,
    pub dataset: DatasetSection,
    pub bench: BenchSection,
    pub difficulty: DifficultySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub split_fraction: f64,
    pub stride: usize,
    pub max_window: usize,
    /// Overrides the default decision threshold.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    #[serde(flatten)]
    pub base: MetricConfig,
    /// In `bench`, use a quarter of a bundle's instance length as VUS buffer.
    pub vus_buffer_from_instance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// UCR-style file to build from; synthetic data when absent.
    pub input: Option<PathBuf>,
    pub n_classes: usize,
    pub per_class: usize,
    pub instance_length: usize,
    pub noise_sigma: f64,
    pub source_class: i64,
    /// Bundles to build; more than one writes `bundle_NNN` subdirectories,
    /// cycling the source class and advancing the seed.
    pub bundles: usize,
    pub k_clusters: usize,
    pub anomaly_count: Option<usize>,
    pub band: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub correction: Correction,
    pub alpha: f64,
    pub quality_floor: f64,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DifficultySection {
    pub knc_k: usize,
    pub na_clusters: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            detectors: DetectorId::ALL.iter().map(|d| d.key().to_string()).collect(),
            windows: vec!["acf".into()],
            pipeline: PipelineSection::default(),
            params: BTreeMap::new(),
            metrics: MetricsSection::default(),
            dataset: DatasetSection::default(),
            bench: BenchSection::default(),
            difficulty: DifficultySection::default(),
        }
    }
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            split_fraction: DEFAULT_SPLIT,
            stride: 1,
            max_window: DEFAULT_MAX_WINDOW,
            threshold: None,
        }
    }
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            base: MetricConfig::default(),
            vus_buffer_from_instance: true,
        }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            input: None,
            n_classes: 6,
            per_class: 20,
            instance_length: 128,
            noise_sigma: 0.05,
            source_class: 0,
            bundles: 1,
            k_clusters: DEFAULT_K_CLUSTERS,
            anomaly_count: None,
            band: DEFAULT_BAND,
        }
    }
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            correction: Correction::Holm,
            alpha: DEFAULT_ALPHA,
            quality_floor: DEFAULT_QUALITY_FLOOR,
            jobs: 0,
        }
    }
}

impl Default for DifficultySection {
    fn default() -> Self {
        Self {
            knc_k: DEFAULT_KNC_K,
            na_clusters: DEFAULT_NA_CLUSTERS,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&io::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() || self.windows.is_empty() {
            return Err(Error::Config("detectors and windows must be nonempty".into()));
        }
        for d in self.params.keys() {
            DetectorId::parse(d).map_err(|e| Error::Config(format!("[params.{d}]: {e}")))?;
        }
        for spec in self.detector_specs()? {
            spec.validate()?;
        }
        self.window_selectors()?;
        for spec in self.detector_specs()? {
            self.pipeline_config(spec, WindowSelector::Acf).validate()?;
        }
        let d = &self.dataset;
        if d.n_classes < 2 || d.per_class == 0 || d.instance_length < 2 || d.bundles == 0 {
            return Err(Error::Config(
                "dataset needs n_classes >= 2, per_class >= 1, instance_length >= 2 and bundles >= 1".into(),
            ));
        }
        if !(d.noise_sigma >= 0.0 && d.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", d.noise_sigma)));
        }
        self.bundle_params(0).validate()?;
        if !(0.0..=1.0).contains(&self.bench.alpha) || !(0.0..=1.0).contains(&self.bench.quality_floor) {
            return Err(Error::Config("bench.alpha and bench.quality_floor must lie in [0, 1]".into()));
        }
        if self.difficulty.knc_k == 0 || self.difficulty.na_clusters == 0 {
            return Err(Error::Config("difficulty.knc_k and na_clusters must be positive".into()));
        }
        let r = &self.metrics.base.range;
        if !(0.0..=1.0).contains(&r.alpha_recall) || !(0.0..=1.0).contains(&r.alpha_precision) {
            return Err(Error::Config("range alphas must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Specs for the configured detectors, with overrides and the run seed.
    pub fn detector_specs(&self) -> Result<Vec<DetectorSpec>> {
        self.detectors
            .iter()
            .map(|name| {
                let id = DetectorId::parse(name).map_err(|e| Error::Config(e.to_string()))?;
                let mut spec = DetectorSpec::new(id).with_seed(self.seed);
                for (key, over) in &self.params {
                    if DetectorId::parse(key).ok() == Some(id) {
                        spec.params.extend(over.iter().map(|(k, v)| (k.clone(), *v)));
                    }
                }
                Ok(spec)
            })
            .collect()
    }

    pub fn window_selectors(&self) -> Result<Vec<WindowSelector>> {
        self.windows
            .iter()
            .map(|w| WindowSelector::parse(w).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }

    pub fn pipeline_config(&self, spec: DetectorSpec, window: WindowSelector) -> PipelineConfig {
        let mut p = PipelineConfig::new(spec, window).with_seed(self.seed);
        p.split_fraction = self.pipeline.split_fraction;
        p.stride = self.pipeline.stride;
        p.max_window = self.pipeline.max_window;
        p.threshold = self.pipeline.threshold;
        p
    }

    /// Parameters of the `i`-th bundle of a build.
    pub fn bundle_params(&self, i: usize) -> BundleParams {
        BundleParams {
            k_clusters: self.dataset.k_clusters,
            anomaly_count: self.dataset.anomaly_count,
            band: self.dataset.band,
            seed: self.seed.wrapping_add(i as u64),
            knc_k: self.difficulty.knc_k,
        }
    }

    pub fn bench_config(&self) -> Result<BenchConfig> {
        let mut b = BenchConfig::new(self.detector_specs()?, self.window_selectors()?);
        b.seed = self.seed;
        b.split_fraction = self.pipeline.split_fraction;
        b.max_window = self.pipeline.max_window;
        b.metrics = self.metrics.base;
        b.vus_buffer_from_instance = self.metrics.vus_buffer_from_instance;
        b.correction = self.bench.correction;
        b.alpha = self.bench.alpha;
        b.quality_floor = self.bench.quality_floor;
        Ok(b)
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Every configuration key with its default, one per line, for `--help`.
pub fn keys_help() -> String {
    let value = toml::Value::try_from(Config::default()).expect("default config serializes");
    let mut keys = Vec::new();
    flatten("", &value, &mut keys);
    keys.push(("pipeline.threshold".into(), "unset (decision default)".into()));
    keys.push(("dataset.input".into(), "unset (synthetic data)".into()));
    keys.push(("dataset.anomaly_count".into(), "unset (10% of test normals, rounded up)".into()));
    for id in DetectorId::ALL {
        for p in id.params() {
            keys.push((format!("params.{}.{}", id.key(), p.name), p.default.to_string()));
        }
    }
    keys.sort();
    let width = keys.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (TOML) and defaults:\n");
    for (k, v) in keys {
        out.push_str(&format!("  {k:<width$}  {v}\n"));
    }
    out
}
