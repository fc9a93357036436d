//! Building anomaly-state datasets from categorical (classification) data.
//!
//! A bundle takes the tightest SBD cluster of one class as the baseline. Half
//! of it becomes the standard series, and the other half becomes the test
//! series, with whole instances of other classes spliced in at instance
//! boundaries.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::difficulty::{self, SequenceSets, DEFAULT_KNC_K};
use crate::error::{Error, Result};
use crate::io;
use crate::series::{labels_to_ranges, ranges_to_labels, AnomalyRange, LabelSeries, TimeSeries};
use crate::shapedist::{most_concentrated_cluster_with_min_size, sbd, sbd_kmeans, Sequence};

/// Smallest baseline cluster that still leaves two instances per half.
pub const MIN_CLUSTER_SIZE: usize = 4;
pub const DEFAULT_K_CLUSTERS: usize = 3;
pub const DEFAULT_BAND: (f64, f64) = (0.25, 0.75);
pub const DEFAULT_ANOMALY_FRACTION: f64 = 0.1;
pub const DEFAULT_QUALITY_FLOOR: f64 = 0.8;
const KMEANS_MAX_ITER: usize = 100;

/// Labelled fixed-length instances.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDataset {
    instances: Vec<Sequence>,
    labels: Vec<i64>,
}

impl CategoricalDataset {
    pub fn new(instances: Vec<Sequence>, labels: Vec<i64>) -> Result<Self> {
        if instances.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} instances but {} labels",
                instances.len(),
                labels.len()
            )));
        }
        let m = instances.first().map(Sequence::len).unwrap_or(0);
        if let Some(i) = instances.iter().position(|s| s.len() != m) {
            return Err(Error::invalid(format!(
                "instance {i} has length {}, expected {m}",
                instances[i].len()
            )));
        }
        let ds = Self { instances, labels };
        if ds.classes().len() < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instance_length(&self) -> usize {
        self.instances[0].len()
    }

    pub fn instances(&self) -> &[Sequence] {
        &self.instances
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Distinct class labels, ascending.
    pub fn classes(&self) -> Vec<i64> {
        self.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn ids_of(&self, class: i64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }
}

/// Reads a UCR-style file: one instance per line, class label first, fields
/// separated by commas, tabs or spaces. Labels such as `1.0` are accepted.
pub fn read_categorical_csv(path: &Path) -> Result<CategoricalDataset> {
    let text = io::read_to_string(path)?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut instances = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut fields = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty());
        let Some(label) = fields.next() else { continue };
        let label: f64 = label
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad class label `{label}`")))?;
        if !label.is_finite() || label.fract() != 0.0 {
            return Err(parse_err(line_no, format!("class label {label} is not an integer")));
        }
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line_no, format!("not a finite number: `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = Sequence::new(values).map_err(|e| parse_err(line_no, e.to_string()))?;
        instances.push(seq);
        labels.push(label as i64);
    }
    CategoricalDataset::new(instances, labels)
}

pub fn write_categorical_csv(path: &Path, data: &CategoricalDataset) -> Result<()> {
    let mut out = String::new();
    for (seq, label) in data.instances.iter().zip(&data.labels) {
        out.push_str(&label.to_string());
        for v in seq.as_slice() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    io::atomic_write(path, out.as_bytes())
}

fn waveform(class: usize, m: usize) -> Vec<f64> {
    // Whole cycles per instance, so concatenated instances join seamlessly.
    let cycles = 2 + class / 4 * 3 + class % 4;
    let amp = 1.0 + 0.25 * (class % 3) as f64;
    (0..m)
        .map(|t| {
            let u = t as f64 / m as f64;
            let phase = cycles as f64 * u;
            amp * match class % 4 {
                0 => (2.0 * PI * phase).sin(),
                1 => {
                    if phase.fract() < 0.5 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                2 => 2.0 * phase.fract() - 1.0,
                // Linear chirp from `cycles` up to `2 * cycles` per instance,
                // windowed so the ends meet at zero.
                _ => (2.0 * PI * cycles as f64 * (u + 0.5 * u * u)).sin() * (PI * u).sin(),
            }
        })
        .collect()
}

/// Synthetic classification data: class `c` is a sine, square, sawtooth or
/// chirp (by `c % 4`) with class-specific cycle count and amplitude, plus
/// i.i.d. Gaussian noise.
pub fn generate_synthetic_categorical(
    n_classes: usize,
    per_class: usize,
    m: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<CategoricalDataset> {
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if per_class == 0 || m < 2 {
        return Err(Error::invalid("per_class must be positive and m at least 2"));
    }
    let noise = Normal::new(0.0, noise_sigma)
        .map_err(|_| Error::invalid(format!("bad noise sigma {noise_sigma}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n_classes * per_class);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for c in 0..n_classes {
        let base = waveform(c, m);
        for _ in 0..per_class {
            let v = base.iter().map(|b| b + noise.sample(&mut rng)).collect();
            instances.push(Sequence::new(v)?);
            labels.push(c as i64);
        }
    }
    CategoricalDataset::new(instances, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleParams {
    pub k_clusters: usize,
    /// Number of injected instances; `None` means 10% of the test normals,
    /// rounded up.
    pub anomaly_count: Option<usize>,
    /// Quantile band over candidate mean SBDs, `0 <= lo < hi <= 1`.
    pub band: (f64, f64),
    pub seed: u64,
    pub knc_k: usize,
}

impl Default for BundleParams {
    fn default() -> Self {
        Self {
            k_clusters: DEFAULT_K_CLUSTERS,
            anomaly_count: None,
            band: DEFAULT_BAND,
            seed: 0,
            knc_k: DEFAULT_KNC_K,
        }
    }
}

impl BundleParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::Config(format!("distance band ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")));
        }
        if self.k_clusters == 0 || self.knc_k == 0 {
            return Err(Error::Config("k_clusters and knc_k must be positive".into()));
        }
        Ok(())
    }
}

/// Provenance of a bundle. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub source_class: i64,
    pub cluster: usize,
    pub instance_length: usize,
    pub standard_ids: Vec<usize>,
    pub test_normal_ids: Vec<usize>,
    pub anomaly_ids: Vec<usize>,
    /// Instance positions in the test series holding anomalies, ascending.
    pub anomaly_slots: Vec<usize>,
    pub band: (f64, f64),
    pub k_clusters: usize,
    pub seed: u64,
    pub knc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub standard: TimeSeries,
    pub test: TimeSeries,
    pub truth: Vec<AnomalyRange>,
    pub meta: BundleMeta,
}

fn concat(name: &str, parts: &[&Sequence]) -> Result<TimeSeries> {
    let values: Vec<f64> = parts.iter().flat_map(|s| s.as_slice().iter().copied()).collect();
    TimeSeries::univariate(name, values)
}

fn mean_sbd_to(seq: &Sequence, set: &[&Sequence]) -> Result<f64> {
    let mut sum = 0.0;
    for s in set {
        sum += sbd(seq, s)?;
    }
    Ok(sum / set.len() as f64)
}

pub fn build_bundle(data: &CategoricalDataset, class: i64, params: &BundleParams) -> Result<DatasetBundle> {
    params.validate()?;
    let m = data.instance_length();
    let class_ids = data.ids_of(class);
    if class_ids.len() < MIN_CLUSTER_SIZE {
        return Err(Error::Dataset(format!(
            "class {class} has {} instances, need at least {MIN_CLUSTER_SIZE}",
            class_ids.len()
        )));
    }
    let others: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] != class).collect();
    if others.is_empty() {
        return Err(Error::Dataset(format!("no instances outside class {class}")));
    }

    let seqs: Vec<Sequence> = class_ids.iter().map(|&i| data.instances[i].clone()).collect();
    let k = params.k_clusters.min(seqs.len());
    let clustering = sbd_kmeans(&seqs, k, params.seed, KMEANS_MAX_ITER)?;
    let cluster = most_concentrated_cluster_with_min_size(&clustering, MIN_CLUSTER_SIZE).ok_or_else(|| {
        Error::Dataset(format!(
            "no cluster of class {class} has {MIN_CLUSTER_SIZE} or more instances (sizes {:?})",
            clustering.sizes
        ))
    })?;
    let mut baseline: Vec<usize> = clustering.members(cluster).into_iter().map(|j| class_ids[j]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    baseline.shuffle(&mut rng);
    let n_std = baseline.len().div_ceil(2);
    let standard_ids = baseline[..n_std].to_vec();
    let test_normal_ids = baseline[n_std..].to_vec();

    let base_seqs: Vec<&Sequence> = baseline.iter().map(|&i| &data.instances[i]).collect();
    let mut cand = others
        .iter()
        .map(|&i| Ok((mean_sbd_to(&data.instances[i], &base_seqs)?, i)))
        .collect::<Result<Vec<(f64, usize)>>>()?;
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n_cand = cand.len();
    let lo = (params.band.0 * n_cand as f64).floor() as usize;
    let hi = ((params.band.1 * n_cand as f64).ceil() as usize).min(n_cand);
    let mut eligible: Vec<usize> = cand[lo..hi.max(lo)].iter().map(|c| c.1).collect();

    let n_anom = params
        .anomaly_count
        .unwrap_or_else(|| (DEFAULT_ANOMALY_FRACTION * test_normal_ids.len() as f64).ceil() as usize);
    if eligible.len() < n_anom {
        return Err(Error::Dataset(format!(
            "{} instances fall in distance band {:?}, need {n_anom}",
            eligible.len(),
            params.band
        )));
    }
    eligible.shuffle(&mut rng);
    let anomaly_ids = eligible[..n_anom].to_vec();

    let total = test_normal_ids.len() + n_anom;
    let mut anomaly_slots = index::sample(&mut rng, total, n_anom).into_vec();
    anomaly_slots.sort_unstable();

    let mut test_parts = Vec::with_capacity(total);
    let (mut next_norm, mut next_anom) = (0, 0);
    for slot in 0..total {
        if anomaly_slots.binary_search(&slot).is_ok() {
            test_parts.push(&data.instances[anomaly_ids[next_anom]]);
            next_anom += 1;
        } else {
            test_parts.push(&data.instances[test_normal_ids[next_norm]]);
            next_norm += 1;
        }
    }
    let truth = anomaly_slots
        .iter()
        .map(|&s| AnomalyRange::new(s * m, s * m + m - 1))
        .collect::<Result<Vec<_>>>()?;

    let std_parts: Vec<&Sequence> = standard_ids.iter().map(|&i| &data.instances[i]).collect();
    let mut bundle = DatasetBundle {
        standard: concat("standard", &std_parts)?,
        test: concat("test", &test_parts)?,
        truth,
        meta: BundleMeta {
            source_class: class,
            cluster,
            instance_length: m,
            standard_ids,
            test_normal_ids,
            anomaly_ids,
            anomaly_slots,
            band: params.band,
            k_clusters: params.k_clusters,
            seed: params.seed,
            knc: None,
        },
    };
    if n_anom > 0 {
        bundle.meta.knc = Some(difficulty::knc(&bundle.sequence_sets(params.knc_k)?)?);
    }
    Ok(bundle)
}

impl DatasetBundle {
    pub fn labels(&self) -> Result<LabelSeries> {
        ranges_to_labels(&self.truth, self.test.len())
    }

    /// Splits both series into instances and groups test instances by the
    /// injected slots. `k` is clamped to the standard set size.
    pub fn sequence_sets(&self, k: usize) -> Result<SequenceSets> {
        let m = self.meta.instance_length;
        let chunks = |s: &TimeSeries| -> Result<Vec<Sequence>> {
            if s.dims() != 1 || s.len() % m != 0 {
                return Err(Error::invalid(format!(
                    "series of length {} is not a whole number of instances of length {m}",
                    s.len()
                )));
            }
            s.values().chunks(m).map(|c| Sequence::new(c.to_vec())).collect()
        };
        let std_set = chunks(&self.standard)?;
        let mut nor_set = Vec::new();
        let mut ano_set = Vec::new();
        for (i, seg) in chunks(&self.test)?.into_iter().enumerate() {
            if self.meta.anomaly_slots.binary_search(&i).is_ok() {
                ano_set.push(seg);
            } else {
                nor_set.push(seg);
            }
        }
        let k = k.min(std_set.len());
        Ok(SequenceSets {
            std_set,
            nor_set,
            ano_set,
            k,
        })
    }

    pub fn meta_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.meta)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `standard.csv`, `test.csv`, `labels.csv` and `meta.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_series_csv(&dir.join("standard.csv"), &self.standard)?;
        io::write_series_csv(&dir.join("test.csv"), &self.test)?;
        io::write_labels_csv(&dir.join("labels.csv"), &self.labels()?)?;
        io::atomic_write(&dir.join("meta.json"), self.meta_json()?.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let standard = io::read_series_csv(&dir.join("standard.csv"))?;
        let test = io::read_series_csv(&dir.join("test.csv"))?;
        let labels = io::read_labels_csv(&dir.join("labels.csv"))?;
        if labels.len() != test.len() {
            return Err(Error::DimensionMismatch {
                expected: test.len(),
                got: labels.len(),
            });
        }
        let meta: BundleMeta = serde_json::from_str(&io::read_to_string(&dir.join("meta.json"))?)?;
        Ok(Self {
            standard,
            test,
            truth: labels_to_ranges(&labels),
            meta,
        })
    }
}

/// Keeps a bundle iff at least one detector reaches `floor` AUC-ROC.
/// Detectors without an AUC (e.g. a failed run) are skipped.
pub fn quality_filter(results: &BTreeMap<String, Option<f64>>, floor: f64) -> Result<bool> {
    if results.is_empty() {
        return Err(Error::invalid("quality filter needs at least one detector result"));
    }
    Ok(results.values().flatten().any(|&auc| auc >= floor))
}
