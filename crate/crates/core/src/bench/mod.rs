//! The experiment matrix: every (bundle, detector, window) cell is trained,
//! tested and scored, then summarized with rank statistics.

pub mod persist;
pub mod report;
pub mod stats;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{quality_filter, DatasetBundle};
use crate::detectors::{DetectorId, DetectorSpec, Family};
use crate::difficulty::{knc_band, KncBand};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricConfig, MetricRecord, METRIC_NAMES};
use crate::pipeline::{self, PipelineConfig, DEFAULT_MAX_WINDOW, DEFAULT_SPLIT};
use crate::series::{LabelSeries, TimeSeries, WindowSelector};

use stats::{cd_data, friedman, wilcoxon_pairs, CdData, Correction, Friedman, PairwiseTests, RankTable};

pub const TIMING_GROUPS: usize = 3;
pub const TIMING_GROUP_SIZE: usize = 10;

/// One dataset as the bench sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchBundle {
    pub id: String,
    pub standard: TimeSeries,
    pub test: TimeSeries,
    pub truth: LabelSeries,
    pub instance_length: Option<usize>,
    pub knc: Option<f64>,
}

impl BenchBundle {
    pub fn from_dataset(id: impl Into<String>, b: &DatasetBundle) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            standard: b.standard.clone(),
            test: b.test.clone(),
            truth: b.labels()?,
            instance_length: Some(b.meta.instance_length),
            knc: b.meta.knc,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub detectors: Vec<DetectorSpec>,
    pub windows: Vec<WindowSelector>,
    pub seed: u64,
    pub split_fraction: f64,
    pub max_window: usize,
    pub metrics: MetricConfig,
    /// When set, a bundle's VUS buffer is a quarter of its instance length.
    pub vus_buffer_from_instance: bool,
    pub correction: Correction,
    pub alpha: f64,
    pub quality_floor: f64,
}

impl BenchConfig {
    pub fn new(detectors: Vec<DetectorSpec>, windows: Vec<WindowSelector>) -> Self {
        Self {
            detectors,
            windows,
            seed: 0,
            split_fraction: DEFAULT_SPLIT,
            max_window: DEFAULT_MAX_WINDOW,
            metrics: MetricConfig::default(),
            vus_buffer_from_instance: true,
            correction: Correction::Holm,
            alpha: stats::DEFAULT_ALPHA,
            quality_floor: crate::datagen::DEFAULT_QUALITY_FLOOR,
        }
    }
}

/// Wall-clock seconds for one cell. Not part of the deterministic output.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellTiming {
    pub fit_seconds: f64,
    pub score_seconds: f64,
}

impl CellTiming {
    pub fn total(&self) -> f64 {
        self.fit_seconds + self.score_seconds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub bundle: String,
    pub detector: DetectorId,
    pub window: WindowSelector,
    /// Resolved window length, when training got that far.
    pub window_length: Option<usize>,
    pub seed: u64,
    pub metrics: Option<MetricRecord>,
    pub error: Option<String>,
    #[serde(skip)]
    pub timing: Option<CellTiming>,
}

impl RunRecord {
    pub fn value(&self, metric: &str) -> Option<f64> {
        self.metrics.as_ref().and_then(|m| m.get(metric))
    }
}

/// Time source for cell measurements.
pub trait Clock: Sync {
    fn time<T>(&self, f: impl FnOnce() -> T) -> (T, f64);
}

/// Monotonic wall clock.
#[derive(Debug, Clone, Copy, Default)]
pub struct MonotonicClock;

impl Clock for MonotonicClock {
    fn time<T>(&self, f: impl FnOnce() -> T) -> (T, f64) {
        let t = Instant::now();
        let out = f();
        (out, t.elapsed().as_secs_f64())
    }
}

/// Reports the same duration for everything; for tests.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub f64);

impl Clock for FixedClock {
    fn time<T>(&self, f: impl FnOnce() -> T) -> (T, f64) {
        (f(), self.0)
    }
}

/// Seed of one cell, independent of scheduling.
pub fn cell_seed(global: u64, bundle: &str, detector: DetectorId, window: WindowSelector) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    for part in [bundle, detector.key(), &window.to_string()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn run_cell(
    bundle: &BenchBundle,
    spec: &DetectorSpec,
    window: WindowSelector,
    cfg: &BenchConfig,
    clock: &impl Clock,
) -> RunRecord {
    let seed = cell_seed(cfg.seed, &bundle.id, spec.id, window);
    let mut rec = RunRecord {
        bundle: bundle.id.clone(),
        detector: spec.id,
        window,
        window_length: None,
        seed,
        metrics: None,
        error: None,
        timing: None,
    };
    let mut pcfg = PipelineConfig::new(spec.clone(), window).with_seed(seed);
    pcfg.split_fraction = cfg.split_fraction;
    pcfg.max_window = cfg.max_window;
    let mut mcfg = cfg.metrics;
    if cfg.vus_buffer_from_instance {
        if let Some(m) = bundle.instance_length {
            mcfg.vus_buffer = m / 4;
        }
    }
    let (trained, fit_seconds) = clock.time(|| pipeline::train(&bundle.standard, &pcfg));
    let trained = match trained {
        Ok(t) => t,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.window_length = Some(trained.window.length);
    let (out, score_seconds) = clock.time(|| pipeline::test(&trained, &bundle.test));
    rec.timing = Some(CellTiming {
        fit_seconds,
        score_seconds,
    });
    match out.and_then(|o| evaluate(&o.scores, &o.labels, &bundle.truth, &mcfg)) {
        Ok(m) => rec.metrics = Some(m),
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Runs every cell in parallel on the current rayon pool. Records come back
/// in bundle, detector, window order, whatever the scheduling.
pub fn run_matrix(bundles: &[BenchBundle], cfg: &BenchConfig, clock: &impl Clock) -> Result<Vec<RunRecord>> {
    if bundles.is_empty() || cfg.detectors.is_empty() || cfg.windows.is_empty() {
        return Err(Error::invalid("bench needs at least one bundle, detector and window"));
    }
    for spec in &cfg.detectors {
        spec.validate()?;
    }
    let cells: Vec<(&BenchBundle, &DetectorSpec, WindowSelector)> = bundles
        .iter()
        .flat_map(|b| {
            cfg.detectors
                .iter()
                .flat_map(move |d| cfg.windows.iter().map(move |&w| (b, d, w)))
        })
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(b, d, w)| run_cell(b, d, w, cfg, clock))
        .collect())
}

/// Detectors in first-appearance order.
pub(crate) fn detector_order(records: &[RunRecord]) -> Vec<DetectorId> {
    let mut out: Vec<DetectorId> = Vec::new();
    for r in records {
        if !out.contains(&r.detector) {
            out.push(r.detector);
        }
    }
    out
}

fn bundle_order(records: &[RunRecord]) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.bundle.clone()))
        .map(|r| r.bundle.clone())
        .collect()
}

/// Per (detector, bundle) mean over window configs with a value.
pub(crate) fn cell_means(records: &[RunRecord], metric: &str) -> BTreeMap<(DetectorId, String), f64> {
    let mut acc: BTreeMap<(DetectorId, String), (f64, usize)> = BTreeMap::new();
    for r in records {
        if let Some(v) = r.value(metric) {
            let e = acc.entry((r.detector, r.bundle.clone())).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorAggregate {
    pub detector: DetectorId,
    /// Mean over bundles of the per-bundle window mean; `None` if no cell
    /// produced a value.
    pub mean: Option<f64>,
    pub bundles: usize,
    /// Cells without a value (failed runs or undefined measures).
    pub missing: usize,
}

/// Mean of `metric` per detector, averaging window configs within a bundle
/// before averaging bundles.
pub fn aggregate(records: &[RunRecord], metric: &str) -> Vec<DetectorAggregate> {
    let means = cell_means(records, metric);
    detector_order(records)
        .into_iter()
        .map(|d| {
            let vals: Vec<f64> = means.iter().filter(|((id, _), _)| *id == d).map(|(_, v)| *v).collect();
            let missing = records.iter().filter(|r| r.detector == d && r.value(metric).is_none()).count();
            DetectorAggregate {
                detector: d,
                mean: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
                bundles: vals.len(),
                missing,
            }
        })
        .collect()
}

/// Complete detectors × bundles block of per-bundle window means. Bundles
/// where some detector has no value are left out.
pub fn value_matrix(records: &[RunRecord], metric: &str) -> (Vec<DetectorId>, Vec<String>, Vec<Vec<f64>>) {
    let means = cell_means(records, metric);
    let dets = detector_order(records);
    let bundles: Vec<String> = bundle_order(records)
        .into_iter()
        .filter(|b| dets.iter().all(|&d| means.contains_key(&(d, b.clone()))))
        .collect();
    let values = dets
        .iter()
        .map(|&d| bundles.iter().map(|b| means[&(d, b.clone())]).collect())
        .collect();
    (dets, bundles, values)
}

fn names(dets: &[DetectorId]) -> Vec<String> {
    dets.iter().map(|d| d.name().to_string()).collect()
}

pub fn rank_table(records: &[RunRecord], metric: &str) -> Result<RankTable> {
    let (dets, bundles, values) = value_matrix(records, metric);
    RankTable::from_values(metric, names(&dets), bundles, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSlice {
    pub band: KncBand,
    pub bundles: usize,
    pub aggregates: Vec<DetectorAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KncSlices {
    pub metric: String,
    pub slices: Vec<BandSlice>,
    /// Bands without any bundle.
    pub omitted: Vec<KncBand>,
    /// `1 - min/max` over a detector's band means.
    pub decline: Vec<(DetectorId, Option<f64>)>,
}

pub fn decline_ratio(band_means: &[f64]) -> Option<f64> {
    let max = band_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = band_means.iter().copied().fold(f64::INFINITY, f64::min);
    (max > 0.0 && max.is_finite()).then(|| 1.0 - min / max)
}

/// Aggregates restricted to each KNC band. Bundles without a KNC are ignored.
pub fn knc_slices(records: &[RunRecord], knc: &BTreeMap<String, Option<f64>>, metric: &str) -> KncSlices {
    let mut slices = Vec::new();
    let mut omitted = Vec::new();
    for band in KncBand::ALL {
        let members: Vec<&String> = knc
            .iter()
            .filter(|(_, v)| v.is_some_and(|v| knc_band(v) == band))
            .map(|(k, _)| k)
            .collect();
        if members.is_empty() {
            omitted.push(band);
            continue;
        }
        let subset: Vec<RunRecord> = records.iter().filter(|r| members.contains(&&r.bundle)).cloned().collect();
        slices.push(BandSlice {
            band,
            bundles: members.len(),
            aggregates: aggregate(&subset, metric),
        });
    }
    let decline = detector_order(records)
        .into_iter()
        .map(|d| {
            let means: Vec<f64> = slices
                .iter()
                .filter_map(|s| s.aggregates.iter().find(|a| a.detector == d).and_then(|a| a.mean))
                .collect();
            (d, decline_ratio(&means))
        })
        .collect();
    KncSlices {
        metric: metric.to_string(),
        slices,
        omitted,
        decline,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub groups: Vec<Vec<String>>,
    pub note: Option<String>,
    /// `(detector, mean seconds of fit + score)`, fastest first.
    pub rows: Vec<(DetectorId, f64)>,
}

/// Mean fit + score time per detector: the mean over groups of each group's
/// mean cell time. Groups are three seeded draws of ten bundles; with fewer
/// than thirty bundles a single group of all bundles is used.
pub fn timing_report(records: &[RunRecord], seed: u64) -> TimingReport {
    let mut bundles = bundle_order(records);
    bundles.sort();
    let need = TIMING_GROUPS * TIMING_GROUP_SIZE;
    let (groups, note) = if bundles.len() >= need {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        bundles.shuffle(&mut rng);
        let groups = bundles[..need]
            .chunks(TIMING_GROUP_SIZE)
            .map(|c| {
                let mut g = c.to_vec();
                g.sort();
                g
            })
            .collect();
        (groups, None)
    } else {
        let note = format!("only {} bundles available, timing uses all of them as one group", bundles.len());
        (vec![bundles], Some(note))
    };
    let mut rows: Vec<(DetectorId, f64)> = detector_order(records)
        .into_iter()
        .filter_map(|d| {
            let group_means: Vec<f64> = groups
                .iter()
                .filter_map(|g| {
                    let t: Vec<f64> = records
                        .iter()
                        .filter(|r| r.detector == d && g.contains(&r.bundle))
                        .filter_map(|r| r.timing.map(|t| t.total()))
                        .collect();
                    (!t.is_empty()).then(|| t.iter().sum::<f64>() / t.len() as f64)
                })
                .collect();
            (!group_means.is_empty()).then(|| (d, group_means.iter().sum::<f64>() / group_means.len() as f64))
        })
        .collect();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    TimingReport { groups, note, rows }
}

/// Mean of the detectors' mean ranks within each family present.
pub fn family_mean_ranks(table: &RankTable) -> Vec<(Family, f64)> {
    Family::ALL
        .iter()
        .filter_map(|&f| {
            let r: Vec<f64> = table
                .detectors
                .iter()
                .zip(&table.mean_ranks)
                .filter(|(d, _)| DetectorId::parse(d).is_ok_and(|id| id.family() == f))
                .map(|(_, r)| *r)
                .collect();
            (!r.is_empty()).then(|| (f, r.iter().sum::<f64>() / r.len() as f64))
        })
        .collect()
}

/// Per-bundle verdict of the AUC-ROC quality filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityVerdict {
    pub bundle: String,
    pub best_auc_roc: Option<f64>,
    pub kept: bool,
}

pub fn quality_verdicts(records: &[RunRecord], floor: f64) -> Vec<QualityVerdict> {
    let means = cell_means(records, "auc_roc");
    bundle_order(records)
        .into_iter()
        .map(|b| {
            let per_det: BTreeMap<String, Option<f64>> = detector_order(records)
                .into_iter()
                .map(|d| (d.key().to_string(), means.get(&(d, b.clone())).copied()))
                .collect();
            let best = per_det.values().flatten().copied().reduce(f64::max);
            let kept = quality_filter(&per_det, floor).unwrap_or(false);
            QualityVerdict {
                bundle: b,
                best_auc_roc: best,
                kept,
            }
        })
        .collect()
}

/// Statistics for one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub aggregates: Vec<DetectorAggregate>,
    pub ranks: Option<RankTable>,
    pub friedman: Option<Friedman>,
    pub pairwise: Option<PairwiseTests>,
    pub cd: Option<CdData>,
    pub knc: KncSlices,
}

/// Everything the report needs except timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub metrics: Vec<MetricSummary>,
    pub family_ranks: Vec<(Family, f64)>,
    pub quality: Vec<QualityVerdict>,
    pub errors: Vec<String>,
}

pub fn summarize(records: &[RunRecord], knc: &BTreeMap<String, Option<f64>>, cfg: &BenchConfig) -> BenchSummary {
    let metrics: Vec<MetricSummary> = METRIC_NAMES
        .iter()
        .map(|&m| {
            let ranks = rank_table(records, m).ok();
            let (dets, _, values) = value_matrix(records, m);
            let pairwise = ranks
                .as_ref()
                .map(|_| wilcoxon_pairs(&names(&dets), &values, cfg.correction));
            let cd = match (&ranks, &pairwise) {
                (Some(r), Some(p)) => cd_data(r, p, cfg.alpha).ok(),
                _ => None,
            };
            MetricSummary {
                metric: m.to_string(),
                aggregates: aggregate(records, m),
                friedman: ranks.as_ref().and_then(|r| friedman(r).ok()),
                ranks,
                pairwise,
                cd,
                knc: knc_slices(records, knc, m),
            }
        })
        .collect();
    let family_ranks = metrics
        .iter()
        .find(|s| s.metric == "auc_roc")
        .and_then(|s| s.ranks.as_ref())
        .map(family_mean_ranks)
        .unwrap_or_default();
    let errors = records
        .iter()
        .filter_map(|r| {
            r.error
                .as_ref()
                .map(|e| format!("{} / {} / {}: {e}", r.bundle, r.detector.name(), r.window))
        })
        .collect();
    BenchSummary {
        metrics,
        family_ranks,
        quality: quality_verdicts(records, cfg.quality_floor),
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_bundle, generate_synthetic_categorical, BundleParams};

    fn rec(bundle: &str, det: DetectorId, window: usize, auc: Option<f64>) -> RunRecord {
        RunRecord {
            bundle: bundle.into(),
            detector: det,
            window: WindowSelector::Fixed(window),
            window_length: Some(window),
            seed: 0,
            metrics: auc.map(|a| MetricRecord {
                precision: a,
                recall: a,
                f1: a,
                range_f1: a,
                auc_roc: Some(a),
                auc_pr: Some(a),
                vus_roc: Some(a),
                vus_pr: Some(a),
            }),
            error: auc.is_none().then(|| "failed".into()),
            timing: Some(CellTiming {
                fit_seconds: 1.0,
                score_seconds: 0.5,
            }),
        }
    }

    fn bundles(n: usize) -> Vec<BenchBundle> {
        let data = generate_synthetic_categorical(3, 10, 32, 0.05, 1).unwrap();
        (0..n)
            .map(|i| {
                let p = BundleParams {
                    k_clusters: 1,
                    anomaly_count: Some(1),
                    seed: i as u64,
                    ..Default::default()
                };
                BenchBundle::from_dataset(format!("b{i}"), &build_bundle(&data, 0, &p).unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn matrix_shape_and_determinism() {
        let bs = bundles(2);
        let cfg = BenchConfig::new(
            vec![
                DetectorSpec::new(DetectorId::Knn),
                DetectorSpec::new(DetectorId::Hbos),
                DetectorSpec::new(DetectorId::Iforest),
            ],
            vec![WindowSelector::Fixed(8), WindowSelector::Fixed(16)],
        );
        let a = run_matrix(&bs, &cfg, &FixedClock(0.25)).unwrap();
        assert_eq!(a.len(), 12);
        assert!(a.iter().all(|r| r.metrics.is_some()), "{a:?}");
        let b = run_matrix(&bs, &cfg, &MonotonicClock).unwrap();
        let strip = |v: &[RunRecord]| v.iter().map(|r| (r.seed, r.metrics)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        let t = timing_report(&a, 0);
        assert!(t.rows.iter().all(|(_, s)| (*s - 0.5).abs() < 1e-12));
    }

    #[test]
    fn failing_cell_is_isolated() {
        let bs = bundles(1);
        // Window longer than the validation part fails; 8 works.
        let cfg = BenchConfig::new(
            vec![DetectorSpec::new(DetectorId::Knn)],
            vec![WindowSelector::Fixed(8), WindowSelector::Fixed(10_000)],
        );
        let r = run_matrix(&bs, &cfg, &MonotonicClock).unwrap();
        assert!(r[0].metrics.is_some());
        assert!(r[1].metrics.is_none() && r[1].error.is_some());
        let agg = aggregate(&r, "auc_roc");
        assert_eq!((agg[0].bundles, agg[0].missing), (1, 1));
    }

    #[test]
    fn aggregate_examples() {
        let one = vec![rec("a", DetectorId::Knn, 8, Some(0.7))];
        assert_eq!(aggregate(&one, "auc_roc")[0].mean, Some(0.7));
        let two = vec![
            rec("a", DetectorId::Knn, 8, Some(0.8)),
            rec("b", DetectorId::Knn, 8, Some(1.0)),
        ];
        assert!((aggregate(&two, "auc_roc")[0].mean.unwrap() - 0.9).abs() < 1e-12);
        // Windows are averaged within a bundle first: (0.2+0.4)/2 and 1.0.
        let w = vec![
            rec("a", DetectorId::Knn, 8, Some(0.2)),
            rec("a", DetectorId::Knn, 16, Some(0.4)),
            rec("b", DetectorId::Knn, 8, Some(1.0)),
            rec("b", DetectorId::Knn, 16, None),
        ];
        let g = &aggregate(&w, "auc_roc")[0];
        assert!((g.mean.unwrap() - 0.65).abs() < 1e-12);
        assert_eq!(g.missing, 1);
        let mut rev = w.clone();
        rev.reverse();
        assert_eq!(aggregate(&rev, "auc_roc")[0].mean, g.mean);
    }

    #[test]
    fn rank_table_from_records() {
        let r = vec![
            rec("a", DetectorId::Knn, 8, Some(0.9)),
            rec("a", DetectorId::Lof, 8, Some(0.8)),
            rec("b", DetectorId::Knn, 8, Some(0.1)),
            rec("b", DetectorId::Lof, 8, Some(0.8)),
            rec("c", DetectorId::Knn, 8, Some(0.5)),
            rec("c", DetectorId::Lof, 8, None),
        ];
        let t = rank_table(&r, "auc_roc").unwrap();
        assert_eq!(t.bundles, vec!["a", "b"]);
        assert_eq!(t.mean_ranks, vec![1.5, 1.5]);
    }

    #[test]
    fn knc_slices_and_decline() {
        let r = vec![
            rec("a", DetectorId::Knn, 8, Some(0.9)),
            rec("b", DetectorId::Knn, 8, Some(0.72)),
        ];
        let knc: BTreeMap<String, Option<f64>> = [("a".to_string(), Some(20.0)), ("b".to_string(), Some(1.5))].into();
        let s = knc_slices(&r, &knc, "auc_roc");
        assert_eq!(s.slices.len(), 2);
        assert_eq!(s.omitted.len(), 3);
        assert!((s.decline[0].1.unwrap() - 0.2).abs() < 1e-12);

        let single: BTreeMap<String, Option<f64>> = [("a".to_string(), Some(3.0)), ("b".to_string(), Some(4.0))].into();
        let s = knc_slices(&r, &single, "auc_roc");
        assert_eq!(s.slices.len(), 1);
        assert_eq!(s.slices[0].aggregates, aggregate(&r, "auc_roc"));
    }

    #[test]
    fn timing_groups_deterministic_and_sorted() {
        let mut r = Vec::new();
        for b in 0..35 {
            for (d, t) in [(DetectorId::Knn, 2.0), (DetectorId::Hbos, 0.5)] {
                let mut x = rec(&format!("b{b:02}"), d, 8, Some(0.5));
                x.timing = Some(CellTiming {
                    fit_seconds: t,
                    score_seconds: 0.0,
                });
                r.push(x);
            }
        }
        let a = timing_report(&r, 7);
        assert_eq!(a, timing_report(&r, 7));
        assert_eq!(a.groups.len(), 3);
        assert!(a.groups.iter().all(|g| g.len() == 10));
        assert_eq!(a.rows, vec![(DetectorId::Hbos, 0.5), (DetectorId::Knn, 2.0)]);
        assert!(timing_report(&r[..4], 7).note.is_some());
    }

    #[test]
    fn quality_and_families() {
        let r = vec![
            rec("a", DetectorId::Knn, 8, Some(0.7)),
            rec("a", DetectorId::Hbos, 8, Some(0.6)),
            rec("b", DetectorId::Knn, 8, Some(0.9)),
            rec("b", DetectorId::Hbos, 8, Some(0.2)),
        ];
        let q = quality_verdicts(&r, 0.8);
        assert!(!q[0].kept && q[1].kept);
        let t = rank_table(&r, "auc_roc").unwrap();
        let f = family_mean_ranks(&t);
        assert_eq!(f, vec![(Family::Statistical, 2.0), (Family::Proximity, 1.0)]);
    }

    #[test]
    fn cell_seed_depends_on_every_part() {
        let base = cell_seed(1, "a", DetectorId::Knn, WindowSelector::Fixed(8));
        assert_ne!(base, cell_seed(2, "a", DetectorId::Knn, WindowSelector::Fixed(8)));
        assert_ne!(base, cell_seed(1, "b", DetectorId::Knn, WindowSelector::Fixed(8)));
        assert_ne!(base, cell_seed(1, "a", DetectorId::Lof, WindowSelector::Fixed(8)));
        assert_ne!(base, cell_seed(1, "a", DetectorId::Knn, WindowSelector::Acf));
    }
}
