//! Accuracy measures: point precision/recall/F1, range F1, AUC-ROC, AUC-PR
//! and the volume under the buffered ROC and PR surfaces.
//!
//! Threshold measures compare predicted labels with the truth. Ranking
//! measures use the continuous point scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{labels_to_ranges, AlignedScores, AnomalyRange, LabelSeries};

/// Buffer used by VUS when no instance length is known.
pub const DEFAULT_VUS_BUFFER: usize = 16;

/// Eight accuracy measures for one run. Ranking measures are `None` when the
/// truth lacks one of the classes they need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub range_f1: f64,
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
    pub vus_roc: Option<f64>,
    pub vus_pr: Option<f64>,
}

/// Names of the measures in report order.
pub const METRIC_NAMES: [&str; 8] = [
    "precision", "recall", "f1", "range_f1", "auc_roc", "auc_pr", "vus_roc", "vus_pr",
];

impl MetricRecord {
    /// Value by name from [`METRIC_NAMES`].
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "precision" => Some(self.precision),
            "recall" => Some(self.recall),
            "f1" => Some(self.f1),
            "range_f1" => Some(self.range_f1),
            "auc_roc" => self.auc_roc,
            "auc_pr" => self.auc_pr,
            "vus_roc" => self.vus_roc,
            "vus_pr" => self.vus_pr,
            _ => None,
        }
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: b, got: a })
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

/// Point-wise precision, recall and F1; empty denominators give 0.
pub fn point_prf(pred: &LabelSeries, truth: &LabelSeries) -> Result<(f64, f64, f64)> {
    check_len(pred.len(), truth.len())?;
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for (p, t) in pred.as_slice().iter().zip(truth.as_slice()) {
        match (p, t) {
            (1, 1) => tp += 1.0,
            (1, 0) => fp += 1.0,
            (0, 1) => fneg += 1.0,
            _ => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    Ok((precision, recall, harmonic(precision, recall)))
}

/// Where inside a range overlap counts most.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionBias {
    #[default]
    Flat,
    Front,
    Back,
    Middle,
}

impl PositionBias {
    /// Weight of 1-based position `i` in a range of length `len`.
    fn weight(self, i: usize, len: usize) -> f64 {
        match self {
            PositionBias::Flat => 1.0,
            PositionBias::Front => (len - i + 1) as f64,
            PositionBias::Back => i as f64,
            PositionBias::Middle => {
                if i <= len / 2 {
                    i as f64
                } else {
                    (len - i + 1) as f64
                }
            }
        }
    }
}

/// Penalty for a range matched by several ranges of the other side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    /// `1 / (number of overlapping ranges)` when more than one overlaps.
    #[default]
    Reciprocal,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangeF1Params {
    pub alpha_recall: f64,
    pub alpha_precision: f64,
    pub bias: PositionBias,
    pub cardinality: Cardinality,
}

impl Default for RangeF1Params {
    fn default() -> Self {
        Self {
            alpha_recall: 0.5,
            alpha_precision: 0.0,
            bias: PositionBias::Flat,
            cardinality: Cardinality::Reciprocal,
        }
    }
}

/// Average over `targets` of existence and positional overlap with `others`.
fn range_score(
    targets: &[AnomalyRange],
    others: &[AnomalyRange],
    alpha: f64,
    bias: PositionBias,
    card: Cardinality,
) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let total: f64 = targets
        .iter()
        .map(|r| {
            let hits: Vec<&AnomalyRange> = others.iter().filter(|o| r.overlap(o) > 0).collect();
            let existence = if hits.is_empty() { 0.0 } else { 1.0 };
            let len = r.len();
            let full: f64 = (1..=len).map(|i| bias.weight(i, len)).sum();
            let covered: f64 = (r.start..=r.end)
                .filter(|&t| hits.iter().any(|o| o.contains(t)))
                .map(|t| bias.weight(t - r.start + 1, len))
                .sum();
            let factor = match card {
                Cardinality::Reciprocal if hits.len() > 1 => 1.0 / hits.len() as f64,
                _ => 1.0,
            };
            alpha * existence + (1.0 - alpha) * factor * covered / full
        })
        .sum();
    total / targets.len() as f64
}

/// Range-based precision and recall, returned as `(precision, recall, f1)`.
pub fn range_prf(pred: &LabelSeries, truth: &LabelSeries, params: RangeF1Params) -> Result<(f64, f64, f64)> {
    check_len(pred.len(), truth.len())?;
    let p = labels_to_ranges(pred);
    let t = labels_to_ranges(truth);
    let recall = range_score(&t, &p, params.alpha_recall, params.bias, params.cardinality);
    let precision = range_score(&p, &t, params.alpha_precision, params.bias, params.cardinality);
    Ok((precision, recall, harmonic(precision, recall)))
}

pub fn range_f1(pred: &LabelSeries, truth: &LabelSeries, params: RangeF1Params) -> Result<f64> {
    range_prf(pred, truth, params).map(|x| x.2)
}

/// Indices sorted by descending score, ties by ascending index, grouped into
/// runs of equal score.
fn tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Area under the ROC curve in Mann-Whitney form: the probability that a
/// random positive outscores a random negative, ties counting one half.
pub fn auc_roc(scores: &AlignedScores, truth: &LabelSeries) -> Result<Option<f64>> {
    check_len(scores.len(), truth.len())?;
    let s = scores.as_slice();
    let y = truth.as_slice();
    let pos = truth.count_ones() as f64;
    let neg = y.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Ok(None);
    }
    // mid-ranks in ascending order
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && s[idx[j + 1]] == s[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += idx[i..=j].iter().filter(|&&k| y[k] == 1).count() as f64 * mid;
        i = j + 1;
    }
    let u = rank_sum - pos * (pos + 1.0) / 2.0;
    Ok(Some(u / (pos * neg)))
}

/// Average precision: sum over descending score cuts (whole tie groups) of
/// the recall gained times the precision at the cut.
pub fn auc_pr(scores: &AlignedScores, truth: &LabelSeries) -> Result<Option<f64>> {
    check_len(scores.len(), truth.len())?;
    let y = truth.as_slice();
    let pos = truth.count_ones() as f64;
    if pos == 0.0 {
        return Ok(None);
    }
    let (mut tp, mut seen, mut prev_recall, mut ap) = (0.0, 0.0, 0.0, 0.0);
    for g in tie_groups(scores.as_slice()) {
        tp += g.iter().filter(|&&i| y[i] == 1).count() as f64;
        seen += g.len() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * tp / seen;
        prev_recall = recall;
    }
    Ok(Some(ap))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VusKind {
    Roc,
    Pr,
}

/// Truth relaxed by linear ramps of width `buffer` on both sides of every
/// range; overlapping ramps add up, capped at 1.
pub fn buffered_labels(truth: &LabelSeries, buffer: usize) -> Vec<f64> {
    let n = truth.len();
    let mut ramp = vec![0.0; n];
    for r in labels_to_ranges(truth) {
        for j in 1..=buffer {
            let w = 1.0 - j as f64 / (buffer + 1) as f64;
            if r.start >= j {
                ramp[r.start - j] += w;
            }
            if r.end + j < n {
                ramp[r.end + j] += w;
            }
        }
    }
    truth
        .as_slice()
        .iter()
        .zip(ramp)
        .map(|(&t, r)| if t == 1 { 1.0 } else { r.min(1.0) })
        .collect()
}

/// Range-aware AUC against buffered labels.
///
/// True positives are the label mass of predicted points and false positives
/// the remaining mass `1 - y`. The true positive rate divides by the count of
/// hard positives (capped at 1) and, for `buffer >= 1`, is weighted by the
/// fraction of buffered ranges containing at least one predicted point. With
/// `buffer == 0` this is the plain point AUC.
fn buffered_auc(s: &[f64], truth: &LabelSeries, buffer: usize, kind: VusKind) -> f64 {
    let y = buffered_labels(truth, buffer);
    let hard = truth.count_ones() as f64;
    let soft_neg: f64 = y.iter().map(|v| 1.0 - v).sum();
    // buffered range id per point
    let mut range_of = vec![usize::MAX; y.len()];
    let mut n_ranges = 0;
    for i in 0..y.len() {
        if y[i] > 0.0 {
            if i == 0 || y[i - 1] == 0.0 {
                n_ranges += 1;
            }
            range_of[i] = n_ranges - 1;
        }
    }
    let mut hit = vec![false; n_ranges];
    let mut n_hit = 0usize;
    let (mut tp, mut fp, mut seen) = (0.0, 0.0, 0.0);
    let (mut prev_tpr, mut prev_fpr, mut area) = (0.0, 0.0, 0.0);
    for g in tie_groups(s) {
        for &i in &g {
            tp += y[i];
            fp += 1.0 - y[i];
            seen += 1.0;
            if range_of[i] != usize::MAX && !hit[range_of[i]] {
                hit[range_of[i]] = true;
                n_hit += 1;
            }
        }
        let existence = if buffer == 0 {
            1.0
        } else {
            n_hit as f64 / n_ranges as f64
        };
        let tpr = (tp / hard).min(1.0) * existence;
        let fpr = ratio(fp, soft_neg);
        area += match kind {
            VusKind::Roc => (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0,
            VusKind::Pr => (tpr - prev_tpr) * tp / seen,
        };
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    area.clamp(0.0, 1.0)
}

/// Volume under the surface: mean buffered AUC over buffers `0..=max_buffer`.
pub fn vus(scores: &AlignedScores, truth: &LabelSeries, max_buffer: usize, kind: VusKind) -> Result<Option<f64>> {
    check_len(scores.len(), truth.len())?;
    let pos = truth.count_ones();
    if pos == 0 || (kind == VusKind::Roc && pos == truth.len()) {
        return Ok(None);
    }
    let s = scores.as_slice();
    let total: f64 = (0..=max_buffer).map(|l| buffered_auc(s, truth, l, kind)).sum();
    Ok(Some(total / (max_buffer + 1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub range: RangeF1Params,
    pub vus_buffer: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            range: RangeF1Params::default(),
            vus_buffer: DEFAULT_VUS_BUFFER,
        }
    }
}

/// All eight measures for predicted labels and scores against the truth.
pub fn evaluate(
    scores: &AlignedScores,
    pred: &LabelSeries,
    truth: &LabelSeries,
    cfg: &MetricConfig,
) -> Result<MetricRecord> {
    let (precision, recall, f1) = point_prf(pred, truth)?;
    Ok(MetricRecord {
        precision,
        recall,
        f1,
        range_f1: range_f1(pred, truth, cfg.range)?,
        auc_roc: auc_roc(scores, truth)?,
        auc_pr: auc_pr(scores, truth)?,
        vus_roc: vus(scores, truth, cfg.vus_buffer, VusKind::Roc)?,
        vus_pr: vus(scores, truth, cfg.vus_buffer, VusKind::Pr)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lab(v: &[u8]) -> LabelSeries {
        LabelSeries::new(v.to_vec()).unwrap()
    }

    fn sc(v: &[f64]) -> AlignedScores {
        AlignedScores::new(v.to_vec()).unwrap()
    }

    fn pair_count_auc(s: &[f64], y: &[u8]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    /// Average precision with every distinct score as a threshold, computed
    /// from scratch at each cut.
    fn ap_oracle(s: &[f64], y: &[u8]) -> f64 {
        let mut thresholds: Vec<f64> = s.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let pos = y.iter().filter(|&&v| v == 1).count() as f64;
        let mut prev = 0.0;
        let mut ap = 0.0;
        for t in thresholds {
            let pred: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= t).collect();
            let tp = pred.iter().filter(|&&i| y[i] == 1).count() as f64;
            let r = tp / pos;
            ap += (r - prev) * tp / pred.len() as f64;
            prev = r;
        }
        ap
    }

    #[test]
    fn point_examples() {
        assert_eq!(point_prf(&lab(&[0, 1, 1, 0]), &lab(&[0, 1, 1, 0])).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(point_prf(&lab(&[1, 0, 1]), &lab(&[1, 1, 0])).unwrap(), (0.5, 0.5, 0.5));
        assert_eq!(point_prf(&lab(&[0, 0, 0]), &lab(&[1, 0, 1])).unwrap(), (0.0, 0.0, 0.0));
        assert!(point_prf(&lab(&[0, 0]), &lab(&[0])).is_err());
    }

    #[test]
    fn range_examples() {
        let p = RangeF1Params::default();
        let t = lab(&[0, 1, 1, 0, 0, 1, 1, 1, 0]);
        assert_eq!(range_f1(&t, &t, p).unwrap(), 1.0);
        assert_eq!(range_f1(&lab(&[1, 0, 0, 1]), &lab(&[0, 1, 1, 0]), p).unwrap(), 0.0);
        let mut truth = vec![1u8; 10];
        truth.extend([0; 5]);
        let mut pred = vec![1u8; 5];
        pred.extend([0; 10]);
        let (pr, rc, f) = range_prf(&lab(&pred), &lab(&truth), p).unwrap();
        assert_eq!((pr, rc), (1.0, 0.75));
        assert!((f - 2.0 * 0.75 / 1.75).abs() < 1e-12);
    }

    #[test]
    fn range_bias_and_cardinality() {
        // truth [0,3], prediction covers positions 0 and 3 as two ranges
        let truth = lab(&[1, 1, 1, 1]);
        let pred = lab(&[1, 0, 0, 1]);
        let front = RangeF1Params {
            alpha_recall: 0.0,
            bias: PositionBias::Front,
            ..Default::default()
        };
        // front weights 4,3,2,1: covered 4+1 of 10, halved for two matches
        let (_, r, _) = range_prf(&pred, &truth, front).unwrap();
        assert!((r - 0.25).abs() < 1e-12);
        let one = RangeF1Params {
            cardinality: Cardinality::One,
            ..front
        };
        let (_, r, _) = range_prf(&pred, &truth, one).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auc_examples() {
        let roc = |s: &[f64], y: &[u8]| auc_roc(&sc(s), &lab(y)).unwrap().unwrap();
        assert_eq!(roc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]), 1.0);
        assert_eq!(roc(&[0.5; 4], &[0, 1, 0, 1]), 0.5);
        assert_eq!(roc(&[0.4, 0.3, 0.2, 0.6], &[0, 1, 0, 1]), 0.75);
        assert_eq!(auc_roc(&sc(&[1.0, 2.0]), &lab(&[1, 1])).unwrap(), None);

        let pr = |s: &[f64], y: &[u8]| auc_pr(&sc(s), &lab(y)).unwrap().unwrap();
        assert_eq!(pr(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]), 1.0);
        assert_eq!(pr(&[0.9, 0.1], &[0, 1]), 0.5);
        assert_eq!(auc_pr(&sc(&[1.0]), &lab(&[0])).unwrap(), None);
    }

    #[test]
    fn random_scores_ap_near_prevalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 20_000;
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.1)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let prevalence = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
        let ap = auc_pr(&sc(&s), &lab(&y)).unwrap().unwrap();
        assert!((ap - prevalence).abs() < 0.05);
    }

    #[test]
    fn buffered_label_shape() {
        let b = buffered_labels(&lab(&[0, 0, 0, 1, 0, 0, 0]), 2);
        let third = 1.0 / 3.0;
        let expected = [0.0, third, 2.0 * third, 1.0, 2.0 * third, third, 0.0];
        for (a, e) in b.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        // ramps of neighboring ranges add and cap
        let b = buffered_labels(&lab(&[1, 0, 1]), 2);
        assert_eq!(b, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn vus_examples() {
        let y = lab(&[0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 1, 0, 0]);
        let perfect: Vec<f64> = y.as_slice().iter().map(|&v| f64::from(v)).collect();
        for l in [0, 1, 3, 8] {
            for kind in [VusKind::Roc, VusKind::Pr] {
                let v = vus(&sc(&perfect), &y, l, kind).unwrap().unwrap();
                assert!((v - 1.0).abs() < 1e-12, "{l} {kind:?} {v}");
            }
        }
    }

    fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![0.0f64..1.0, (0u8..5).prop_map(f64::from)], n),
                prop::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_roc_matches_pair_counting((s, y) in scores_and_labels()) {
            let got = auc_roc(&sc(&s), &lab(&y)).unwrap();
            let pos = y.iter().filter(|&&v| v == 1).count();
            if pos == 0 || pos == y.len() {
                prop_assert!(got.is_none());
            } else {
                let got = got.unwrap();
                prop_assert!((got - pair_count_auc(&s, &y)).abs() <= 1e-9);
                // strictly increasing transform and sign reversal
                let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
                prop_assert!((auc_roc(&sc(&t), &lab(&y)).unwrap().unwrap() - got).abs() <= 1e-9);
                let r: Vec<f64> = s.iter().map(|v| -v).collect();
                prop_assert!((auc_roc(&sc(&r), &lab(&y)).unwrap().unwrap() - (1.0 - got)).abs() <= 1e-9);
                let v = vus(&sc(&s), &lab(&y), 0, VusKind::Roc).unwrap().unwrap();
                prop_assert!((v - got).abs() <= 1e-9);
            }
        }

        #[test]
        fn auc_pr_matches_oracle((s, y) in scores_and_labels()) {
            let got = auc_pr(&sc(&s), &lab(&y)).unwrap();
            if y.contains(&1) {
                let got = got.unwrap();
                prop_assert!((got - ap_oracle(&s, &y)).abs() <= 1e-9);
                let v = vus(&sc(&s), &lab(&y), 0, VusKind::Pr).unwrap().unwrap();
                prop_assert!((v - got).abs() <= 1e-9);
            } else {
                prop_assert!(got.is_none());
            }
        }

        #[test]
        fn range_f1_reduces_to_point_f1(
            n in 3usize..80, picks in prop::collection::vec((0usize..80, 0usize..80), 0..20)
        ) {
            // isolated single points only: even indices
            let mut t = vec![0u8; n];
            let mut p = vec![0u8; n];
            for (a, b) in picks {
                t[(a % n) & !1] = 1;
                p[(b % n) & !1] = 1;
            }
            let params = RangeF1Params { alpha_recall: 0.0, alpha_precision: 0.0, ..Default::default() };
            let rf = range_f1(&lab(&p), &lab(&t), params).unwrap();
            let (_, _, f) = point_prf(&lab(&p), &lab(&t)).unwrap();
            prop_assert!((rf - f).abs() <= 1e-12);
        }

        #[test]
        fn all_metrics_in_unit_interval((s, y) in scores_and_labels(), l in 0usize..10) {
            let pred = LabelSeries::from_bools(s.iter().map(|v| *v > 0.5));
            let cfg = MetricConfig { vus_buffer: l, ..Default::default() };
            let m = evaluate(&sc(&s), &pred, &lab(&y), &cfg).unwrap();
            for name in METRIC_NAMES {
                if let Some(v) = m.get(name) {
                    prop_assert!((0.0..=1.0).contains(&v), "{} = {}", name, v);
                }
            }
        }
    }
}
