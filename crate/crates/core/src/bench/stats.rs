//! Rank statistics over a detectors × bundles matrix of metric values.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Largest sample (after dropping zero differences) for which the signed-rank
/// null distribution is computed exactly.
pub const WILCOXON_EXACT_MAX: usize = 25;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Ranks with 1 = largest value; tied values share the mean of their
/// positions.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    average_ranks(values, &order)
}

/// Ranks with 1 = smallest value, ties averaged.
pub fn rank_ascending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    average_ranks(values, &order)
}

fn average_ranks(values: &[f64], order: &[usize]) -> Vec<f64> {
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Per-bundle ranks of each detector on one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub metric: String,
    pub detectors: Vec<String>,
    pub bundles: Vec<String>,
    /// `ranks[d][b]`.
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
}

impl RankTable {
    /// `values[d][b]`, higher is better.
    pub fn from_values(
        metric: &str,
        detectors: Vec<String>,
        bundles: Vec<String>,
        values: &[Vec<f64>],
    ) -> Result<Self> {
        let k = detectors.len();
        if k < 2 {
            return Err(Error::invalid("ranking needs at least two detectors"));
        }
        if values.len() != k || values.iter().any(|row| row.len() != bundles.len()) {
            return Err(Error::invalid("value matrix does not match detectors × bundles"));
        }
        let mut ranks = vec![vec![0.0; bundles.len()]; k];
        for b in 0..bundles.len() {
            let col: Vec<f64> = values.iter().map(|row| row[b]).collect();
            for (d, r) in rank_descending(&col).into_iter().enumerate() {
                ranks[d][b] = r;
            }
        }
        let n = bundles.len().max(1) as f64;
        let mean_ranks = ranks.iter().map(|row| row.iter().sum::<f64>() / n).collect();
        Ok(Self {
            metric: metric.to_string(),
            detectors,
            bundles,
            ranks,
            mean_ranks,
        })
    }

    pub fn n_bundles(&self) -> usize {
        self.bundles.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Friedman {
    pub chi2: f64,
    pub p_value: f64,
}

/// Friedman χ² from mean ranks, with the p-value from χ²(k − 1).
pub fn friedman(table: &RankTable) -> Result<Friedman> {
    let k = table.detectors.len();
    let n = table.n_bundles();
    if k < 2 || n < 2 {
        return Err(Error::invalid(format!(
            "Friedman test needs at least 2 detectors and 2 bundles, got {k} and {n}"
        )));
    }
    let kf = k as f64;
    let centre = (kf + 1.0) / 2.0;
    let ss: f64 = table.mean_ranks.iter().map(|r| (r - centre).powi(2)).sum();
    let chi2 = 12.0 * n as f64 / (kf * (kf + 1.0)) * ss;
    let dist = ChiSquared::new(kf - 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let p_value = if chi2 <= 0.0 { 1.0 } else { dist.sf(chi2) };
    Ok(Friedman { chi2, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedRank {
    /// Number of nonzero differences.
    pub n: usize,
    pub w_plus: f64,
    pub p_value: f64,
    pub exact: bool,
}

fn signed_ranks(diffs: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    (rank_ascending(&abs), nz.iter().map(|d| *d > 0.0).collect())
}

/// Exact two-sided signed-rank test. Tied ranks are handled by enumerating
/// the null distribution of the doubled (hence integer) ranks.
pub fn wilcoxon_exact(diffs: &[f64]) -> SignedRank {
    let (ranks, pos) = signed_ranks(diffs);
    let n = ranks.len();
    if n == 0 {
        return SignedRank {
            n,
            w_plus: 0.0,
            p_value: 1.0,
            exact: true,
        };
    }
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[s] = number of sign assignments whose positive doubled-rank sum is s.
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w2: usize = doubled.iter().zip(&pos).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let all = 2f64.powi(n as i32);
    let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
    let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
    SignedRank {
        n,
        w_plus: w2 as f64 / 2.0,
        p_value: (2.0 * lower.min(upper)).min(1.0),
        exact: true,
    }
}

/// Normal approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_normal(diffs: &[f64]) -> SignedRank {
    let (ranks, pos) = signed_ranks(diffs);
    let n = ranks.len();
    let w_plus: f64 = ranks.iter().zip(&pos).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    if n == 0 {
        return SignedRank {
            n,
            w_plus,
            p_value: 1.0,
            exact: false,
        };
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    SignedRank {
        n,
        w_plus,
        p_value,
        exact: false,
    }
}

/// Exact test up to [`WILCOXON_EXACT_MAX`] nonzero differences, normal
/// approximation above.
pub fn wilcoxon(diffs: &[f64]) -> SignedRank {
    let n = diffs.iter().filter(|d| **d != 0.0).count();
    if n <= WILCOXON_EXACT_MAX {
        wilcoxon_exact(diffs)
    } else {
        wilcoxon_normal(diffs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    Holm,
    None,
}

/// Holm step-down adjusted p-values, in input order.
pub fn holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (i, &o) in order.iter().enumerate() {
        running = running.max(((m - i) as f64 * p[o]).min(1.0));
        out[o] = running;
    }
    out
}

/// Pairwise signed-rank tests between detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTests {
    pub detectors: Vec<String>,
    pub correction: Correction,
    /// Symmetric; the diagonal is 1.
    pub p_raw: Vec<Vec<f64>>,
    pub p_adjusted: Vec<Vec<f64>>,
}

/// `values[d][b]` as in [`RankTable::from_values`].
pub fn wilcoxon_pairs(detectors: &[String], values: &[Vec<f64>], correction: Correction) -> PairwiseTests {
    let k = detectors.len();
    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let diffs: Vec<f64> = values[a].iter().zip(&values[b]).map(|(x, y)| x - y).collect();
            pairs.push((a, b));
            raw.push(wilcoxon(&diffs).p_value);
        }
    }
    let adj = match correction {
        Correction::Holm => holm(&raw),
        Correction::None => raw.clone(),
    };
    let mut p_raw = vec![vec![1.0; k]; k];
    let mut p_adjusted = vec![vec![1.0; k]; k];
    for (((a, b), r), j) in pairs.into_iter().zip(raw).zip(adj) {
        p_raw[a][b] = r;
        p_raw[b][a] = r;
        p_adjusted[a][b] = j;
        p_adjusted[b][a] = j;
    }
    PairwiseTests {
        detectors: detectors.to_vec(),
        correction,
        p_raw,
        p_adjusted,
    }
}

/// Critical-difference diagram data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdData {
    pub alpha: f64,
    /// `(detector, mean rank)`, best first.
    pub ranking: Vec<(String, f64)>,
    /// Maximal groups (size ≥ 2) whose members are pairwise not
    /// significantly different, as detector names in ranking order.
    pub cliques: Vec<Vec<String>>,
}

fn bron_kerbosch(adj: &[Vec<bool>], r: &mut Vec<usize>, mut p: Vec<usize>, mut x: Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if p.is_empty() && x.is_empty() {
        out.push(r.clone());
        return;
    }
    while let Some(v) = p.pop() {
        r.push(v);
        let np = p.iter().copied().filter(|&u| adj[v][u]).collect();
        let nx = x.iter().copied().filter(|&u| adj[v][u]).collect();
        bron_kerbosch(adj, r, np, nx, out);
        r.pop();
        x.push(v);
    }
}

pub fn cd_data(table: &RankTable, tests: &PairwiseTests, alpha: f64) -> Result<CdData> {
    if table.detectors != tests.detectors {
        return Err(Error::invalid("rank table and pairwise tests cover different detectors"));
    }
    let k = table.detectors.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| table.mean_ranks[a].total_cmp(&table.mean_ranks[b]).then(a.cmp(&b)));
    let pos: Vec<usize> = {
        let mut p = vec![0; k];
        for (i, &o) in order.iter().enumerate() {
            p[o] = i;
        }
        p
    };
    let adj: Vec<Vec<bool>> = (0..k)
        .map(|a| (0..k).map(|b| a != b && tests.p_adjusted[a][b] >= alpha).collect())
        .collect();
    let mut found = Vec::new();
    bron_kerbosch(&adj, &mut Vec::new(), (0..k).rev().collect(), Vec::new(), &mut found);
    let mut cliques: Vec<Vec<usize>> = found
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|mut c| {
            c.sort_by_key(|&d| pos[d]);
            c
        })
        .collect();
    cliques.sort_by_key(|c| c.iter().map(|&d| pos[d]).collect::<Vec<_>>());
    Ok(CdData {
        alpha,
        ranking: order
            .iter()
            .map(|&d| (table.detectors[d].clone(), table.mean_ranks[d]))
            .collect(),
        cliques: cliques
            .into_iter()
            .map(|c| c.into_iter().map(|d| table.detectors[d].clone()).collect())
            .collect(),
    })
}
