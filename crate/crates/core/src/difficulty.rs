//! Dataset difficulty measures over instance-aligned sequences, all built on SBD.
//!
//! * KNC: mean k-NN distance of anomalous sequences to the standard set over
//!   that of normal test sequences.
//! * RC: mean distance over nearest-neighbor distance across all sequences.
//! * NC: mean pairwise distance among normals over that among anomalies.
//! * NA: closest anomalous/normal centroid pair over the mean pairwise
//!   distance between normal centroids.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shapedist::{sbd, sbd_kmeans, Sequence};

pub const DEFAULT_KNC_K: usize = 5;
pub const DEFAULT_NA_CLUSTERS: usize = 3;

/// Denominators at or below this are treated as zero; SBD of a sequence with
/// itself is only zero up to rounding.
pub const ZERO_DISTANCE: f64 = 1e-12;

/// Standard, normal-test and anomalous sequences of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSets {
    pub std_set: Vec<Sequence>,
    pub nor_set: Vec<Sequence>,
    pub ano_set: Vec<Sequence>,
    pub k: usize,
}

/// Mean of the `k` smallest SBDs from `s` to `reference`.
pub fn knn_mean_distance(s: &Sequence, reference: &[Sequence], k: usize) -> Result<f64> {
    let mut d = reference.iter().map(|r| sbd(s, r)).collect::<Result<Vec<_>>>()?;
    d.sort_by(f64::total_cmp);
    let k = k.min(d.len());
    Ok(d[..k].iter().sum::<f64>() / k as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn knc(sets: &SequenceSets) -> Result<f64> {
    if sets.std_set.is_empty() || sets.nor_set.is_empty() || sets.ano_set.is_empty() {
        return Err(Error::invalid("KNC needs nonempty standard, normal and anomaly sets"));
    }
    if sets.k == 0 || sets.k > sets.std_set.len() {
        return Err(Error::invalid(format!(
            "KNC k must lie in 1..={}, got {}",
            sets.std_set.len(),
            sets.k
        )));
    }
    let side = |set: &[Sequence]| -> Result<f64> {
        let d = set
            .iter()
            .map(|s| knn_mean_distance(s, &sets.std_set, sets.k))
            .collect::<Result<Vec<_>>>()?;
        Ok(mean(&d))
    };
    let num = side(&sets.ano_set)?;
    let den = side(&sets.nor_set)?;
    if den <= ZERO_DISTANCE {
        return Err(Error::Degenerate(
            "normal sequences coincide with the standard set".into(),
        ));
    }
    Ok(num / den)
}

pub fn rc(all: &[Sequence]) -> Result<f64> {
    if all.len() < 3 {
        return Err(Error::invalid("RC needs at least 3 sequences"));
    }
    let n = all.len();
    let mut dm = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = sbd(&all[i], &all[j])?;
            dm[i * n + j] = d;
            dm[j * n + i] = d;
        }
    }
    let (mut means, mut mins) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dm[i * n + j]).collect();
        means.push(mean(&others));
        mins.push(others.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let den = mean(&mins);
    if den <= ZERO_DISTANCE {
        return Err(Error::Degenerate("duplicate sequences make RC undefined".into()));
    }
    Ok(mean(&means) / den)
}

fn mean_pairwise(set: &[Sequence]) -> Result<f64> {
    let mut d = Vec::new();
    for i in 0..set.len() {
        for j in 0..set.len() {
            if i != j {
                d.push(sbd(&set[i], &set[j])?);
            }
        }
    }
    Ok(mean(&d))
}

pub fn nc(nor_set: &[Sequence], ano_set: &[Sequence]) -> Result<f64> {
    if nor_set.len() < 2 || ano_set.len() < 2 {
        return Err(Error::invalid("NC needs at least 2 normal and 2 anomalous sequences"));
    }
    let den = mean_pairwise(ano_set)?;
    if den <= ZERO_DISTANCE {
        return Err(Error::Degenerate("anomalous sequences are identical".into()));
    }
    Ok(mean_pairwise(nor_set)? / den)
}

/// Ratio for given centroids: closest anomalous/normal pair over the mean
/// pairwise distance between normal centroids.
pub fn na_from_centroids(nor_centroids: &[Sequence], ano_centroids: &[Sequence]) -> Result<f64> {
    if nor_centroids.len() < 2 || ano_centroids.is_empty() {
        return Err(Error::invalid("NA needs at least 2 normal centroids and 1 anomalous"));
    }
    let den = mean_pairwise(nor_centroids)?;
    if den <= ZERO_DISTANCE {
        return Err(Error::Degenerate("normal cluster centroids coincide".into()));
    }
    let mut best = f64::INFINITY;
    for a in ano_centroids {
        for c in nor_centroids {
            best = best.min(sbd(a, c)?);
        }
    }
    Ok(best / den)
}

pub fn na(nor_set: &[Sequence], ano_set: &[Sequence], k_nor: usize, k_ano: usize, seed: u64) -> Result<f64> {
    if k_nor < 2 {
        return Err(Error::invalid("NA needs K_nor >= 2"));
    }
    if nor_set.len() < k_nor || ano_set.len() < k_ano || k_ano == 0 {
        return Err(Error::invalid(format!(
            "NA needs at least {k_nor} normal and {k_ano} anomalous sequences"
        )));
    }
    let cn = sbd_kmeans(nor_set, k_nor, seed, 100)?;
    let ca = sbd_kmeans(ano_set, k_ano, seed, 100)?;
    na_from_centroids(&cn.centroids, &ca.centroids)
}

/// Half-open KNC bands used to slice benchmark results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KncBand {
    #[serde(rename = "<1")]
    Below1,
    #[serde(rename = "1-2")]
    From1To2,
    #[serde(rename = "2-5")]
    From2To5,
    #[serde(rename = "5-10")]
    From5To10,
    #[serde(rename = ">10")]
    Above10,
}

impl KncBand {
    pub const ALL: [KncBand; 5] = [
        KncBand::Below1,
        KncBand::From1To2,
        KncBand::From2To5,
        KncBand::From5To10,
        KncBand::Above10,
    ];

    pub fn label(self) -> &'static str {
        match self {
            KncBand::Below1 => "<1",
            KncBand::From1To2 => "1-2",
            KncBand::From2To5 => "2-5",
            KncBand::From5To10 => "5-10",
            KncBand::Above10 => ">10",
        }
    }
}

impl fmt::Display for KncBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn knc_band(value: f64) -> KncBand {
    if value < 1.0 {
        KncBand::Below1
    } else if value < 2.0 {
        KncBand::From1To2
    } else if value < 5.0 {
        KncBand::From2To5
    } else if value < 10.0 {
        KncBand::From5To10
    } else {
        KncBand::Above10
    }
}

/// All four measures for one dataset; entries are `None` when undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyReport {
    pub knc: Option<f64>,
    pub rc: Option<f64>,
    pub nc: Option<f64>,
    pub na: Option<f64>,
}

pub fn report(sets: &SequenceSets, na_clusters: usize, seed: u64) -> DifficultyReport {
    let all: Vec<Sequence> = sets
        .std_set
        .iter()
        .chain(&sets.nor_set)
        .chain(&sets.ano_set)
        .cloned()
        .collect();
    let k_ano = na_clusters.min(sets.ano_set.len()).max(1);
    let k_nor = na_clusters.min(sets.nor_set.len());
    DifficultyReport {
        knc: knc(sets).ok(),
        rc: rc(&all).ok(),
        nc: nc(&sets.nor_set, &sets.ano_set).ok(),
        na: na(&sets.nor_set, &sets.ano_set, k_nor, k_ano, seed).ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(v: &[f64]) -> Sequence {
        Sequence::new(v.to_vec()).unwrap()
    }

    fn random_set(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<Sequence> {
        (0..n)
            .map(|_| seq(&(0..m).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()))
            .collect()
    }

    /// Full distance matrix and a complete sort per row.
    fn knc_oracle(sets: &SequenceSets) -> f64 {
        let side = |set: &[Sequence]| {
            let mut total = 0.0;
            for s in set {
                let mut row: Vec<f64> = sets.std_set.iter().map(|r| sbd(s, r).unwrap()).collect();
                row.sort_by(|a, b| a.partial_cmp(b).unwrap());
                total += row.iter().take(sets.k).sum::<f64>() / sets.k as f64;
            }
            total / set.len() as f64
        };
        side(&sets.ano_set) / side(&sets.nor_set)
    }

    #[test]
    fn knc_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let std_set = random_set(6, 12, &mut rng);
        let nor = random_set(4, 12, &mut rng);
        let sets = SequenceSets {
            std_set: std_set.clone(),
            nor_set: nor.clone(),
            ano_set: nor.clone(),
            k: 3,
        };
        assert_eq!(knc(&sets).unwrap(), 1.0);
        let ano = random_set(3, 12, &mut rng);
        let full = SequenceSets {
            std_set: std_set.clone(),
            nor_set: nor.clone(),
            ano_set: ano.clone(),
            k: 6,
        };
        let full_mean = |set: &[Sequence]| {
            let d: Vec<f64> = set
                .iter()
                .flat_map(|s| std_set.iter().map(move |r| sbd(s, r).unwrap()))
                .collect();
            mean(&d)
        };
        assert!((knc(&full).unwrap() - full_mean(&ano) / full_mean(&nor)).abs() < 1e-12);
        let bad = SequenceSets { k: 7, ..full };
        assert!(knc(&bad).is_err());
    }

    #[test]
    fn rc_examples() {
        // three mutually orthogonal-shaped sequences at equal SBD
        let a = seq(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let b = seq(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        let c = seq(&[0.0, 0.0, 1.0, 0.0, 0.0]);
        // every pair of spikes aligns under shifting, so all SBDs are 0
        assert!(rc(&[a, b, c]).is_err());
        // an equidistant triple: every pairwise SBD is 1/3
        let e = [seq(&[-1.0, -1.0, -1.0]), seq(&[-1.0, -1.0, 1.0]), seq(&[1.0, -1.0, -1.0])];
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((sbd(&e[i], &e[j]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((rc(&e).unwrap() - 1.0).abs() < 1e-12);
        // two tight pairs far apart
        let s = |v: [f64; 4]| seq(&v);
        let set = [
            s([1.0, 1.0, -1.0, -1.0]),
            s([1.0, 1.1, -1.0, -1.0]),
            s([1.0, -1.0, 1.0, -1.0]),
            s([1.0, -1.0, 1.1, -1.0]),
        ];
        assert!(rc(&set).unwrap() > 1.0);
        let dup: Vec<Sequence> = set.iter().chain(&set).cloned().collect();
        assert!(rc(&dup).is_err());
    }

    #[test]
    fn nc_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let nor = random_set(5, 10, &mut rng);
        assert!((nc(&nor, &nor).unwrap() - 1.0).abs() < 1e-15);
        let same = vec![nor[0].clone(), nor[0].clone(), nor[0].clone()];
        assert!(nc(&nor, &same).is_err());
        let ano = random_set(4, 10, &mut rng);
        let brute = |set: &[Sequence]| {
            let mut t = 0.0;
            let mut c = 0.0;
            for i in 0..set.len() {
                for j in 0..set.len() {
                    if i != j {
                        t += sbd(&set[i], &set[j]).unwrap();
                        c += 1.0;
                    }
                }
            }
            t / c
        };
        assert!((nc(&nor, &ano).unwrap() - brute(&nor) / brute(&ano)).abs() < 1e-12);
    }

    #[test]
    fn na_examples() {
        let a = seq(&[1.0, 1.0, -1.0, -1.0]);
        let b = seq(&[1.0, -1.0, 1.0, -1.0]);
        let den = sbd(&a, &b).unwrap();
        let x = seq(&[1.0, 0.5, -1.0, -1.0]);
        let num = sbd(&x, &a).unwrap().min(sbd(&x, &b).unwrap());
        let got = na_from_centroids(&[a.clone(), b.clone()], &[x]).unwrap();
        assert!((got - num / den).abs() < 1e-12);
        assert_eq!(na_from_centroids(&[a.clone(), b.clone()], &[a.clone()]).unwrap(), 0.0);
        assert!(na_from_centroids(&[a.clone(), a.clone()], &[b.clone()]).is_err());
        assert!(na(&[a.clone(), b.clone()], &[a], 1, 1, 0).is_err());
    }

    #[test]
    fn band_edges() {
        assert_eq!(knc_band(0.5), KncBand::Below1);
        assert_eq!(knc_band(1.0), KncBand::From1To2);
        assert_eq!(knc_band(7.0), KncBand::From5To10);
        assert_eq!(knc_band(10.0), KncBand::Above10);
        assert_eq!(knc_band(5.0), KncBand::From5To10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn knc_matches_oracle_and_is_order_invariant(
            seed in 0u64..1000, n_std in 1usize..30, n_nor in 1usize..20, n_ano in 1usize..20, k in 1usize..10
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sets = SequenceSets {
                std_set: random_set(n_std, 8, &mut rng),
                nor_set: random_set(n_nor, 8, &mut rng),
                ano_set: random_set(n_ano, 8, &mut rng),
                k: k.min(n_std),
            };
            let v = knc(&sets).unwrap();
            prop_assert!((v - knc_oracle(&sets)).abs() <= 1e-12 * v.max(1.0));
            let mut rev = sets.clone();
            rev.std_set.reverse();
            rev.nor_set.reverse();
            rev.ano_set.reverse();
            prop_assert!((knc(&rev).unwrap() - v).abs() <= 1e-12 * v.max(1.0));
        }

        #[test]
        fn scale_invariance(seed in 0u64..1000, c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sets = SequenceSets {
                std_set: random_set(6, 8, &mut rng),
                nor_set: random_set(4, 8, &mut rng),
                ano_set: random_set(4, 8, &mut rng),
                k: 3,
            };
            let scale = |v: &[Sequence]| -> Vec<Sequence> {
                v.iter().map(|s| seq(&s.as_slice().iter().map(|x| x * c).collect::<Vec<_>>())).collect()
            };
            let scaled = SequenceSets {
                std_set: scale(&sets.std_set),
                nor_set: scale(&sets.nor_set),
                ano_set: scale(&sets.ano_set),
                k: 3,
            };
            prop_assert!((knc(&sets).unwrap() - knc(&scaled).unwrap()).abs() < 1e-9);
            prop_assert!((nc(&sets.nor_set, &sets.ano_set).unwrap()
                - nc(&scaled.nor_set, &scaled.ano_set).unwrap()).abs() < 1e-9);
            let all: Vec<Sequence> = sets.std_set.iter().chain(&sets.nor_set).cloned().collect();
            let all_s: Vec<Sequence> = scaled.std_set.iter().chain(&scaled.nor_set).cloned().collect();
            prop_assert!((rc(&all).unwrap() - rc(&all_s).unwrap()).abs() < 1e-9);
        }
    }
}
