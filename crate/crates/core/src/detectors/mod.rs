//! One-class detectors over window rows.
//!
//! A detector is fit on standard windows only and then scores arbitrary
//! windows; larger scores mean more anomalous. Every detector is a pure
//! function of its spec (including the seed) and the training rows.

mod cluster;
mod common;
mod density;
mod linear;
mod neighbors;
mod robust;

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::ScoreAlignment;
use crate::series::{ScoreSeries, WindowMatrix};

use common::Points;

pub use density::BANDWIDTH_FLOOR;
pub use robust::COV_RIDGE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorId {
    Knn,
    Lof,
    Sampling,
    Sos,
    Kde,
    Gmm,
    Kmeans,
    Cblof,
    Cof,
    Hbos,
    Iforest,
    Inne,
    Loda,
    Copod,
    Ecod,
    Abod,
    Qmcd,
    Mad,
    Msd,
    Mcd,
    Pca,
    Cd,
    Sod,
    LinearRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Forecast,
    Statistical,
    Proximity,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Forecast, Family::Statistical, Family::Proximity];

    pub fn name(self) -> &'static str {
        match self {
            Family::Forecast => "forecast",
            Family::Statistical => "statistical",
            Family::Proximity => "proximity",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kind and valid range of one hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamKind {
    /// Integer at least `min`.
    Count { min: usize },
    /// Real in the closed interval.
    Real { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDef {
    pub name: &'static str,
    pub default: f64,
    pub kind: ParamKind,
}

const fn count(name: &'static str, default: f64, min: usize) -> ParamDef {
    ParamDef {
        name,
        default,
        kind: ParamKind::Count { min },
    }
}

const fn real(name: &'static str, default: f64, lo: f64, hi: f64) -> ParamDef {
    ParamDef {
        name,
        default,
        kind: ParamKind::Real { lo, hi },
    }
}

impl DetectorId {
    pub const ALL: [DetectorId; 24] = [
        DetectorId::Knn,
        DetectorId::Lof,
        DetectorId::Sampling,
        DetectorId::Sos,
        DetectorId::Kde,
        DetectorId::Gmm,
        DetectorId::Kmeans,
        DetectorId::Cblof,
        DetectorId::Cof,
        DetectorId::Hbos,
        DetectorId::Iforest,
        DetectorId::Inne,
        DetectorId::Loda,
        DetectorId::Copod,
        DetectorId::Ecod,
        DetectorId::Abod,
        DetectorId::Qmcd,
        DetectorId::Mad,
        DetectorId::Msd,
        DetectorId::Mcd,
        DetectorId::Pca,
        DetectorId::Cd,
        DetectorId::Sod,
        DetectorId::LinearRegression,
    ];

    /// Machine name used in configs, files and the CLI.
    pub fn key(self) -> &'static str {
        match self {
            DetectorId::Knn => "knn",
            DetectorId::Lof => "lof",
            DetectorId::Sampling => "sampling",
            DetectorId::Sos => "sos",
            DetectorId::Kde => "kde",
            DetectorId::Gmm => "gmm",
            DetectorId::Kmeans => "kmeans",
            DetectorId::Cblof => "cblof",
            DetectorId::Cof => "cof",
            DetectorId::Hbos => "hbos",
            DetectorId::Iforest => "iforest",
            DetectorId::Inne => "inne",
            DetectorId::Loda => "loda",
            DetectorId::Copod => "copod",
            DetectorId::Ecod => "ecod",
            DetectorId::Abod => "abod",
            DetectorId::Qmcd => "qmcd",
            DetectorId::Mad => "mad",
            DetectorId::Msd => "msd",
            DetectorId::Mcd => "mcd",
            DetectorId::Pca => "pca",
            DetectorId::Cd => "cd",
            DetectorId::Sod => "sod",
            DetectorId::LinearRegression => "linear_regression",
        }
    }

    /// Display name for reports.
    pub fn name(self) -> &'static str {
        match self {
            DetectorId::Knn => "KNN",
            DetectorId::Lof => "LOF",
            DetectorId::Sampling => "Sampling",
            DetectorId::Sos => "SOS",
            DetectorId::Kde => "KDE",
            DetectorId::Gmm => "GMM",
            DetectorId::Kmeans => "KMeans",
            DetectorId::Cblof => "CBLOF",
            DetectorId::Cof => "COF",
            DetectorId::Hbos => "HBOS",
            DetectorId::Iforest => "IForest",
            DetectorId::Inne => "INNE",
            DetectorId::Loda => "LODA",
            DetectorId::Copod => "COPOD",
            DetectorId::Ecod => "ECOD",
            DetectorId::Abod => "ABOD",
            DetectorId::Qmcd => "QMCD",
            DetectorId::Mad => "MAD",
            DetectorId::Msd => "MSD",
            DetectorId::Mcd => "MCD",
            DetectorId::Pca => "PCA",
            DetectorId::Cd => "CD",
            DetectorId::Sod => "SOD",
            DetectorId::LinearRegression => "LinearRegression",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        DetectorId::ALL
            .into_iter()
            .find(|d| d.key() == lower || d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown detector `{s}`")))
    }

    pub fn family(self) -> Family {
        use DetectorId::*;
        match self {
            LinearRegression => Family::Forecast,
            Copod | Ecod | Gmm | Hbos | Kde | Loda | Mad | Mcd | Msd => Family::Statistical,
            Abod | Cblof | Cd | Cof | Iforest | Inne | Kmeans | Knn | Lof | Pca | Qmcd | Sampling
            | Sod | Sos => Family::Proximity,
        }
    }

    /// How this detector's window scores map back to points.
    pub fn alignment(self) -> ScoreAlignment {
        match self {
            DetectorId::LinearRegression => ScoreAlignment::LastPoint,
            _ => ScoreAlignment::WindowMean,
        }
    }

    pub fn params(self) -> &'static [ParamDef] {
        use DetectorId::*;
        const K: ParamDef = count("k", 10.0, 1);
        const CLUSTERS: ParamDef = count("clusters", 8.0, 1);
        const NEIGHBOR: &[ParamDef] = &[K];
        const SOD: &[ParamDef] = &[K, real("alpha", 0.8, 0.0, 1.0)];
        const SAMPLING: &[ParamDef] = &[count("subset", 20.0, 1)];
        const SOS: &[ParamDef] = &[real("perplexity", 4.5, 1.0, 1e6)];
        const INNE: &[ParamDef] = &[count("estimators", 200.0, 1), count("samples", 8.0, 2)];
        const KDE: &[ParamDef] = &[real("bandwidth", 0.0, 0.0, 1e6)];
        const GMM: &[ParamDef] = &[
            count("components", 4.0, 1),
            count("max_iter", 100.0, 1),
            real("reg", 1e-6, 0.0, 1.0),
        ];
        const KMEANS: &[ParamDef] = &[CLUSTERS];
        const CBLOF: &[ParamDef] = &[CLUSTERS, real("alpha", 0.9, 0.0, 1.0), real("beta", 5.0, 1.0, 1e6)];
        const HBOS: &[ParamDef] = &[count("bins", 10.0, 1)];
        const LODA: &[ParamDef] = &[count("bins", 10.0, 1), count("projections", 100.0, 1)];
        const IFOREST: &[ParamDef] = &[count("trees", 100.0, 1), count("samples", 256.0, 2)];
        const MCD: &[ParamDef] = &[real("support", 0.75, 0.5, 1.0), count("starts", 10.0, 1)];
        const PCA: &[ParamDef] = &[real("variance", 0.9, 0.0, 1.0)];
        match self {
            Knn | Lof | Cof | Abod => NEIGHBOR,
            Sod => SOD,
            Sampling => SAMPLING,
            Sos => SOS,
            Inne => INNE,
            Kde => KDE,
            Gmm => GMM,
            Kmeans => KMEANS,
            Cblof => CBLOF,
            Hbos => HBOS,
            Loda => LODA,
            Iforest => IFOREST,
            Mcd => MCD,
            Pca => PCA,
            Copod | Ecod | Qmcd | Mad | Msd | Cd | LinearRegression => &[],
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which detector to run, with hyperparameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub id: DetectorId,
    /// Overrides of the documented defaults; missing keys use the default.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl DetectorSpec {
    pub fn new(id: DetectorId) -> Self {
        Self {
            id,
            params: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks that every override names a known parameter within its range.
    pub fn validate(&self) -> Result<()> {
        let defs = self.id.params();
        for (key, &value) in &self.params {
            let def = defs.iter().find(|d| d.name == key).ok_or_else(|| {
                Error::Config(format!("{} has no parameter `{key}`", self.id.key()))
            })?;
            let ok = match def.kind {
                ParamKind::Count { min } => value.fract() == 0.0 && value >= min as f64,
                ParamKind::Real { lo, hi } => value.is_finite() && value >= lo && value <= hi,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "{}.{key} = {value} is out of range ({:?})",
                    self.id.key(),
                    def.kind
                )));
            }
        }
        Ok(())
    }

    fn real(&self, key: &str) -> f64 {
        self.params.get(key).copied().unwrap_or_else(|| {
            self.id
                .params()
                .iter()
                .find(|d| d.name == key)
                .map(|d| d.default)
                .expect("parameter is declared")
        })
    }

    fn count(&self, key: &str) -> usize {
        self.real(key) as usize
    }

    /// Fewest training rows the detector accepts.
    pub fn min_rows(&self) -> usize {
        use DetectorId::*;
        match self.id {
            Knn | Lof | Cof | Abod | Sod => self.count("k") + 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Model {
    Knn(neighbors::Knn),
    Lof(neighbors::Lof),
    Cof(neighbors::Cof),
    Abod(neighbors::Abod),
    Sod(neighbors::Sod),
    Sampling(neighbors::Sampling),
    Sos(neighbors::Sos),
    Inne(neighbors::Inne),
    Kde(density::Kde),
    Gmm(density::Gmm),
    Hbos(density::Hbos),
    Loda(density::Loda),
    Copod(density::Ecdf),
    Ecod(density::Ecdf),
    Qmcd(density::Qmcd),
    CenterScale(robust::CenterScale),
    Mcd(robust::Mcd),
    Kmeans(cluster::KMeans),
    Cblof(cluster::Cblof),
    Iforest(cluster::IForest),
    Pca(linear::Pca),
    Cd(linear::Cooks),
    Forecast(linear::Forecaster),
}

impl Model {
    fn score(&self, q: &[f64]) -> f64 {
        match self {
            Model::Knn(m) => m.score(q),
            Model::Lof(m) => m.score(q),
            Model::Cof(m) => m.score(q),
            Model::Abod(m) => m.score(q),
            Model::Sod(m) => m.score(q),
            Model::Sampling(m) => m.score(q),
            Model::Sos(m) => m.score(q),
            Model::Inne(m) => m.score(q),
            Model::Kde(m) => m.score(q),
            Model::Gmm(m) => m.score(q),
            Model::Hbos(m) => m.score(q),
            Model::Loda(m) => m.score(q),
            Model::Copod(m) => m.copod_score(q),
            Model::Ecod(m) => m.ecod_score(q),
            Model::Qmcd(m) => m.score(q),
            Model::CenterScale(m) => m.score(q),
            Model::Mcd(m) => m.score(q),
            Model::Kmeans(m) => m.score(q),
            Model::Cblof(m) => m.score(q),
            Model::Iforest(m) => m.score(q),
            Model::Pca(m) => m.score(q),
            Model::Cd(m) => m.score(q),
            Model::Forecast(m) => m.score(q),
        }
    }
}

/// A trained detector. Immutable; scoring is safe from many threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDetector {
    spec: DetectorSpec,
    width: usize,
    model: Model,
}

impl FittedDetector {
    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    /// Row width (window length times dimensions) seen during fitting.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn score_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                got: row.len(),
            });
        }
        let s = self.model.score(row);
        if s.is_finite() {
            Ok(s)
        } else {
            Err(Error::Degenerate(format!(
                "{} produced a non-finite score",
                self.spec.id.name()
            )))
        }
    }
}

pub fn fit(spec: &DetectorSpec, train: &WindowMatrix) -> Result<FittedDetector> {
    spec.validate()?;
    let n = train.n_rows();
    let needed = spec.min_rows();
    if n < needed {
        return Err(Error::InsufficientRows {
            detector: spec.id.name(),
            needed,
            got: n,
        });
    }
    let width = train.width();
    let points = Points::new(train.data().to_vec(), width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    use DetectorId as D;
    let model = match spec.id {
        D::Knn => Model::Knn(neighbors::Knn {
            points,
            k: spec.count("k"),
        }),
        D::Lof => Model::Lof(neighbors::Lof::fit(points, spec.count("k"))),
        D::Cof => Model::Cof(neighbors::Cof::fit(points, spec.count("k"))),
        D::Abod => Model::Abod(neighbors::Abod {
            points,
            k: spec.count("k"),
        }),
        D::Sod => Model::Sod(neighbors::Sod::fit(points, spec.count("k"), spec.real("alpha"))),
        D::Sampling => Model::Sampling(neighbors::Sampling::fit(&points, spec.count("subset"), &mut rng)),
        D::Sos => Model::Sos(neighbors::Sos::fit(points, spec.real("perplexity"))),
        D::Inne => Model::Inne(neighbors::Inne::fit(
            &points,
            spec.count("estimators"),
            spec.count("samples"),
            &mut rng,
        )),
        D::Kde => Model::Kde(density::Kde::fit(points, spec.real("bandwidth"))),
        D::Gmm => Model::Gmm(density::Gmm::fit(
            &points,
            spec.count("components"),
            spec.real("reg"),
            spec.count("max_iter"),
            &mut rng,
        )),
        D::Hbos => Model::Hbos(density::Hbos::fit(&points, spec.count("bins"))),
        D::Loda => Model::Loda(density::Loda::fit(
            &points,
            spec.count("projections"),
            spec.count("bins"),
            &mut rng,
        )),
        D::Copod => Model::Copod(density::Ecdf::fit(&points)),
        D::Ecod => Model::Ecod(density::Ecdf::fit(&points)),
        D::Qmcd => Model::Qmcd(density::Qmcd::fit(&points)),
        D::Mad => Model::CenterScale(robust::CenterScale::mad(&points)),
        D::Msd => Model::CenterScale(robust::CenterScale::msd(&points)),
        D::Mcd => Model::Mcd(robust::Mcd::fit(
            &points,
            spec.real("support"),
            spec.count("starts"),
            &mut rng,
        )),
        D::Kmeans => Model::Kmeans(cluster::KMeans::fit(&points, spec.count("clusters"), &mut rng)),
        D::Cblof => Model::Cblof(cluster::Cblof::fit(
            &points,
            spec.count("clusters"),
            spec.real("alpha"),
            spec.real("beta"),
            &mut rng,
        )),
        D::Iforest => Model::Iforest(cluster::IForest::fit(
            &points,
            spec.count("trees"),
            spec.count("samples"),
            &mut rng,
        )),
        D::Pca => Model::Pca(linear::Pca::fit(&points, spec.real("variance"))),
        D::Cd => {
            if width < 2 {
                return Err(Error::invalid("CD needs rows of width at least 2"));
            }
            Model::Cd(linear::Cooks::fit(&points))
        }
        D::LinearRegression => {
            let dims = train.dims();
            let window = width / dims;
            if window < 2 {
                return Err(Error::invalid("LinearRegression needs windows of length at least 2"));
            }
            Model::Forecast(linear::Forecaster::fit(&points, window, dims))
        }
    };
    Ok(FittedDetector {
        spec: spec.clone(),
        width,
        model,
    })
}

/// Scores every query row.
pub fn score(det: &FittedDetector, query: &WindowMatrix) -> Result<ScoreSeries> {
    if query.width() != det.width {
        return Err(Error::DimensionMismatch {
            expected: det.width,
            got: query.width(),
        });
    }
    let scores = query.rows().map(|r| det.score_row(r)).collect::<Result<Vec<_>>>()?;
    ScoreSeries::new(scores)
}

/// Default spec for every detector in the catalog.
pub fn list_catalog() -> Vec<DetectorSpec> {
    DetectorId::ALL.into_iter().map(DetectorSpec::new).collect()
}

pub fn family(id: DetectorId) -> Family {
    id.family()
}
