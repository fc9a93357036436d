//! Shared domain types: series, windows, scores, labels and anomaly ranges.
//!
//! Indices are 0-based and ranges are inclusive on both ends. All stored reals
//! are finite; constructors reject NaN and infinities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(format!("{what}: non-finite value at index {i}"))),
        None => Ok(()),
    }
}

/// An ordered, possibly multivariate sequence of observations (`n` points of `d` dims).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    dims: usize,
    /// Row-major: point `i` occupies `values[i*dims..(i+1)*dims]`.
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, dims: usize, values: Vec<f64>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::invalid("time series needs at least one dimension"));
        }
        if values.is_empty() {
            return Err(Error::invalid("time series needs at least one point"));
        }
        if values.len() % dims != 0 {
            return Err(Error::invalid(format!(
                "{} values cannot be split into points of {dims} dims",
                values.len()
            )));
        }
        check_finite(&values, "time series")?;
        Ok(Self {
            name: name.into(),
            dims,
            values,
        })
    }

    pub fn univariate(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(name, 1, values)
    }

    /// Builds a series from per-point rows; every row must have the same length.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::invalid("rows have differing dimensions"));
        }
        Self::new(name, dims, rows.concat())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn column(&self, dim: usize) -> Vec<f64> {
        self.values.iter().skip(dim).step_by(self.dims).copied().collect()
    }

    /// Contiguous sub-series `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!(
                "slice [{start}, {end}) out of range for length {}",
                self.len()
            )));
        }
        Ok(Self {
            name: self.name.clone(),
            dims: self.dims,
            values: self.values[start * self.dims..end * self.dims].to_vec(),
        })
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.name.clone(), self.dims, values)
    }
}

/// How the window length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSelector {
    Fixed(usize),
    Acf,
    Fft,
}

impl WindowSelector {
    /// Parses `32`, `acf` or `fft`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "acf" => Ok(Self::Acf),
            "fft" => Ok(Self::Fft),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .map(Self::Fixed)
                .ok_or_else(|| Error::invalid(format!("bad window selector '{s}'"))),
        }
    }
}

impl std::fmt::Display for WindowSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed(w) => write!(f, "{w}"),
            Self::Acf => f.write_str("acf"),
            Self::Fft => f.write_str("fft"),
        }
    }
}

/// A resolved sliding-window configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub length: usize,
    pub stride: usize,
    /// The selector the length came from.
    pub selector: WindowSelector,
}

impl WindowConfig {
    pub fn fixed(length: usize) -> Self {
        Self {
            length,
            stride: 1,
            selector: WindowSelector::Fixed(length),
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.stride == 0 {
            return Err(Error::invalid("window length and stride must be positive"));
        }
        Ok(())
    }

    /// Number of windows over a series of length `n`: `floor((n - w)/s) + 1`.
    pub fn count(&self, n: usize) -> usize {
        if n < self.length {
            0
        } else {
            (n - self.length) / self.stride + 1
        }
    }
}

/// Sliding-window feature rows. Each row flattens `length` points of `dims`
/// dimensions dimension-major: all time steps of dim 0, then dim 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMatrix {
    data: Vec<f64>,
    n_rows: usize,
    width: usize,
    config: WindowConfig,
    source_len: usize,
    dims: usize,
}

impl WindowMatrix {
    pub(crate) fn from_parts(
        data: Vec<f64>,
        config: WindowConfig,
        source_len: usize,
        dims: usize,
    ) -> Self {
        let width = config.length * dims;
        let n_rows = if width == 0 { 0 } else { data.len() / width };
        debug_assert_eq!(n_rows * width, data.len());
        Self {
            data,
            n_rows,
            width,
            config,
            source_len,
            dims,
        }
    }

    /// Raw feature rows not derived from a series; mostly for tests and the FFI.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("window rows must be nonempty and equal length"));
        }
        let data = rows.concat();
        check_finite(&data, "window rows")?;
        Ok(Self::from_parts(
            data,
            WindowConfig::fixed(width),
            rows.len() + width - 1,
            1,
        ))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.width.max(1))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn config(&self) -> WindowConfig {
        self.config
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
}

/// Per-window anomaly scores (higher = more anomalous).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries(Vec<f64>);

impl ScoreSeries {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        check_finite(&scores, "window scores")?;
        Ok(Self(scores))
    }

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

/// Per-point scores aligned with the original series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedScores(Vec<f64>);

impl AlignedScores {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        check_finite(&scores, "aligned scores")?;
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Binary per-point labels, 1 = anomaly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSeries(Vec<u8>);

impl LabelSeries {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::invalid(format!("label at index {i} is not 0/1")));
        }
        Ok(Self(labels))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn from_bools(flags: impl IntoIterator<Item = bool>) -> Self {
        Self(flags.into_iter().map(u8::from).collect())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&l| l == 1).count()
    }
}

/// An inclusive index range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnomalyRange {
    pub start: usize,
    pub end: usize,
}

impl AnomalyRange {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::invalid(format!("range start {start} > end {end}")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    /// Number of indices shared with `other`.
    pub fn overlap(&self, other: &AnomalyRange) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }
}

/// Expands ranges into a label vector of length `n`.
pub fn ranges_to_labels(ranges: &[AnomalyRange], n: usize) -> Result<LabelSeries> {
    let mut labels = vec![0u8; n];
    for r in ranges {
        if r.start > r.end || r.end >= n {
            return Err(Error::invalid(format!(
                "range [{}, {}] out of bounds for length {n}",
                r.start, r.end
            )));
        }
        labels[r.start..=r.end].fill(1);
    }
    Ok(LabelSeries(labels))
}

/// Maximal runs of ones, in order.
pub fn labels_to_ranges(labels: &LabelSeries) -> Vec<AnomalyRange> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.as_slice().iter().enumerate() {
        match (l == 1, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(AnomalyRange { start: s, end: i - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(AnomalyRange {
            start: s,
            end: labels.len() - 1,
        });
    }
    out
}
