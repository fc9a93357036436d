//! CSV reading and writing, and atomic file replacement.
//!
//! Series CSVs have a header row (`dim0,dim1,...`) and one point per line.
//! Floats are written in Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{LabelSeries, TimeSeries};

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming onto {}", path.display()), e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub fn series_to_csv(series: &TimeSeries) -> String {
    let d = series.dims();
    let mut out = (0..d).map(|k| format!("dim{k}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for i in 0..series.len() {
        for (k, v) in series.point(i).iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    atomic_write(path, series_to_csv(series).as_bytes())
}

fn parse_field(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("not a number: `{}`", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("non-finite value `{}`", field.trim()),
        });
    }
    Ok(v)
}

/// Parses CSV text with a header row into rows of numbers, all of the
/// header's width. Line numbers in errors are 1-based and count the header.
pub fn parse_numeric_csv(path: &Path, text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        rows.push(
            fields
                .iter()
                .map(|f| parse_field(path, idx + 1, f))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 2,
            msg: "no data rows".into(),
        });
    }
    Ok((names, rows))
}

pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let text = read_to_string(path)?;
    let (_, rows) = parse_numeric_csv(path, &text)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TimeSeries::from_rows(name, &rows)
}

/// One named column of numbers.
pub fn column_to_csv(header: &str, values: &[f64]) -> String {
    let mut out = format!("{header}\n");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_column_csv(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    atomic_write(path, column_to_csv(header, values).as_bytes())
}

/// Reads a single-column CSV with a header.
pub fn read_column_csv(path: &Path) -> Result<Vec<f64>> {
    let text = read_to_string(path)?;
    let (names, rows) = parse_numeric_csv(path, &text)?;
    if names.len() != 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected one column, found {}", names.len()),
        });
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

pub fn labels_to_csv(labels: &LabelSeries) -> String {
    let mut out = String::from("label\n");
    for v in labels.as_slice() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_labels_csv(path: &Path, labels: &LabelSeries) -> Result<()> {
    atomic_write(path, labels_to_csv(labels).as_bytes())
}

pub fn read_labels_csv(path: &Path) -> Result<LabelSeries> {
    let values = read_column_csv(path)?;
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: format!("label must be 0 or 1, got {v}"),
            });
        }
        out.push(v as u8);
    }
    LabelSeries::new(out)
}
