//! On-disk bench results.
//!
//! `results.csv`, `results.json` and `summary.json` depend only on the inputs
//! and seed. Wall times go to `timing.csv`, which naturally differs between
//! runs.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{BenchConfig, CellTiming, RunRecord};
use crate::detectors::DetectorId;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::METRIC_NAMES;
use crate::series::WindowSelector;

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TIMING_CSV: &str = "timing.csv";
pub const CACHE_KEY: &str = "cache_key.txt";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn results_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("bundle,detector,window,window_length,seed");
    for m in METRIC_NAMES {
        out.push(',');
        out.push_str(m);
    }
    out.push_str(",error\n");
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.bundle),
            r.detector.key(),
            r.window,
            opt(r.window_length),
            r.seed
        );
        for m in METRIC_NAMES {
            let _ = write!(out, ",{}", opt(r.value(m)));
        }
        let _ = writeln!(out, ",{}", csv_field(r.error.as_deref().unwrap_or("")));
    }
    out
}

pub fn timing_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("bundle,detector,window,fit_seconds,score_seconds\n");
    for r in records {
        if let Some(t) = r.timing {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&r.bundle),
                r.detector.key(),
                r.window,
                t.fit_seconds,
                t.score_seconds
            );
        }
    }
    out
}

fn pretty_json<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_records(dir: &Path, records: &[RunRecord]) -> Result<()> {
    io::atomic_write(&dir.join(RESULTS_CSV), results_csv(records).as_bytes())?;
    io::atomic_write(&dir.join(RESULTS_JSON), pretty_json(&records)?.as_bytes())?;
    io::atomic_write(&dir.join(TIMING_CSV), timing_csv(records).as_bytes())
}

pub fn write_summary(dir: &Path, summary: &super::BenchSummary) -> Result<()> {
    io::atomic_write(&dir.join(SUMMARY_JSON), pretty_json(summary)?.as_bytes())
}

fn unquote(s: &str) -> String {
    s.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .map(|s| s.replace("\"\"", "\""))
        .unwrap_or_else(|| s.to_string())
}

/// Reads `results.json` and, if present, joins in `timing.csv`.
pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let path = dir.join(RESULTS_JSON);
    let mut records: Vec<RunRecord> = serde_json::from_str(&io::read_to_string(&path)?)?;
    let tpath = dir.join(TIMING_CSV);
    if !tpath.exists() {
        return Ok(records);
    }
    let text = io::read_to_string(&tpath)?;
    for (idx, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.is_empty()) {
        let bad = |msg: String| Error::Parse {
            path: tpath.clone(),
            line: idx + 1,
            msg,
        };
        // The bundle id is the only field that may contain commas.
        let f: Vec<&str> = line.rsplitn(5, ',').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("not a number: `{s}`")));
        let (score, fit) = (num(f[0])?, num(f[1])?);
        let window = WindowSelector::parse(f[2]).map_err(|e| bad(e.to_string()))?;
        let det = DetectorId::parse(f[3]).map_err(|e| bad(e.to_string()))?;
        let bundle = unquote(f[4]);
        if let Some(r) = records
            .iter_mut()
            .find(|r| r.bundle == bundle && r.detector == det && r.window == window)
        {
            r.timing = Some(CellTiming {
                fit_seconds: fit,
                score_seconds: score,
            });
        }
    }
    Ok(records)
}

/// Content hash of the configuration and the bundle files.
pub fn cache_key(cfg: &BenchConfig, bundle_files: &[(String, Vec<u8>)]) -> Result<String> {
    let mut h = Sha256::new();
    let c = serde_json::to_vec(cfg)?;
    h.update((c.len() as u64).to_le_bytes());
    h.update(&c);
    for (name, bytes) in bundle_files {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    Ok(h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Persisted records, if `dir` holds results computed under `key`.
pub fn load_cached(dir: &Path, key: &str) -> Option<Vec<RunRecord>> {
    let stored = std::fs::read_to_string(dir.join(CACHE_KEY)).ok()?;
    if stored.trim() != key {
        return None;
    }
    read_records(dir).ok()
}

pub fn store_cache_key(dir: &Path, key: &str) -> Result<()> {
    io::atomic_write(&dir.join(CACHE_KEY), format!("{key}\n").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorSpec;
    use crate::metrics::MetricRecord;

    fn records() -> Vec<RunRecord> {
        vec![
            RunRecord {
                bundle: "odd,name".into(),
                detector: DetectorId::Knn,
                window: WindowSelector::Fixed(16),
                window_length: Some(16),
                seed: 42,
                metrics: Some(MetricRecord {
                    precision: 0.5,
                    recall: 1.0,
                    f1: 2.0 / 3.0,
                    range_f1: 0.25,
                    auc_roc: Some(0.9),
                    auc_pr: None,
                    vus_roc: Some(0.8),
                    vus_pr: Some(0.1),
                }),
                error: None,
                timing: Some(CellTiming {
                    fit_seconds: 0.125,
                    score_seconds: 0.5,
                }),
            },
            RunRecord {
                bundle: "b".into(),
                detector: DetectorId::LinearRegression,
                window: WindowSelector::Acf,
                window_length: None,
                seed: 7,
                metrics: None,
                error: Some("series too short: \"x\"".into()),
                timing: None,
            },
        ]
    }

    #[test]
    fn csv_layout() {
        let csv = results_csv(&records());
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "bundle,detector,window,window_length,seed,precision,recall,f1,range_f1,auc_roc,auc_pr,vus_roc,vus_pr,error"
        );
        assert_eq!(
            lines.next().unwrap(),
            "\"odd,name\",knn,16,16,42,0.5,1,0.6666666666666666,0.25,0.9,,0.8,0.1,"
        );
        assert_eq!(
            lines.next().unwrap(),
            "b,linear_regression,acf,,7,,,,,,,,,\"series too short: \"\"x\"\"\""
        );
    }

    #[test]
    fn records_roundtrip_with_timing() {
        let dir = tempfile::tempdir().unwrap();
        write_records(dir.path(), &records()).unwrap();
        assert_eq!(read_records(dir.path()).unwrap(), records());
        let json = std::fs::read_to_string(dir.path().join(RESULTS_JSON)).unwrap();
        assert!(!json.contains("seconds"));
    }

    #[test]
    fn cache_key_tracks_content() {
        let cfg = BenchConfig::new(vec![DetectorSpec::new(DetectorId::Knn)], vec![WindowSelector::Fixed(8)]);
        let files = vec![("a/test.csv".to_string(), b"dim0\n1\n".to_vec())];
        let k = cache_key(&cfg, &files).unwrap();
        assert_eq!(k.len(), 64);
        assert_eq!(k, cache_key(&cfg, &files).unwrap());
        let other = vec![("a/test.csv".to_string(), b"dim0\n2\n".to_vec())];
        assert_ne!(k, cache_key(&cfg, &other).unwrap());
        let mut cfg2 = cfg.clone();
        cfg2.seed = 1;
        assert_ne!(k, cache_key(&cfg2, &files).unwrap());

        let dir = tempfile::tempdir().unwrap();
        assert!(load_cached(dir.path(), &k).is_none());
        write_records(dir.path(), &records()).unwrap();
        store_cache_key(dir.path(), &k).unwrap();
        assert_eq!(load_cached(dir.path(), &k).unwrap(), records());
        assert!(load_cached(dir.path(), "other").is_none());
    }
}
