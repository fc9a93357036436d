//! C ABI over `tsasd-core`.
//!
//! Every function returns a [`TsasdStatus`]; on failure a message is kept
//! per thread and can be read with [`tsasd_last_error`]. Pipelines are opaque
//! handles released with [`tsasd_pipeline_free`]. Strings returned by the
//! library are released with [`tsasd_string_free`]. Panics never cross the
//! boundary; they surface as `TSASD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tsasd_core::config::Config;
use tsasd_core::decision;
use tsasd_core::metrics;
use tsasd_core::pipeline::{self, TrainedPipeline};
use tsasd_core::series::{AlignedScores, LabelSeries, TimeSeries};
use tsasd_core::shapedist;
use tsasd_core::Error;

/// Result of a library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsasdStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Bad sizes, lengths or values.
    InvalidArgument = 2,
    /// The data cannot support the request (too short, degenerate, ...).
    Data = 3,
    /// The configuration text was rejected.
    Config = 4,
    /// Malformed JSON or text.
    Parse = 5,
    /// A panic was caught inside the library.
    Panic = 6,
}

/// A trained pipeline.
pub struct TsasdPipeline {
    inner: TrainedPipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TsasdStatus {
    match e {
        Error::Invalid(_) | Error::DimensionMismatch { .. } => TsasdStatus::InvalidArgument,
        Error::TooShort { .. } | Error::InsufficientRows { .. } | Error::Degenerate(_) | Error::Dataset(_) => {
            TsasdStatus::Data
        }
        Error::Config(_) => TsasdStatus::Config,
        Error::Parse { .. } | Error::Json(_) | Error::Io { .. } => TsasdStatus::Parse,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (TsasdStatus, String)>) -> TsasdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsasdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            TsasdStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (TsasdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TsasdStatus, String) {
    (TsasdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (TsasdStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller promises `p` points at `n` readable values.
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TsasdStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller promises a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (TsasdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn series(values: *const f64, n_points: usize, dims: usize, what: &str) -> Result<TimeSeries, (TsasdStatus, String)> {
    let len = n_points
        .checked_mul(dims)
        .ok_or((TsasdStatus::InvalidArgument, "n_points * dims overflows".to_string()))?;
    let v = unsafe { slice(values, len, what) }?;
    TimeSeries::new(what, dims, v.to_vec()).map_err(core_err)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tsasd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tsasd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The default decision threshold, about 0.9772498681.
#[no_mangle]
pub extern "C" fn tsasd_default_threshold() -> f64 {
    decision::default_threshold()
}

/// Trains a pipeline on a row-major `n_points × dims` standard series.
///
/// `config_toml` may be NULL for defaults; otherwise it uses the same keys as
/// the command-line configuration file, and the first listed detector and
/// window are used. On success `*out` receives a handle owned by the caller.
///
/// # Safety
/// `standard` must point at `n_points * dims` doubles, `config_toml` must be
/// NULL or NUL-terminated, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsasd_pipeline_train(
    standard: *const f64,
    n_points: usize,
    dims: usize,
    config_toml: *const c_char,
    out: *mut *mut TsasdPipeline,
) -> TsasdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = unsafe { series(standard, n_points, dims, "standard") }?;
        let cfg = if config_toml.is_null() {
            Config::default()
        } else {
            Config::from_toml(unsafe { text(config_toml, "config_toml") }?).map_err(core_err)?
        };
        let spec = cfg.detector_specs().map_err(core_err)?.remove(0);
        let window = cfg.window_selectors().map_err(core_err)?[0];
        let trained = pipeline::train(&s, &cfg.pipeline_config(spec, window)).map_err(core_err)?;
        unsafe { *out = Box::into_raw(Box::new(TsasdPipeline { inner: trained })) };
        Ok(())
    })
}

/// Scores a row-major `n_points × dims` test series.
///
/// Each of `scores`, `health` and `labels` may be NULL; otherwise it must
/// hold `n_points` values. `n_anomalous` (nullable) receives the number of
/// points labelled 1.
///
/// # Safety
/// `pipeline` must come from this library and not be freed; buffers must be
/// valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn tsasd_pipeline_test(
    pipeline: *const TsasdPipeline,
    test: *const f64,
    n_points: usize,
    dims: usize,
    scores: *mut f64,
    health: *mut f64,
    labels: *mut u8,
    n_anomalous: *mut usize,
) -> TsasdStatus {
    guard(|| {
        let p = unsafe { pipeline.as_ref() }.ok_or_else(|| null("pipeline"))?;
        let s = unsafe { series(test, n_points, dims, "test") }?;
        let res = pipeline::test(&p.inner, &s).map_err(core_err)?;
        unsafe {
            if !scores.is_null() {
                ptr::copy_nonoverlapping(res.scores.as_slice().as_ptr(), scores, n_points);
            }
            if !health.is_null() {
                ptr::copy_nonoverlapping(res.health.as_slice().as_ptr(), health, n_points);
            }
            if !labels.is_null() {
                ptr::copy_nonoverlapping(res.labels.as_slice().as_ptr(), labels, n_points);
            }
            if !n_anomalous.is_null() {
                *n_anomalous = res.labels.as_slice().iter().filter(|&&l| l == 1).count();
            }
        }
        Ok(())
    })
}

/// Releases a pipeline. NULL is ignored.
///
/// # Safety
/// `pipeline` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tsasd_pipeline_free(pipeline: *mut TsasdPipeline) {
    if !pipeline.is_null() {
        drop(unsafe { Box::from_raw(pipeline) });
    }
}

/// Serializes a pipeline to JSON; free the result with [`tsasd_string_free`].
///
/// # Safety
/// `pipeline` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsasd_pipeline_to_json(pipeline: *const TsasdPipeline, out: *mut *mut c_char) -> TsasdStatus {
    guard(|| {
        let p = unsafe { pipeline.as_ref() }.ok_or_else(|| null("pipeline"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = p.inner.to_json().map_err(core_err)?;
        let c = CString::new(json).map_err(|e| (TsasdStatus::Parse, e.to_string()))?;
        unsafe { *out = c.into_raw() };
        Ok(())
    })
}

/// Restores a pipeline from [`tsasd_pipeline_to_json`] output.
///
/// # Safety
/// `json` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsasd_pipeline_from_json(json: *const c_char, out: *mut *mut TsasdPipeline) -> TsasdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = TrainedPipeline::from_json(unsafe { text(json, "json") }?).map_err(core_err)?;
        unsafe { *out = Box::into_raw(Box::new(TsasdPipeline { inner })) };
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tsasd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Area under the ROC curve of `scores` against 0/1 `labels`. `*out` is NaN
/// when the labels hold only one class.
///
/// # Safety
/// `scores` and `labels` must hold `n` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsasd_auc_roc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> TsasdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = AlignedScores::new(unsafe { slice(scores, n, "scores") }?.to_vec()).map_err(core_err)?;
        let l = LabelSeries::new(unsafe { slice(labels, n, "labels") }?.to_vec()).map_err(core_err)?;
        let auc = metrics::auc_roc(&s, &l).map_err(core_err)?;
        unsafe { *out = auc.unwrap_or(f64::NAN) };
        Ok(())
    })
}

/// Shape-based distance between two length-`m` sequences, in [0, 2].
///
/// # Safety
/// `x` and `y` must hold `m` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsasd_sbd(x: *const f64, y: *const f64, m: usize, out: *mut f64) -> TsasdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = unsafe { slice(x, m, "x") }?;
        let b = unsafe { slice(y, m, "y") }?;
        let d = shapedist::sbd_slices(a, b).map_err(core_err)?;
        unsafe { *out = d };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, TsasdStatus::Panic);
        let msg = unsafe { CStr::from_ptr(tsasd_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
    }

    #[test]
    fn error_statuses() {
        assert_eq!(status_of(&Error::Config("x".into())), TsasdStatus::Config);
        assert_eq!(status_of(&Error::TooShort { needed: 2, got: 1 }), TsasdStatus::Data);
    }
}
