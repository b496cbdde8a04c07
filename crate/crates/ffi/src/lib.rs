//! C interface to `hengrc`.
//!
//! Objects are opaque handles created by `hengrc_*_new`/`load`/`train`
//! functions and released with the matching `_free`. Every fallible call
//! returns a status code; on failure `hengrc_last_error` gives the message
//! for the calling thread. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use serde::Deserialize;

use hengrc::bench::{derive_seed, ModelSpec, SystemSpec};
use hengrc::dynsys::{KsParams, LorenzParams};
use hengrc::features::{plan_features, FeatureConfig};
use hengrc::io::{load_series, save_series, SeriesFormat};
use hengrc::metrics::{first_crossing, normalized_error_padded};
use hengrc::readout::{esn_train, load_model, predict_closed_loop, save_model, train, ReadoutModel, TargetMode, TrainConfig};
use hengrc::{Error, TimeSeries};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HengrcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    DimensionMismatch = 3,
    SeriesTooShort = 4,
    SingularSystem = 5,
    BlowUp = 6,
    Format = 7,
    Io = 8,
    InvalidString = 9,
    Panic = 10,
}

/// A `Q x T` trajectory.
pub struct HengrcSeries(TimeSeries);

/// A trained readout.
pub struct HengrcModel(ReadoutModel);

/// Target convention of a readout.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HengrcTarget {
    NextState = 0,
    Delta = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HengrcStatus {
    match e {
        Error::InvalidConfig(_) | Error::IncompatibleSpecs(_) | Error::NonConvergence { .. } => {
            HengrcStatus::InvalidConfig
        }
        Error::InsufficientHistory { .. } | Error::SeriesTooShort { .. } => HengrcStatus::SeriesTooShort,
        Error::DimensionMismatch(_) => HengrcStatus::DimensionMismatch,
        Error::BlowUp { .. } => HengrcStatus::BlowUp,
        Error::SingularSystem(_) => HengrcStatus::SingularSystem,
        Error::Format(_) => HengrcStatus::Format,
        Error::Io(_) => HengrcStatus::Io,
    }
}

struct Fail(HengrcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HengrcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HengrcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HengrcStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(HengrcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HengrcStatus::InvalidString, format!("{what} is not UTF-8")))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hengrc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hengrc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `q * len` values, state by state (`data[t * q + i]`), into a new series.
///
/// # Safety
/// `data` must point to `q * len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_series_new(
    q: usize,
    len: usize,
    dt: f64,
    data: *const f64,
    out: *mut *mut HengrcSeries,
) -> HengrcStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let n = q
            .checked_mul(len)
            .ok_or_else(|| Fail(HengrcStatus::InvalidConfig, "series size overflows".into()))?;
        let values = std::slice::from_raw_parts(data, n).to_vec();
        put(out, HengrcSeries(TimeSeries::new(q, dt, 0.0, values)?))
    })
}

/// Lorenz trajectory of `steps + 1` states; identical to trial 0 of an
/// experiment with root `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_generate_lorenz(
    steps: usize,
    dt: f64,
    seed: u64,
    out: *mut *mut HengrcSeries,
) -> HengrcStatus {
    guard(|| {
        let system = SystemSpec::Lorenz {
            params: LorenzParams { dt, ..LorenzParams::default() },
            jitter: 10.0,
            transient_steps: 1000,
        };
        system.validate()?;
        put(out, HengrcSeries(system.generate(steps, derive_seed(seed, "data", 0))?))
    })
}

/// Kuramoto-Sivashinsky trajectory on `q` points of a domain of length `l`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_generate_ks(
    l: f64,
    q: usize,
    dt: f64,
    steps: usize,
    seed: u64,
    out: *mut *mut HengrcSeries,
) -> HengrcStatus {
    guard(|| {
        let system = SystemSpec::Ks {
            params: KsParams {
                dt,
                ..KsParams::new(l, q)
            },
        };
        system.validate()?;
        put(out, HengrcSeries(system.generate(steps, derive_seed(seed, "data", 0))?))
    })
}

/// Reads a `.ccts` or `.csv` trajectory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_series_load(path: *const c_char, out: *mut *mut HengrcSeries) -> HengrcStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        put(out, HengrcSeries(load_series(Path::new(p))?))
    })
}

/// Writes a trajectory; the format follows the extension (`.csv`, else CCTS).
///
/// # Safety
/// `series` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hengrc_series_save(series: *const HengrcSeries, path: *const c_char) -> HengrcStatus {
    guard(|| {
        let s = obj(series, "series")?;
        let p = Path::new(str_arg(path, "path")?);
        save_series(&s.0, p, SeriesFormat::from_path(p))?;
        Ok(())
    })
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hengrc_series_dim(series: *const HengrcSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.dim())
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hengrc_series_len(series: *const HengrcSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// Time step, or 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hengrc_series_dt(series: *const HengrcSeries) -> f64 {
    series.as_ref().map_or(0.0, |s| s.0.dt())
}

/// Copies the values, state by state, into `buf`, which must hold at least
/// `dim * len` doubles.
///
/// # Safety
/// `buf` must point to `buf_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hengrc_series_copy(series: *const HengrcSeries, buf: *mut f64, buf_len: usize) -> HengrcStatus {
    guard(|| {
        let s = obj(series, "series")?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        let src = s.0.as_slice();
        if buf_len < src.len() {
            return Err(Fail(
                HengrcStatus::DimensionMismatch,
                format!("buffer holds {buf_len} values, series has {}", src.len()),
            ));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hengrc_series_free(series: *mut HengrcSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    model: ModelSpec,
    #[serde(default)]
    readout: TrainConfig,
}

/// Trains a model described by a TOML document with a `[model]` table (as in
/// the CLI's `[train.model]`) and an optional `[readout]` table. Feature
/// maps take their input dimension from the series.
///
/// # Safety
/// `series` must be a live handle, `config_toml` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_train(
    series: *const HengrcSeries,
    config_toml: *const c_char,
    out: *mut *mut HengrcModel,
) -> HengrcStatus {
    guard(|| {
        let s = &obj(series, "series")?.0;
        let req: TrainRequest = toml::from_str(str_arg(config_toml, "config")?)
            .map_err(|e| Fail(HengrcStatus::InvalidConfig, e.to_string()))?;
        let model = match req.model {
            ModelSpec::Features { mut features } => {
                features.q = s.dim();
                train(s, &plan_features(&features)?, &req.readout)?.0
            }
            ModelSpec::Esn { mut esn, washout } => {
                esn.seed = derive_seed(esn.seed, "reservoir", 0);
                esn_train(s, &esn, &req.readout, washout)?.0
            }
        };
        put(out, HengrcModel(model))
    })
}

/// HENG-RC with `k` delay blocks starting at delay `offset`.
///
/// # Safety
/// `series` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_train_heng(
    series: *const HengrcSeries,
    k: usize,
    offset: usize,
    lambda: f64,
    target: HengrcTarget,
    normalize: bool,
    out: *mut *mut HengrcModel,
) -> HengrcStatus {
    guard(|| {
        let s = &obj(series, "series")?.0;
        let map = plan_features(&FeatureConfig::heng_rc(s.dim(), k).with_offset(offset))?;
        let mode = match target {
            HengrcTarget::NextState => TargetMode::NextState,
            HengrcTarget::Delta => TargetMode::Delta,
        };
        let (model, _) = train(s, &map, &TrainConfig::new(lambda, mode).normalized(normalize))?;
        put(out, HengrcModel(model))
    })
}

/// Closed-loop forecast of `steps` states after the end of `warmup`. A
/// forecast stopped by the blow-up guard is returned shorter than `steps`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_model_predict(
    model: *const HengrcModel,
    warmup: *const HengrcSeries,
    steps: usize,
    out: *mut *mut HengrcSeries,
) -> HengrcStatus {
    guard(|| {
        let m = obj(model, "model")?;
        let w = obj(warmup, "warmup")?;
        let forecast = predict_closed_loop(&m.0, &w.0, steps)?;
        put(out, HengrcSeries(forecast.series))
    })
}

/// Feature count or reservoir size, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hengrc_model_states(model: *const HengrcModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.states())
}

/// # Safety
/// `model` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hengrc_model_save(model: *const HengrcModel, path: *const c_char) -> HengrcStatus {
    guard(|| {
        let m = obj(model, "model")?;
        save_model(&m.0, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_model_load(path: *const c_char, out: *mut *mut HengrcModel) -> HengrcStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        put(out, HengrcModel(load_model(Path::new(p))?))
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hengrc_model_free(model: *mut HengrcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Steps before the normalized error first reaches `theta`, scored over the
/// length of `truth`. Steps missing from a short prediction count as diverged.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hengrc_valid_steps(
    truth: *const HengrcSeries,
    prediction: *const HengrcSeries,
    theta: f64,
    out: *mut usize,
) -> HengrcStatus {
    guard(|| {
        let t = obj(truth, "truth")?;
        let p = obj(prediction, "prediction")?;
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Fail(HengrcStatus::InvalidConfig, format!("threshold must be positive, got {theta}")));
        }
        if out.is_null() {
            return Err(null("output pointer"));
        }
        if t.0.is_empty() {
            return Err(Fail(HengrcStatus::SeriesTooShort, "truth is empty".into()));
        }
        let pred = if p.0.len() > t.0.len() { p.0.slice(0, t.0.len())? } else { p.0.clone() };
        let curve = normalized_error_padded(&t.0, &pred)?;
        *out = first_crossing(&curve, theta);
        Ok(())
    })
}
