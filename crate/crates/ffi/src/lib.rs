//! C ABI over the `bdspde` simulator.
//!
//! Handles are opaque pointers created by `bds_experiment_parse`,
//! `bds_experiment_load` or `bds_run_ensemble` and released with the matching
//! `*_free`. Every fallible call returns a [`BdsStatus`]; on failure a message
//! is available from [`bds_last_error`] on the calling thread until the next
//! failing call.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bdspde::analysis::{classify, Series, Verdict};
use bdspde::config::{parse_config, ExperimentConfig};
use bdspde::error::Error;
use bdspde::harness::{self, EnsembleOutcome, ValidationOptions};
use bdspde::spectral::Spectral;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    BlowUp = 5,
    Runtime = 6,
    ValidationFailed = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdsVerdict {
    ExtinctV = 0,
    PermanentUV = 1,
    Indeterminate = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdsSeries {
    IntU = 0,
    IntV = 1,
    IntU2 = 2,
    IntV2 = 3,
    IntInvU = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdsThresholds {
    pub extinction_margin: f64,
    pub h0: f64,
    pub r0: f64,
    pub delta: f64,
    pub delta_hat: f64,
    pub verdict: BdsVerdict,
}

/// Parsed experiment configuration.
pub struct BdsExperiment(ExperimentConfig);

/// Reduced ensemble statistics with the configuration that produced them.
pub struct BdsEnsemble {
    cfg: ExperimentConfig,
    outcome: EnsembleOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> BdsStatus {
    match e {
        Error::Config { .. } => BdsStatus::Config,
        Error::Io { .. } => BdsStatus::Io,
        Error::BlowUp { .. } | Error::Positivity { .. } => BdsStatus::BlowUp,
        Error::InvalidGrid { .. } | Error::Dimension { .. } | Error::Domain(_) => BdsStatus::InvalidArgument,
        _ => BdsStatus::Runtime,
    }
}

fn fail(status: BdsStatus, msg: impl Into<String>) -> BdsStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> BdsStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

fn guard(f: impl FnOnce() -> BdsStatus) -> BdsStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(BdsStatus::Panic, "internal panic"))
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, BdsStatus> {
    if p.is_null() {
        return Err(fail(BdsStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(BdsStatus::InvalidArgument, "string is not valid UTF-8"))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! deref {
    ($p:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(BdsStatus::NullPointer, concat!("null ", stringify!($p))),
        }
    };
}

/// Last error message on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn bds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn bds_experiment_parse(text: *const c_char, out: *mut *mut BdsExperiment) -> BdsStatus {
    guard(|| {
        if out.is_null() {
            return fail(BdsStatus::NullPointer, "null out");
        }
        let text = try_status!(c_str(text));
        match parse_config(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(BdsExperiment(cfg)));
                BdsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn bds_experiment_load(path: *const c_char, out: *mut *mut BdsExperiment) -> BdsStatus {
    guard(|| {
        if out.is_null() {
            return fail(BdsStatus::NullPointer, "null out");
        }
        let path = try_status!(c_str(path));
        match ExperimentConfig::load(Path::new(path)) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(BdsExperiment(cfg)));
                BdsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn bds_experiment_free(exp: *mut BdsExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

#[no_mangle]
pub unsafe extern "C" fn bds_experiment_set_seed(exp: *mut BdsExperiment, seed: u64) -> BdsStatus {
    let exp = match exp.as_mut() {
        Some(e) => e,
        None => return fail(BdsStatus::NullPointer, "null exp"),
    };
    exp.0.seed = seed;
    BdsStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn bds_experiment_set_ensemble_size(exp: *mut BdsExperiment, size: usize) -> BdsStatus {
    let exp = match exp.as_mut() {
        Some(e) => e,
        None => return fail(BdsStatus::NullPointer, "null exp"),
    };
    if size == 0 {
        return fail(BdsStatus::InvalidArgument, "ensemble size must be at least 1");
    }
    exp.0.ensemble_size = size;
    BdsStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn bds_thresholds(exp: *const BdsExperiment, out: *mut BdsThresholds) -> BdsStatus {
    guard(|| {
        let exp = deref!(exp);
        if out.is_null() {
            return fail(BdsStatus::NullPointer, "null out");
        }
        let coeffs = try_status!(exp.0.coefficient_set().map_err(from_error));
        let spec = try_status!(exp.0.noise_spec().map_err(from_error));
        let r = classify(&coeffs, &spec);
        *out = BdsThresholds {
            extinction_margin: r.extinction_margin,
            h0: r.h0,
            r0: r.r0,
            delta: r.delta,
            delta_hat: r.delta_hat,
            verdict: match r.verdict {
                Verdict::ExtinctV => BdsVerdict::ExtinctV,
                Verdict::PermanentUV => BdsVerdict::PermanentUV,
                Verdict::Indeterminate => BdsVerdict::Indeterminate,
            },
        };
        BdsStatus::Ok
    })
}

/// Runs the ensemble on `threads` workers (0 uses the default pool).
#[no_mangle]
pub unsafe extern "C" fn bds_run_ensemble(
    exp: *const BdsExperiment,
    threads: usize,
    out: *mut *mut BdsEnsemble,
) -> BdsStatus {
    guard(|| {
        let exp = deref!(exp);
        if out.is_null() {
            return fail(BdsStatus::NullPointer, "null out");
        }
        let threads = (threads > 0).then_some(threads);
        let res = harness::with_threads(threads, || harness::run_ensemble(&exp.0)).and_then(|r| r);
        match res {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(BdsEnsemble {
                    cfg: exp.0.clone(),
                    outcome,
                }));
                BdsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn bds_ensemble_free(ens: *mut BdsEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Number of recorded times; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn bds_ensemble_len(ens: *const BdsEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.outcome.stats.times.len())
}

#[no_mangle]
pub unsafe extern "C" fn bds_ensemble_trajectories(ens: *const BdsEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.outcome.stats.n_traj)
}

#[no_mangle]
pub unsafe extern "C" fn bds_ensemble_max_relative_clip(ens: *const BdsEnsemble) -> f64 {
    ens.as_ref().map_or(f64::NAN, |e| e.outcome.max_relative_clip)
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> BdsStatus {
    if dst.is_null() {
        return fail(BdsStatus::NullPointer, "null buffer");
    }
    if len != src.len() {
        return fail(
            BdsStatus::InvalidArgument,
            format!("buffer length {len}, expected {}", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
    BdsStatus::Ok
}

/// Copies the recorded times into `times[0..len]`; `len` must equal
/// [`bds_ensemble_len`].
#[no_mangle]
pub unsafe extern "C" fn bds_ensemble_times(ens: *const BdsEnsemble, times: *mut f64, len: usize) -> BdsStatus {
    let ens = deref!(ens);
    copy_out(&ens.outcome.stats.times, times, len)
}

/// Copies mean and standard error of one series; either buffer may be null
/// to skip it.
#[no_mangle]
pub unsafe extern "C" fn bds_ensemble_series(
    ens: *const BdsEnsemble,
    series: BdsSeries,
    mean: *mut f64,
    std_err: *mut f64,
    len: usize,
) -> BdsStatus {
    let ens = deref!(ens);
    let s = match series {
        BdsSeries::IntU => Series::IntU,
        BdsSeries::IntV => Series::IntV,
        BdsSeries::IntU2 => Series::IntU2,
        BdsSeries::IntV2 => Series::IntV2,
        BdsSeries::IntInvU => Series::IntInvU,
    };
    let stats = &ens.outcome.stats;
    if !mean.is_null() {
        let status = copy_out(stats.mean_of(s), mean, len);
        if status != BdsStatus::Ok {
            return status;
        }
    }
    if !std_err.is_null() {
        return copy_out(stats.std_err_of(s), std_err, len);
    }
    BdsStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn bds_ensemble_write_csv(ens: *const BdsEnsemble, path: *const c_char) -> BdsStatus {
    guard(|| {
        let ens = deref!(ens);
        let path = try_status!(c_str(path));
        let text = harness::ensemble_csv(&ens.cfg, &ens.outcome);
        match std::fs::write(path, text) {
            Ok(()) => BdsStatus::Ok,
            Err(e) => fail(BdsStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// Applies the Neumann heat semigroup `e^{t d Δ}` to `len` grid values.
/// `input` and `output` may alias.
#[no_mangle]
pub unsafe extern "C" fn bds_apply_semigroup(
    input: *const f64,
    output: *mut f64,
    len: usize,
    diffusivity: f64,
    time: f64,
) -> BdsStatus {
    guard(|| {
        if input.is_null() || output.is_null() {
            return fail(BdsStatus::NullPointer, "null buffer");
        }
        let sp = try_status!(Spectral::new(len).map_err(from_error));
        let f = std::slice::from_raw_parts(input, len).to_vec();
        match sp.apply_semigroup(&f, diffusivity, time) {
            Ok(g) => copy_out(&g, output, len),
            Err(e) => from_error(e),
        }
    })
}

/// Runs the validation suite; `passed` receives 1 or 0. The status is
/// `ValidationFailed` when any check fails.
#[no_mangle]
pub unsafe extern "C" fn bds_validate(ensemble_size: usize, seed: u64, passed: *mut i32) -> BdsStatus {
    guard(|| {
        if passed.is_null() {
            return fail(BdsStatus::NullPointer, "null passed");
        }
        let opts = ValidationOptions {
            ensemble_size: ensemble_size.max(2),
            seed,
            ..ValidationOptions::default()
        };
        let report = harness::run_validation(&opts);
        *passed = report.passed() as i32;
        if report.passed() {
            BdsStatus::Ok
        } else {
            fail(BdsStatus::ValidationFailed, report.table())
        }
    })
}
