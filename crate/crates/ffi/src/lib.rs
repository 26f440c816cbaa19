//! C ABI over the estimators, the error metrics and the UFLS surrogate.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Fallible calls return an [`RbStatus`];
//! the message of the last failure on the calling thread is available from
//! [`rb_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rocofbench::estimators::{estimate_stream, Algorithm, EstimatorConfig, PhasorEstimate, PmuClass, RocofMode};
use rocofbench::metrics::rfe_stats;
use rocofbench::uflsim::{run_ufls, MeasurementSource, UflsScenario};
use rocofbench::{Error, Waveform};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbStatus {
    Ok = 0,
    InvalidInput = 1,
    Config = 2,
    Numerical = 3,
    Parse = 4,
    Io = 5,
    NullPointer = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbClass {
    P = 0,
    M = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbAlgorithm {
    EIpdft = 0,
    IIpdft = 1,
    Tfm = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbRocofMode {
    FiniteDifference = 0,
    Derivative = 1,
}

/// Measurement chain and relay of a preset UFLS scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbChain {
    /// PLL meter with the frequency-staged relay.
    PllStaged = 0,
    /// Class P static PMU with the ROCOF relay.
    Pmu1Rocof = 1,
    /// Class M dynamic PMU with the ROCOF relay.
    Pmu2Rocof = 2,
    /// Noise-free simulated readings with the ROCOF relay.
    IdealRocof = 3,
}

/// One reporting instant. `rocof_valid` is 0 where the ROCOF is undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RbEstimate {
    pub t_mid: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub freq: f64,
    pub rocof: f64,
    pub rocof_valid: u8,
    pub converged: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RbErrorStats {
    pub mean: f64,
    pub std: f64,
    pub p95_abs: f64,
    /// NaN when the correlation is undefined.
    pub pearson: f64,
    pub n: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RbUflsSummary {
    pub blackout: u8,
    /// NaN without a blackout.
    pub blackout_t: f64,
    pub eens_mwh: f64,
    pub shed_mw: f64,
    pub nadir_t: f64,
    pub nadir_hz: f64,
}

/// Estimator configuration handle.
pub struct RbEstimator {
    cfg: EstimatorConfig,
}

/// Estimate stream handle.
pub struct RbStream {
    est: Vec<PhasorEstimate>,
}

/// UFLS scenario handle.
pub struct RbScenario {
    sc: UflsScenario,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> RbStatus {
    match e {
        Error::InvalidInput(_) => RbStatus::InvalidInput,
        Error::Config(_) => RbStatus::Config,
        Error::Numerical(_) => RbStatus::Numerical,
        Error::Parse { .. } => RbStatus::Parse,
        Error::Io(_) => RbStatus::Io,
    }
}

/// Runs `f`, recording the failure message and mapping panics.
fn guard(f: impl FnOnce() -> Result<(), RbStatus>) -> RbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RbStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            RbStatus::Panic
        }
    }
}

fn fail(e: Error) -> RbStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> RbStatus {
    set_error(format!("{what} is null"));
    RbStatus::NullPointer
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an estimator for `fs` Hz sampling at 50 Hz nominal and 50 frames/s.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rb_estimator_new(
    class: RbClass,
    algorithm: RbAlgorithm,
    mode: RbRocofMode,
    fs: f64,
    out: *mut *mut RbEstimator,
) -> RbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let class = match class {
            RbClass::P => PmuClass::P,
            RbClass::M => PmuClass::M,
        };
        let algorithm = match algorithm {
            RbAlgorithm::EIpdft => Algorithm::EIpdft,
            RbAlgorithm::IIpdft => Algorithm::IIpdft,
            RbAlgorithm::Tfm => Algorithm::Tfm,
        };
        let mode = match mode {
            RbRocofMode::FiniteDifference => RocofMode::FiniteDifference,
            RbRocofMode::Derivative => RocofMode::Derivative,
        };
        let mut cfg = EstimatorConfig::new(class, algorithm, mode);
        cfg.fs = fs;
        cfg.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(RbEstimator { cfg }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`rb_estimator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rb_estimator_free(h: *mut RbEstimator) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Window length of the estimator in samples.
///
/// # Safety
/// `h` must be a live estimator handle.
#[no_mangle]
pub unsafe extern "C" fn rb_estimator_window_len(h: *const RbEstimator) -> usize {
    h.as_ref().and_then(|h| h.cfg.window_len().ok()).unwrap_or(0)
}

/// Runs the estimator over `n` samples starting at time 0.
///
/// # Safety
/// `h` must be a live estimator handle, `samples` must point to `n` readable
/// doubles and `out` to storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rb_estimate_stream(
    h: *const RbEstimator,
    samples: *const f64,
    n: usize,
    out: *mut *mut RbStream,
) -> RbStatus {
    guard(|| {
        let Some(h) = h.as_ref() else { return Err(null("estimator")) };
        if samples.is_null() {
            return Err(null("samples"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let x = std::slice::from_raw_parts(samples, n).to_vec();
        let w = Waveform::new(h.cfg.fs, x).map_err(fail)?;
        let est = estimate_stream(&w, &h.cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(RbStream { est }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a live stream handle.
#[no_mangle]
pub unsafe extern "C" fn rb_stream_len(s: *const RbStream) -> usize {
    s.as_ref().map_or(0, |s| s.est.len())
}

/// Copies estimate `i` into `out`.
///
/// # Safety
/// `s` must be a live stream handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_stream_get(s: *const RbStream, i: usize, out: *mut RbEstimate) -> RbStatus {
    guard(|| {
        let Some(s) = s.as_ref() else { return Err(null("stream")) };
        let Some(out) = out.as_mut() else { return Err(null("out")) };
        let Some(e) = s.est.get(i) else {
            set_error(format!("index {i} out of range ({} estimates)", s.est.len()));
            return Err(RbStatus::InvalidInput);
        };
        *out = RbEstimate {
            t_mid: e.t_mid,
            amplitude: e.amplitude,
            phase: e.phase,
            freq: e.freq,
            rocof: e.rocof.unwrap_or(f64::NAN),
            rocof_valid: e.rocof.is_some() as u8,
            converged: !e.flags.convergence_failed as u8,
        };
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a stream handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rb_stream_free(s: *mut RbStream) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Error statistics of `est - reference` over `n` pairs.
///
/// # Safety
/// `est` and `reference` must point to `n` readable doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_rfe_stats(
    est: *const f64,
    reference: *const f64,
    n: usize,
    out: *mut RbErrorStats,
) -> RbStatus {
    guard(|| {
        if est.is_null() || reference.is_null() {
            return Err(null("input"));
        }
        let Some(out) = out.as_mut() else { return Err(null("out")) };
        let a = std::slice::from_raw_parts(est, n);
        let b = std::slice::from_raw_parts(reference, n);
        let s = rfe_stats(a, b).map_err(fail)?;
        *out = RbErrorStats {
            mean: s.mean,
            std: s.std,
            p95_abs: s.p95_abs,
            pearson: s.pearson.unwrap_or(f64::NAN),
            n: s.n,
        };
        Ok(())
    })
}

/// Calibrated default UFLS scenario for a chain.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rb_ufls_scenario_new(chain: RbChain, out: *mut *mut RbScenario) -> RbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sc = match chain {
            RbChain::PllStaged => UflsScenario::pll_staged(),
            RbChain::Pmu1Rocof => UflsScenario::pmu_rocof(MeasurementSource::pmu1()),
            RbChain::Pmu2Rocof => UflsScenario::pmu_rocof(MeasurementSource::pmu2()),
            RbChain::IdealRocof => UflsScenario::pmu_rocof(MeasurementSource::Ideal),
        };
        *out = Box::into_raw(Box::new(RbScenario { sc }));
        Ok(())
    })
}

/// Scenario from a TOML document with `relay` and `measurement` tables and
/// optional `grid`, `noise` and `sim` tables.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_ufls_scenario_from_toml(toml: *const c_char, out: *mut *mut RbScenario) -> RbStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| fail(Error::Config(e.to_string())))?;
        let sc: UflsScenario = toml::from_str(text).map_err(|e| fail(Error::Config(e.to_string())))?;
        sc.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(RbScenario { sc }));
        Ok(())
    })
}

/// Overrides the aggregate inertia constant, s.
///
/// # Safety
/// `h` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn rb_ufls_scenario_set_inertia(h: *mut RbScenario, inertia: f64) -> RbStatus {
    guard(|| {
        let Some(h) = h.as_mut() else { return Err(null("scenario")) };
        let mut sc = h.sc.clone();
        sc.grid.h = inertia;
        sc.validate().map_err(fail)?;
        h.sc = sc;
        Ok(())
    })
}

/// # Safety
/// `h` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_ufls_run(h: *const RbScenario, out: *mut RbUflsSummary) -> RbStatus {
    guard(|| {
        let Some(h) = h.as_ref() else { return Err(null("scenario")) };
        let Some(out) = out.as_mut() else { return Err(null("out")) };
        let r = run_ufls(&h.sc).map_err(fail)?;
        let (nadir_t, nadir_hz) = r.nadir();
        *out = RbUflsSummary {
            blackout: r.is_blackout() as u8,
            blackout_t: r.blackout.unwrap_or(f64::NAN),
            eens_mwh: r.eens_mwh,
            shed_mw: r.total_shed_mw(),
            nadir_t,
            nadir_hz,
        };
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a scenario handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rb_ufls_scenario_free(h: *mut RbScenario) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Owned copy of the last error message.
///
/// # Safety
/// The returned string must be released with [`rb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn rb_last_error_copy() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().into_raw())
}

/// # Safety
/// `s` must be null or a string from [`rb_last_error_copy`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
