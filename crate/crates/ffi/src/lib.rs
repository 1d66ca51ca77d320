//! C ABI over the sgdlab core.
//!
//! Every fallible entry point returns an `SgdlabStatus`; on anything other
//! than `SGDLAB_STATUS_OK` a message is available from `sgdlab_last_error`
//! on the same thread. Objects are opaque handles released with their
//! `_free` function. Pointer arguments must be valid for the lengths given;
//! a null pointer where one is required yields `SGDLAB_STATUS_NULL_POINTER`.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sgdlab::cli::config::{self, ExperimentConfig};
use sgdlab::cli::experiment;
use sgdlab::landscapes::{Landscape, Objective};
use sgdlab::rates::{self, BudgetParams, ProblemConstants, Quantity, Regime};
use sgdlab::schedules::{Family, Schedule, ScheduleSpec};
use sgdlab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgdlabStatus {
    Ok = 0,
    NullPointer = 1,
    /// A string argument was not valid UTF-8 or JSON.
    InvalidString = 2,
    /// Unknown name, bad parameter or bad config field.
    InvalidArgument = 3,
    OutOfScope = 4,
    Domain = 5,
    Divergence = 6,
    InsufficientData = 7,
    DegenerateSample = 8,
    Hypothesis = 9,
    UnsupportedRegime = 10,
    Assumption = 11,
    Io = 12,
    Panic = 13,
}

pub const SGDLAB_FAMILY_POLY: i32 = 0;
pub const SGDLAB_FAMILY_POLY_LOG: i32 = 1;
pub const SGDLAB_FAMILY_LOG_POWER: i32 = 2;

pub const SGDLAB_REGIME_LOCAL_A: i32 = 0;
pub const SGDLAB_REGIME_LOCAL_B: i32 = 1;
pub const SGDLAB_REGIME_UNIFIED: i32 = 2;
pub const SGDLAB_REGIME_GLOBAL: i32 = 3;

pub const SGDLAB_QUANTITY_MIN_F_GAP: i32 = 0;
pub const SGDLAB_QUANTITY_F_GAP: i32 = 1;
pub const SGDLAB_QUANTITY_MIN_GRAD_SQ: i32 = 2;
pub const SGDLAB_QUANTITY_ITERATE_GAP: i32 = 3;

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SgdlabScheduleSpec {
    /// One of the `SGDLAB_FAMILY_*` constants.
    pub family: i32,
    pub gamma0: f64,
    pub c: f64,
    pub cprime: f64,
    pub s: f64,
    /// Hölder exponent, used by the log-power family only.
    pub alpha: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SgdlabBudgetParams {
    pub alpha: f64,
    pub l: f64,
    pub beta: f64,
    pub zeta: f64,
    pub kappa: f64,
    /// NaN selects the schedule's own limiting ratio.
    pub rho: f64,
    pub regime: i32,
    pub quantity: i32,
    /// NaN leaves the iterate exponent at its default.
    pub sigma: f64,
}

pub struct SgdlabLandscape(Landscape);
pub struct SgdlabSchedule(Schedule);
pub struct SgdlabExperiment(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SgdlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Catalog(_) | Error::InvalidParam(_) | Error::Parse { .. } | Error::Validation { .. } => {
                SgdlabStatus::InvalidArgument
            }
            Error::OutOfScope(_) => SgdlabStatus::OutOfScope,
            Error::Domain(_) => SgdlabStatus::Domain,
            Error::Divergence { .. } => SgdlabStatus::Divergence,
            Error::InsufficientData(_) => SgdlabStatus::InsufficientData,
            Error::DegenerateSample(_) => SgdlabStatus::DegenerateSample,
            Error::Hypothesis(_) => SgdlabStatus::Hypothesis,
            Error::UnsupportedRegime(_) => SgdlabStatus::UnsupportedRegime,
            Error::Assumption(_) => SgdlabStatus::Assumption,
            Error::Io(_) => SgdlabStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SgdlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgdlabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            SgdlabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SgdlabStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SgdlabStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SgdlabStatus::InvalidString, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn regime(code: i32) -> Result<Regime, Failure> {
    Ok(match code {
        SGDLAB_REGIME_LOCAL_A => Regime::LocalA,
        SGDLAB_REGIME_LOCAL_B => Regime::LocalB,
        SGDLAB_REGIME_UNIFIED => Regime::Unified,
        SGDLAB_REGIME_GLOBAL => Regime::Global,
        _ => return Err(invalid(format!("unknown regime code {code}"))),
    })
}

fn quantity(code: i32) -> Result<Quantity, Failure> {
    Ok(match code {
        SGDLAB_QUANTITY_MIN_F_GAP => Quantity::MinFGap,
        SGDLAB_QUANTITY_F_GAP => Quantity::FGap,
        SGDLAB_QUANTITY_MIN_GRAD_SQ => Quantity::MinGradSq,
        SGDLAB_QUANTITY_ITERATE_GAP => Quantity::IterateGap,
        _ => return Err(invalid(format!("unknown quantity code {code}"))),
    })
}

fn nan_none(x: f64) -> Option<f64> {
    (!x.is_nan()).then_some(x)
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sgdlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn sgdlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `params_json` is an optional JSON object of numeric parameters, e.g.
/// `{"q": 1.5}`; pass null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_landscape_new(
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut SgdlabLandscape,
) -> SgdlabStatus {
    guard(|| {
        let name = string(name, "name")?;
        let params: BTreeMap<String, f64> = if params_json.is_null() {
            BTreeMap::new()
        } else {
            serde_json::from_str(string(params_json, "params_json")?)
                .map_err(|e| Failure(SgdlabStatus::InvalidString, format!("params_json: {e}")))?
        };
        let land = Landscape::catalog(name, &params)?;
        write(out, Box::into_raw(Box::new(SgdlabLandscape(land))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdlab_landscape_free(land: *mut SgdlabLandscape) {
    if !land.is_null() {
        drop(Box::from_raw(land));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sgdlab_landscape_dim(land: *const SgdlabLandscape, out: *mut usize) -> SgdlabStatus {
    guard(|| write(out, deref(land, "land")?.0.dim(), "out"))
}

unsafe fn point<'a>(land: &SgdlabLandscape, theta: *const f64, dim: usize) -> Result<&'a [f64], Failure> {
    if dim != land.0.dim() {
        return Err(invalid(format!("dim {dim} does not match the landscape dimension {}", land.0.dim())));
    }
    slice(theta, dim, "theta")
}

#[no_mangle]
pub unsafe extern "C" fn sgdlab_landscape_value(
    land: *const SgdlabLandscape,
    theta: *const f64,
    dim: usize,
    out: *mut f64,
) -> SgdlabStatus {
    guard(|| {
        let land = deref(land, "land")?;
        let theta = point(land, theta, dim)?;
        write(out, land.0.value(theta), "out")
    })
}

/// Writes `dim` gradient entries to `out`.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_landscape_gradient(
    land: *const SgdlabLandscape,
    theta: *const f64,
    dim: usize,
    out: *mut f64,
) -> SgdlabStatus {
    guard(|| {
        let land = deref(land, "land")?;
        let theta = point(land, theta, dim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        land.0.gradient_into(theta, std::slice::from_raw_parts_mut(out, dim));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdlab_schedule_new(
    spec: *const SgdlabScheduleSpec,
    out: *mut *mut SgdlabSchedule,
) -> SgdlabStatus {
    guard(|| {
        let spec = deref(spec, "spec")?;
        let family = match spec.family {
            SGDLAB_FAMILY_POLY => Family::Poly,
            SGDLAB_FAMILY_POLY_LOG => Family::PolyLog,
            SGDLAB_FAMILY_LOG_POWER => Family::LogPower,
            f => return Err(invalid(format!("unknown schedule family code {f}"))),
        };
        let sch = Schedule::new(ScheduleSpec {
            family,
            gamma0: spec.gamma0,
            c: spec.c,
            cprime: spec.cprime,
            s: spec.s,
            alpha: spec.alpha,
        })?;
        write(out, Box::into_raw(Box::new(SgdlabSchedule(sch))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdlab_schedule_free(sch: *mut SgdlabSchedule) {
    if !sch.is_null() {
        drop(Box::from_raw(sch));
    }
}

/// Step size at `n >= 1`.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_schedule_gamma(sch: *const SgdlabSchedule, n: u64, out: *mut f64) -> SgdlabStatus {
    guard(|| write(out, deref(sch, "sch")?.0.gamma(n)?, "out"))
}

/// `Sigma_n = gamma_1 + ... + gamma_{n+1}`, for `n >= 1`.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_schedule_partial_sum(
    sch: *const SgdlabSchedule,
    n: u64,
    out: *mut f64,
) -> SgdlabStatus {
    guard(|| write(out, deref(sch, "sch")?.0.partial_sum(n)?, "out"))
}

/// Smallest `n` with `gamma_n <= t`.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_schedule_gamma_inverse(
    sch: *const SgdlabSchedule,
    t: f64,
    out: *mut u64,
) -> SgdlabStatus {
    guard(|| write(out, deref(sch, "sch")?.0.gamma_inverse(t)?, "out"))
}

/// Closed-form inverse of the partial sums, as used by the budgets.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_schedule_sigma_inverse(
    sch: *const SgdlabSchedule,
    t: f64,
    out: *mut u64,
) -> SgdlabStatus {
    guard(|| write(out, deref(sch, "sch")?.0.sigma_inverse(t)?, "out"))
}

/// Iteration count for accuracy `eps` with probability `1 - delta`.
/// Saturates at `UINT64_MAX`.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_budget(
    sch: *const SgdlabSchedule,
    params: *const SgdlabBudgetParams,
    eps: f64,
    delta: f64,
    out_n: *mut u64,
) -> SgdlabStatus {
    guard(|| {
        let sch = &deref(sch, "sch")?.0;
        let p = deref(params, "params")?;
        let params = BudgetParams {
            constants: ProblemConstants { alpha: p.alpha, l: p.l, beta: p.beta, zeta: p.zeta, kappa: p.kappa },
            rho: nan_none(p.rho).unwrap_or_else(|| sch.rho_sup()),
            regime: regime(p.regime)?,
            quantity: quantity(p.quantity)?,
            sigma: nan_none(p.sigma),
        };
        write(out_n, rates::budget(eps, delta, &params, sch)?.n, "out_n")
    })
}

/// Parses and validates an experiment config given as JSON text.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_experiment_from_json(
    json: *const c_char,
    out: *mut *mut SgdlabExperiment,
) -> SgdlabStatus {
    guard(|| {
        let cfg = config::parse_config(string(json, "json")?)?;
        write(out, Box::into_raw(Box::new(SgdlabExperiment(cfg))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdlab_experiment_free(exp: *mut SgdlabExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Runs the ensemble and writes series.csv, report.json and manifest.json
/// into `out_dir`. `jobs == 0` uses every core. On success `out_exit_code`
/// receives the command-line exit code of the run: 0 pass, 2 fail,
/// 3 inconclusive, 4 divergence.
#[no_mangle]
pub unsafe extern "C" fn sgdlab_experiment_run(
    exp: *const SgdlabExperiment,
    out_dir: *const c_char,
    jobs: usize,
    out_exit_code: *mut i32,
) -> SgdlabStatus {
    guard(|| {
        let cfg = &deref(exp, "exp")?.0;
        let dir = Path::new(string(out_dir, "out_dir")?);
        if out_exit_code.is_null() {
            return Err(null("out_exit_code"));
        }
        let report = experiment::run_experiment(cfg, dir, (jobs > 0).then_some(jobs))?;
        write(out_exit_code, report.exit_code, "out_exit_code")
    })
}
