//! C ABI for the steinpair library.
//!
//! Couplings are opaque handles created by the model constructors or from
//! their documented JSON form; the pipeline entry points take the same JSON
//! configuration documents as the CLI's `--config` and return JSON reports.
//! Every function is panic-safe and reports failures through [`SpStatus`];
//! the detailed message of the most recent failure on the calling thread is
//! available via [`sp_last_error_message`].
//!
//! Memory rules: every `*mut SpCoupling` must be released with
//! [`sp_coupling_free`], every string returned through an out-parameter with
//! [`sp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use steinpair::coupling::ExactPairCoupling;
use steinpair::pipeline::{
    build_model, run_normal, run_poisson, run_verify, ConfigDocument, ExperimentConfig, Mode,
    RunOutcome,
};
use steinpair::Error;

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Model or configuration parameters were rejected; see
    /// `sp_last_error_message`.
    InvalidParameter = 3,
    /// The run completed but a theorem assertion failed; the report is
    /// still returned.
    TheoremViolation = 4,
    /// An internal panic was caught.
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_last_error(message: &str) {
    LAST_ERROR.with(|slot| {
        let mut slot = slot.borrow_mut();
        slot.clear();
        slot.extend_from_slice(message.as_bytes());
        slot.push(0);
    });
}

fn fail(err: &Error) -> SpStatus {
    set_last_error(&err.to_string());
    SpStatus::InvalidParameter
}

/// Copy the most recent error message on this thread into `buf`
/// (NUL-terminated, truncated to `cap` bytes). Returns the full message
/// length including the terminator; call with `cap = 0` to query the size.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes, or be null with
/// `cap = 0`.
#[no_mangle]
pub unsafe extern "C" fn sp_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        if slot.is_empty() {
            if !buf.is_null() && cap > 0 {
                unsafe { *buf = 0 };
            }
            return 0;
        }
        if !buf.is_null() && cap > 0 {
            let n = slot.len().min(cap);
            unsafe { std::ptr::copy_nonoverlapping(slot.as_ptr() as *const c_char, buf, n) };
            unsafe { *buf.add(n - 1) = 0 };
        }
        slot.len()
    })
}

/// Opaque exact pair coupling handle.
pub struct SpCoupling {
    inner: ExactPairCoupling,
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, SpStatus> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(SpStatus::NullPointer);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        SpStatus::InvalidUtf8
    })
}

fn give_string(text: String, out: *mut *mut c_char) -> SpStatus {
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SpStatus::Ok
        }
        Err(_) => {
            set_last_error("output contained an interior NUL byte");
            SpStatus::Panic
        }
    }
}

fn guard(body: impl FnOnce() -> SpStatus) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            SpStatus::Panic
        }
    }
}

/// Build a model coupling. `model` is one of the CLI model names
/// (rademacher, immigration_death, skewed_two_step, fixed_points,
/// biased_cycle); `params_json` is a JSON object of numeric parameters,
/// e.g. `{"n": 16}`. On success `*out` owns the new handle.
///
/// # Safety
/// `model` and `params_json` must be NUL-terminated strings; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_coupling_build(
    model: *const c_char,
    params_json: *const c_char,
    out: *mut *mut SpCoupling,
) -> SpStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return SpStatus::NullPointer;
        }
        let model = match unsafe { read_str(model) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let params_text = match unsafe { read_str(params_json) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let params = match steinpair::pipeline::parse_params_json(params_text) {
            Ok(p) => p,
            Err(err) => return fail(&err),
        };
        match build_model(model, &params) {
            Ok((coupling, _meta)) => {
                unsafe { *out = Box::into_raw(Box::new(SpCoupling { inner: coupling })) };
                SpStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Parse a coupling from its documented JSON form
/// `{"values": [...], "joint": [[...]]}`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_coupling_from_json(
    text: *const c_char,
    out: *mut *mut SpCoupling,
) -> SpStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return SpStatus::NullPointer;
        }
        let text = match unsafe { read_str(text) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ExactPairCoupling::from_json(text) {
            Ok(coupling) => {
                unsafe { *out = Box::into_raw(Box::new(SpCoupling { inner: coupling })) };
                SpStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Serialize a coupling to its documented JSON form. The returned string
/// must be released with `sp_string_free`.
///
/// # Safety
/// `handle` must be a live coupling handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_coupling_to_json(
    handle: *const SpCoupling,
    out: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        if handle.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SpStatus::NullPointer;
        }
        let coupling = unsafe { &(*handle).inner };
        give_string(coupling.to_json(), out)
    })
}

/// Number of support points of the coupling; 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live coupling handle.
#[no_mangle]
pub unsafe extern "C" fn sp_coupling_states(handle: *const SpCoupling) -> usize {
    if handle.is_null() {
        return 0;
    }
    unsafe { &(*handle).inner }.len()
}

/// Worst |row - column| marginal defect of the coupling; NaN for null.
///
/// # Safety
/// `handle` must be null or a live coupling handle.
#[no_mangle]
pub unsafe extern "C" fn sp_coupling_marginal_discrepancy(handle: *const SpCoupling) -> f64 {
    if handle.is_null() {
        return f64::NAN;
    }
    unsafe { &(*handle).inner }.marginal_discrepancy()
}

/// Whether max |p_{kj} - p_{jk}| <= tol.
///
/// # Safety
/// `handle` must be a live coupling handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_coupling_is_exchangeable(
    handle: *const SpCoupling,
    tol: f64,
    out: *mut bool,
) -> SpStatus {
    guard(|| {
        if handle.is_null() || out.is_null() {
            set_last_error("null pointer");
            return SpStatus::NullPointer;
        }
        unsafe { *out = (*handle).inner.is_exchangeable(tol) };
        SpStatus::Ok
    })
}

/// Release a coupling handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or a pointer previously returned by a constructor,
/// and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sp_coupling_free(handle: *mut SpCoupling) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

fn run_pipeline(
    mode: Mode,
    config_json: *const c_char,
    report_out: *mut *mut c_char,
    csv_out: *mut *mut c_char,
) -> SpStatus {
    if report_out.is_null() {
        set_last_error("null report out pointer");
        return SpStatus::NullPointer;
    }
    let document = if config_json.is_null() {
        ConfigDocument::default()
    } else {
        let text = match unsafe { read_str(config_json) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ConfigDocument::parse(text) {
            Ok(doc) => doc,
            Err(err) => return fail(&err),
        }
    };
    let config = ExperimentConfig::from_document(mode, &document);
    let result = match mode {
        Mode::Normal => run_normal(&config),
        Mode::Poisson => run_poisson(&config),
        Mode::Verify => run_verify(&config),
    };
    let outcome: RunOutcome = match result {
        Ok(outcome) => outcome,
        Err(err) => return fail(&err),
    };
    let report = match outcome.report_string() {
        Ok(text) => text,
        Err(err) => return fail(&err),
    };
    let status = give_string(report, report_out);
    if status != SpStatus::Ok {
        return status;
    }
    if !csv_out.is_null() {
        let status = give_string(outcome.csv_string(), csv_out);
        if status != SpStatus::Ok {
            return status;
        }
    }
    if outcome.all_pass {
        SpStatus::Ok
    } else {
        set_last_error("a theorem assertion failed; inspect the report");
        SpStatus::TheoremViolation
    }
}

/// Run the normal-approximation pipeline. `config_json` follows the CLI
/// config-file schema and must name a model; pass null `csv_out` to skip
/// the CSV. Returns `SP_STATUS_THEOREM_VIOLATION` when the run finishes
/// but an assertion fails (the report is still written).
///
/// # Safety
/// Pointer arguments must be null or valid as documented.
#[no_mangle]
pub unsafe extern "C" fn sp_run_normal(
    config_json: *const c_char,
    report_out: *mut *mut c_char,
    csv_out: *mut *mut c_char,
) -> SpStatus {
    guard(|| run_pipeline(Mode::Normal, config_json, report_out, csv_out))
}

/// Run the Poisson-approximation pipeline; see `sp_run_normal`.
///
/// # Safety
/// Pointer arguments must be null or valid as documented.
#[no_mangle]
pub unsafe extern "C" fn sp_run_poisson(
    config_json: *const c_char,
    report_out: *mut *mut c_char,
    csv_out: *mut *mut c_char,
) -> SpStatus {
    guard(|| run_pipeline(Mode::Poisson, config_json, report_out, csv_out))
}

/// Run the full verification suite; `config_json` may be null for the
/// default matrix and seed.
///
/// # Safety
/// Pointer arguments must be null or valid as documented.
#[no_mangle]
pub unsafe extern "C" fn sp_run_verify(
    config_json: *const c_char,
    report_out: *mut *mut c_char,
    csv_out: *mut *mut c_char,
) -> SpStatus {
    guard(|| run_pipeline(Mode::Verify, config_json, report_out, csv_out))
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer returned through an out-parameter of this
/// library, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
