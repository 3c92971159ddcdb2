//! C ABI over the experiment runner: opaque handles, status codes, and
//! JSON/CSV strings across the boundary. The generated header lands in
//! `include/bellsim.h` at build time.
//!
//! Conventions: functions return a [`BellsimStatus`]; outputs come back
//! through out-pointers; strings allocated here must be released with
//! [`bellsim_string_free`]; a thread-local message describing the last
//! failure is available from [`bellsim_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use bellsim::experiment::{
    render_csv, render_json, run_experiment, ExperimentConfig, ExperimentReport,
};

/// Status code returned by every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InternalError = 4,
    NotRun = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).ok();
    });
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

/// Experiment handle: a validated config plus, after a run, its report.
pub struct BellsimExperiment {
    config: ExperimentConfig,
    report: Option<ExperimentReport>,
}

/// Crate version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn bellsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or NULL when the
/// last call succeeded. Valid until the next failing call; do not free.
#[no_mangle]
pub extern "C" fn bellsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |message| message.as_ptr())
    })
}

/// Creates an experiment from a flat JSON config object (the same format
/// the CLI accepts via `--config`, `scenario` key required).
///
/// # Safety
/// `config_json` must point to a NUL-terminated string and `out` to a
/// writable handle slot. A handle returned here must be released with
/// [`bellsim_experiment_free`].
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_new(
    config_json: *const c_char,
    out: *mut *mut BellsimExperiment,
) -> BellsimStatus {
    if config_json.is_null() || out.is_null() {
        set_last_error("null pointer argument".to_string());
        return BellsimStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let Ok(json) = CStr::from_ptr(config_json).to_str() else {
        set_last_error("config is not valid UTF-8".to_string());
        return BellsimStatus::InvalidUtf8;
    };
    match ExperimentConfig::from_json_str(json) {
        Ok(config) => {
            clear_last_error();
            let handle = Box::new(BellsimExperiment {
                config,
                report: None,
            });
            *out = Box::into_raw(handle);
            BellsimStatus::Ok
        }
        Err(e) => {
            set_last_error(e.to_string());
            BellsimStatus::InvalidConfig
        }
    }
}

/// Runs the experiment and stores the report inside the handle.
///
/// # Safety
/// `handle` must come from [`bellsim_experiment_new`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_run(handle: *mut BellsimExperiment) -> BellsimStatus {
    let Some(experiment) = handle.as_mut() else {
        set_last_error("null experiment handle".to_string());
        return BellsimStatus::NullPointer;
    };
    match run_experiment(&experiment.config) {
        Ok(report) => {
            clear_last_error();
            experiment.report = Some(report);
            BellsimStatus::Ok
        }
        Err(e) => {
            set_last_error(e.to_string());
            BellsimStatus::InternalError
        }
    }
}

unsafe fn report_string(
    handle: *const BellsimExperiment,
    out: *mut *mut c_char,
    render: impl Fn(&ExperimentReport) -> bellsim::Result<String>,
) -> BellsimStatus {
    if out.is_null() {
        set_last_error("null output pointer".to_string());
        return BellsimStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let Some(experiment) = handle.as_ref() else {
        set_last_error("null experiment handle".to_string());
        return BellsimStatus::NullPointer;
    };
    let Some(report) = experiment.report.as_ref() else {
        set_last_error("experiment has not been run".to_string());
        return BellsimStatus::NotRun;
    };
    match render(report) {
        Ok(text) => match CString::new(text) {
            Ok(cstring) => {
                clear_last_error();
                *out = cstring.into_raw();
                BellsimStatus::Ok
            }
            Err(e) => {
                set_last_error(format!("report contains NUL: {e}"));
                BellsimStatus::InternalError
            }
        },
        Err(e) => {
            set_last_error(e.to_string());
            BellsimStatus::InternalError
        }
    }
}

/// Copies the report out as pretty JSON. Free the string with
/// [`bellsim_string_free`].
///
/// # Safety
/// `handle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_report_json(
    handle: *const BellsimExperiment,
    out: *mut *mut c_char,
) -> BellsimStatus {
    report_string(handle, out, render_json)
}

/// Copies the report out as CSV. Free the string with
/// [`bellsim_string_free`].
///
/// # Safety
/// `handle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_report_csv(
    handle: *const BellsimExperiment,
    out: *mut *mut c_char,
) -> BellsimStatus {
    report_string(handle, out, render_csv)
}

/// Releases an experiment handle. NULL is accepted.
///
/// # Safety
/// `handle` must come from [`bellsim_experiment_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_free(handle: *mut BellsimExperiment) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Releases a string returned by the report functions. NULL is accepted.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bellsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
