//! C ABI for the wavetap toolkit.
//!
//! Configurations are opaque handles created and destroyed by this library;
//! report strings are NUL-terminated UTF-8 allocated here, owned by the
//! caller, and released with [`wavetap_string_free`]. Every fallible call
//! returns a [`WavetapStatus`]; on failure a thread-local message can be
//! retrieved with [`wavetap_last_error_message`]. Handles must not be shared
//! across threads without external synchronisation, but independent handles
//! may be used from different threads freely.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wavetap::harness::ber::run_ber_experiment;
use wavetap::harness::config::ExperimentConfig;
use wavetap::harness::llr::run_llr_histogram;
use wavetap::harness::report::{
    ber_csv, covariance_csv, json_report, llr_csv, validation_csv, Format,
};
use wavetap::harness::validate::{run_covariance_check, run_probe_validation};
use wavetap::harness::NOISE_SCALE;
use wavetap::line::{
    alpha_from_db, reflection_coefficient, reflection_coefficients, theoretical_covariance,
    LineConfig,
};
use wavetap::Error;

/// Result of a wavetap C API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavetapStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    Utf8Error = 2,
    /// An argument or configuration value was rejected.
    InvalidArgument = 3,
    /// The computation itself failed.
    RuntimeError = 4,
}

/// Opaque experiment configuration handle.
pub struct WavetapConfig(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes removed above");
    });
}

fn fail(status: WavetapStatus, message: &str) -> WavetapStatus {
    set_last_error(message);
    status
}

fn fail_with(err: &Error) -> WavetapStatus {
    let status = match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::ShapeMismatch(_) => {
            WavetapStatus::InvalidArgument
        }
        _ => WavetapStatus::RuntimeError,
    };
    fail(status, &err.to_string())
}

/// Runs a closure, converting panics into [`WavetapStatus::RuntimeError`] so
/// they never unwind across the ABI boundary.
fn guarded<F: FnOnce() -> WavetapStatus>(f: F) -> WavetapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(WavetapStatus::RuntimeError, "internal panic"),
    }
}

fn to_owned_c_string(text: &str) -> *mut c_char {
    CString::new(text.replace('\0', " "))
        .expect("NUL bytes removed above")
        .into_raw()
}

/// Reads a required UTF-8 string argument.
///
/// # Safety
///
/// `ptr` must be NULL or point to a NUL-terminated string.
unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, WavetapStatus> {
    if ptr.is_null() {
        return Err(fail(
            WavetapStatus::NullPointer,
            &format!("{name} must not be NULL"),
        ));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(WavetapStatus::Utf8Error, &format!("{name} is not valid UTF-8")))
}

/// Creates a configuration with the desk-scale defaults. Never fails.
/// Release with [`wavetap_config_free`].
#[no_mangle]
pub extern "C" fn wavetap_config_default() -> *mut WavetapConfig {
    Box::into_raw(Box::new(WavetapConfig(ExperimentConfig::default())))
}

/// Parses a configuration from flat TOML text (unknown keys are rejected)
/// and stores the new handle in `out_config`.
///
/// # Safety
///
/// `text` must be a NUL-terminated string and `out_config` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wavetap_config_from_toml(
    text: *const c_char,
    out_config: *mut *mut WavetapConfig,
) -> WavetapStatus {
    guarded(|| {
        if out_config.is_null() {
            return fail(WavetapStatus::NullPointer, "out_config must not be NULL");
        }
        let text = match str_arg(text, "text") {
            Ok(text) => text,
            Err(status) => return status,
        };
        match ExperimentConfig::from_toml_str(text) {
            Ok(config) => {
                *out_config = Box::into_raw(Box::new(WavetapConfig(config)));
                WavetapStatus::Ok
            }
            Err(err) => fail_with(&err),
        }
    })
}

/// Overrides the root seed of a configuration.
///
/// # Safety
///
/// `config` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wavetap_config_set_seed(
    config: *mut WavetapConfig,
    seed: u64,
) -> WavetapStatus {
    match config.as_mut() {
        None => fail(WavetapStatus::NullPointer, "config must not be NULL"),
        Some(config) => {
            config.0.seed = seed;
            WavetapStatus::Ok
        }
    }
}

/// Overrides the observation mode; `mode` is `"analytic"` or `"probe"`.
///
/// # Safety
///
/// `config` must be a live handle and `mode` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wavetap_config_set_mode(
    config: *mut WavetapConfig,
    mode: *const c_char,
) -> WavetapStatus {
    guarded(|| {
        let Some(config) = config.as_mut() else {
            return fail(WavetapStatus::NullPointer, "config must not be NULL");
        };
        let mode = match str_arg(mode, "mode") {
            Ok(mode) => mode,
            Err(status) => return status,
        };
        match mode.parse() {
            Ok(mode) => {
                config.0.mode = mode;
                WavetapStatus::Ok
            }
            Err(err) => fail_with(&err),
        }
    })
}

/// Overrides the Monte-Carlo trial count per grid point.
///
/// # Safety
///
/// `config` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wavetap_config_set_trials(
    config: *mut WavetapConfig,
    trials: usize,
) -> WavetapStatus {
    match config.as_mut() {
        None => fail(WavetapStatus::NullPointer, "config must not be NULL"),
        Some(config) => {
            config.0.trials = trials;
            WavetapStatus::Ok
        }
    }
}

/// Releases a configuration handle. NULL is ignored.
///
/// # Safety
///
/// `config` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wavetap_config_free(config: *mut WavetapConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn config_arg<'a>(
    config: *const WavetapConfig,
) -> Result<&'a ExperimentConfig, WavetapStatus> {
    match config.as_ref() {
        None => Err(fail(WavetapStatus::NullPointer, "config must not be NULL")),
        Some(config) => Ok(&config.0),
    }
}

unsafe fn emit(
    text: Result<String, Error>,
    out_report: *mut *mut c_char,
) -> WavetapStatus {
    match text {
        Ok(text) => {
            *out_report = to_owned_c_string(&text);
            WavetapStatus::Ok
        }
        Err(err) => fail_with(&err),
    }
}

/// Runs the bit-error-rate sweep and stores a report in `out_report`;
/// `format` is `"csv"` or `"json"`. Release the string with
/// [`wavetap_string_free`].
///
/// # Safety
///
/// `config` must be a live handle, `format` a NUL-terminated string, and
/// `out_report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wavetap_run_ber(
    config: *const WavetapConfig,
    format: *const c_char,
    out_report: *mut *mut c_char,
) -> WavetapStatus {
    guarded(|| {
        if out_report.is_null() {
            return fail(WavetapStatus::NullPointer, "out_report must not be NULL");
        }
        let (config, format) = match parse_run_args(config, format) {
            Ok(args) => args,
            Err(status) => return status,
        };
        let text = run_ber_experiment(config).and_then(|points| match format {
            Format::Csv => Ok(ber_csv(&points)),
            Format::Json => json_report("ber", config, &points),
        });
        emit(text, out_report)
    })
}

/// Runs the statistic-histogram experiment; with `correlated` false the
/// power-only baseline is scored instead of the joint detector.
///
/// # Safety
///
/// Same contract as [`wavetap_run_ber`].
#[no_mangle]
pub unsafe extern "C" fn wavetap_run_llr_hist(
    config: *const WavetapConfig,
    correlated: bool,
    format: *const c_char,
    out_report: *mut *mut c_char,
) -> WavetapStatus {
    guarded(|| {
        if out_report.is_null() {
            return fail(WavetapStatus::NullPointer, "out_report must not be NULL");
        }
        let (config, format) = match parse_run_args(config, format) {
            Ok(args) => args,
            Err(status) => return status,
        };
        let text =
            run_llr_histogram(config, correlated).and_then(|histograms| match format {
                Format::Csv => Ok(llr_csv(&histograms)),
                Format::Json => json_report("llr-hist", config, &histograms),
            });
        emit(text, out_report)
    })
}

/// Runs the probe self-tests; `out_passed` receives whether every check
/// passed.
///
/// # Safety
///
/// Same contract as [`wavetap_run_ber`], plus a valid `out_passed` pointer.
#[no_mangle]
pub unsafe extern "C" fn wavetap_run_probe_validation(
    config: *const WavetapConfig,
    format: *const c_char,
    out_report: *mut *mut c_char,
    out_passed: *mut bool,
) -> WavetapStatus {
    guarded(|| {
        if out_report.is_null() || out_passed.is_null() {
            return fail(
                WavetapStatus::NullPointer,
                "out_report and out_passed must not be NULL",
            );
        }
        let (config, format) = match parse_run_args(config, format) {
            Ok(args) => args,
            Err(status) => return status,
        };
        match run_probe_validation(config) {
            Ok(report) => {
                *out_passed = report.passed;
                let text = match format {
                    Format::Csv => Ok(validation_csv(&report)),
                    Format::Json => json_report("probe-validate", config, &report),
                };
                emit(text, out_report)
            }
            Err(err) => fail_with(&err),
        }
    })
}

/// Compares simulated wave covariance with its closed form; `out_passed`
/// receives whether every row stayed within tolerance.
///
/// # Safety
///
/// Same contract as [`wavetap_run_probe_validation`].
#[no_mangle]
pub unsafe extern "C" fn wavetap_run_cov_check(
    config: *const WavetapConfig,
    format: *const c_char,
    out_report: *mut *mut c_char,
    out_passed: *mut bool,
) -> WavetapStatus {
    guarded(|| {
        if out_report.is_null() || out_passed.is_null() {
            return fail(
                WavetapStatus::NullPointer,
                "out_report and out_passed must not be NULL",
            );
        }
        let (config, format) = match parse_run_args(config, format) {
            Ok(args) => args,
            Err(status) => return status,
        };
        match run_covariance_check(config) {
            Ok(report) => {
                *out_passed = report.passed;
                let text = match format {
                    Format::Csv => Ok(covariance_csv(&report)),
                    Format::Json => json_report("cov-check", config, &report),
                };
                emit(text, out_report)
            }
            Err(err) => fail_with(&err),
        }
    })
}

unsafe fn parse_run_args<'a>(
    config: *const WavetapConfig,
    format: *const c_char,
) -> Result<(&'a ExperimentConfig, Format), WavetapStatus> {
    let config = config_arg(config)?;
    let format = str_arg(format, "format")?;
    let format = format.parse().map_err(|err: Error| fail_with(&err))?;
    Ok((config, format))
}

/// Reflection coefficient `(resistance - z0) / (resistance + z0)` of a
/// resistive termination.
///
/// # Safety
///
/// `out_gamma` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wavetap_reflection_coefficient(
    resistance: f64,
    z0: f64,
    out_gamma: *mut f64,
) -> WavetapStatus {
    if out_gamma.is_null() {
        return fail(WavetapStatus::NullPointer, "out_gamma must not be NULL");
    }
    match reflection_coefficient(resistance, z0) {
        Ok(gamma) => {
            *out_gamma = gamma;
            WavetapStatus::Ok
        }
        Err(err) => fail_with(&err),
    }
}

/// Closed-form steady-state covariance of the two directional waves on a
/// line terminated with `r_alice` and `r_bob` at the given one-way loss.
///
/// # Safety
///
/// The three output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wavetap_wave_covariance(
    r_alice: f64,
    r_bob: f64,
    z0: f64,
    loss_db: f64,
    out_c_pp: *mut f64,
    out_c_pm: *mut f64,
    out_c_mm: *mut f64,
) -> WavetapStatus {
    guarded(|| {
        if out_c_pp.is_null() || out_c_pm.is_null() || out_c_mm.is_null() {
            return fail(WavetapStatus::NullPointer, "output pointers must not be NULL");
        }
        let alpha = alpha_from_db(loss_db);
        let result = LineConfig::new(r_alice, r_bob, z0, alpha, NOISE_SCALE)
            .and_then(|line| reflection_coefficients(&line))
            .and_then(|gammas| theoretical_covariance(gammas, alpha, NOISE_SCALE));
        match result {
            Ok(cov) => {
                *out_c_pp = cov.c_pp;
                *out_c_pm = cov.c_pm;
                *out_c_mm = cov.c_mm;
                WavetapStatus::Ok
            }
            Err(err) => fail_with(&err),
        }
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
///
/// `text` must be NULL or a string returned by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn wavetap_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Returns a copy of the calling thread's most recent error message (empty
/// if none). Release with [`wavetap_string_free`].
#[no_mangle]
pub extern "C" fn wavetap_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| slot.borrow().clone().into_raw())
}
