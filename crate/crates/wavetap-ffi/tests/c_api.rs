//! Exercises the C ABI exactly as a foreign caller would: through raw
//! pointers, status codes, and the thread-local error message.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use wavetap_ffi::{
    wavetap_config_default, wavetap_config_free, wavetap_config_from_toml,
    wavetap_config_set_mode, wavetap_config_set_seed, wavetap_config_set_trials,
    wavetap_last_error_message, wavetap_reflection_coefficient, wavetap_run_ber,
    wavetap_run_cov_check, wavetap_run_llr_hist, wavetap_run_probe_validation,
    wavetap_string_free, wavetap_wave_covariance, WavetapConfig, WavetapStatus,
};

/// Takes ownership of a returned string and frees it through the ABI.
unsafe fn consume(text: *mut c_char) -> String {
    assert!(!text.is_null());
    let owned = CStr::from_ptr(text).to_str().unwrap().to_string();
    wavetap_string_free(text);
    owned
}

unsafe fn last_error() -> String {
    consume(wavetap_last_error_message())
}

unsafe fn small_config() -> *mut WavetapConfig {
    let toml = CString::new(
        "losses_db = [0.1]\naveraging_times = [1, 5]\ntrials = 200\nseed = 13\n",
    )
    .unwrap();
    let mut config: *mut WavetapConfig = ptr::null_mut();
    let status = wavetap_config_from_toml(toml.as_ptr(), &mut config);
    assert_eq!(status, WavetapStatus::Ok);
    assert!(!config.is_null());
    config
}

#[test]
fn default_config_runs_nothing_but_constructs_and_frees() {
    unsafe {
        let config = wavetap_config_default();
        assert!(!config.is_null());
        assert_eq!(wavetap_config_set_seed(config, 99), WavetapStatus::Ok);
        assert_eq!(wavetap_config_set_trials(config, 10), WavetapStatus::Ok);
        wavetap_config_free(config);
        // NULL frees are well-defined no-ops.
        wavetap_config_free(ptr::null_mut());
        wavetap_string_free(ptr::null_mut());
    }
}

#[test]
fn ber_runs_are_byte_identical_for_the_same_handle() {
    unsafe {
        let config = small_config();
        let format = CString::new("csv").unwrap();
        let mut first: *mut c_char = ptr::null_mut();
        let mut second: *mut c_char = ptr::null_mut();
        assert_eq!(
            wavetap_run_ber(config, format.as_ptr(), &mut first),
            WavetapStatus::Ok
        );
        assert_eq!(
            wavetap_run_ber(config, format.as_ptr(), &mut second),
            WavetapStatus::Ok
        );
        let first = consume(first);
        let second = consume(second);
        assert!(first.starts_with("loss_db,avg_time_corr_units,trials,errors,ber"));
        assert_eq!(first.lines().count(), 3);
        assert_eq!(first, second);
        wavetap_config_free(config);
    }
}

#[test]
fn seed_changes_propagate_through_the_handle() {
    unsafe {
        let config = small_config();
        let format = CString::new("csv").unwrap();
        let mut before: *mut c_char = ptr::null_mut();
        wavetap_run_ber(config, format.as_ptr(), &mut before);
        assert_eq!(wavetap_config_set_seed(config, 14), WavetapStatus::Ok);
        let mut after: *mut c_char = ptr::null_mut();
        wavetap_run_ber(config, format.as_ptr(), &mut after);
        assert_ne!(consume(before), consume(after));
        wavetap_config_free(config);
    }
}

#[test]
fn toml_errors_surface_as_invalid_argument_with_a_message() {
    unsafe {
        let toml = CString::new("trals = 100\n").unwrap();
        let mut config: *mut WavetapConfig = ptr::null_mut();
        let status = wavetap_config_from_toml(toml.as_ptr(), &mut config);
        assert_eq!(status, WavetapStatus::InvalidArgument);
        assert!(config.is_null());
        assert!(last_error().contains("trals"));
    }
}

#[test]
fn null_and_non_utf8_arguments_are_reported_not_crashed() {
    unsafe {
        let mut config: *mut WavetapConfig = ptr::null_mut();
        assert_eq!(
            wavetap_config_from_toml(ptr::null(), &mut config),
            WavetapStatus::NullPointer
        );
        assert_eq!(
            wavetap_config_from_toml(CString::new("x = 1").unwrap().as_ptr(), ptr::null_mut()),
            WavetapStatus::NullPointer
        );
        let invalid: [u8; 2] = [0xFF, 0x00];
        assert_eq!(
            wavetap_config_from_toml(invalid.as_ptr().cast::<c_char>(), &mut config),
            WavetapStatus::Utf8Error
        );

        let handle = wavetap_config_default();
        let mut report: *mut c_char = ptr::null_mut();
        assert_eq!(
            wavetap_run_ber(ptr::null(), CString::new("csv").unwrap().as_ptr(), &mut report),
            WavetapStatus::NullPointer
        );
        assert_eq!(
            wavetap_run_ber(handle, ptr::null(), &mut report),
            WavetapStatus::NullPointer
        );
        assert_eq!(
            wavetap_run_ber(handle, CString::new("csv").unwrap().as_ptr(), ptr::null_mut()),
            WavetapStatus::NullPointer
        );
        wavetap_config_free(handle);
    }
}

#[test]
fn mode_setter_validates_its_argument() {
    unsafe {
        let config = wavetap_config_default();
        let probe = CString::new("probe").unwrap();
        let bogus = CString::new("sideways").unwrap();
        assert_eq!(
            wavetap_config_set_mode(config, probe.as_ptr()),
            WavetapStatus::Ok
        );
        assert_eq!(
            wavetap_config_set_mode(config, bogus.as_ptr()),
            WavetapStatus::InvalidArgument
        );
        assert!(last_error().contains("sideways"));
        wavetap_config_free(config);
    }
}

#[test]
fn unknown_format_is_rejected_before_any_computation() {
    unsafe {
        let config = small_config();
        let format = CString::new("yaml").unwrap();
        let mut report: *mut c_char = ptr::null_mut();
        assert_eq!(
            wavetap_run_ber(config, format.as_ptr(), &mut report),
            WavetapStatus::InvalidArgument
        );
        assert!(report.is_null());
        wavetap_config_free(config);
    }
}

#[test]
fn llr_histograms_cover_both_scoring_variants() {
    unsafe {
        let config = small_config();
        let format = CString::new("csv").unwrap();
        for correlated in [true, false] {
            let mut report: *mut c_char = ptr::null_mut();
            assert_eq!(
                wavetap_run_llr_hist(config, correlated, format.as_ptr(), &mut report),
                WavetapStatus::Ok
            );
            let text = consume(report);
            let flag = if correlated { ",true," } else { ",false," };
            assert!(text.lines().nth(1).unwrap().contains(flag));
        }
        wavetap_config_free(config);
    }
}

#[test]
fn cov_check_reports_json_and_a_pass_flag() {
    unsafe {
        let config = small_config();
        let format = CString::new("json").unwrap();
        let mut report: *mut c_char = ptr::null_mut();
        let mut passed = false;
        assert_eq!(
            wavetap_run_cov_check(config, format.as_ptr(), &mut report, &mut passed),
            WavetapStatus::Ok
        );
        assert!(passed);
        let value: serde_json::Value = serde_json::from_str(&consume(report)).unwrap();
        assert_eq!(value["kind"], "cov-check");
        assert_eq!(value["rows"]["rows"].as_array().unwrap().len(), 2);
        assert_eq!(value["rows"]["passed"], true);
        wavetap_config_free(config);
    }
}

#[test]
fn probe_validation_runs_through_the_abi() {
    unsafe {
        let config = small_config();
        let format = CString::new("csv").unwrap();
        let mut report: *mut c_char = ptr::null_mut();
        let mut passed = false;
        assert_eq!(
            wavetap_run_probe_validation(config, format.as_ptr(), &mut report, &mut passed),
            WavetapStatus::Ok
        );
        let text = consume(report);
        assert!(passed, "validation failed:\n{text}");
        assert!(text.contains("calibration_converged,true"));
        wavetap_config_free(config);
    }
}

#[test]
fn scalar_helpers_match_frozen_reference_values() {
    unsafe {
        let mut gamma = 0.0;
        assert_eq!(
            wavetap_reflection_coefficient(1_000.0, 50.0, &mut gamma),
            WavetapStatus::Ok
        );
        assert!((gamma - 950.0 / 1050.0).abs() < 1e-15);
        assert_eq!(
            wavetap_reflection_coefficient(1_000.0, 0.0, &mut gamma),
            WavetapStatus::InvalidArgument
        );

        let (mut c_pp, mut c_pm, mut c_mm) = (0.0, 0.0, 0.0);
        assert_eq!(
            wavetap_wave_covariance(
                1_000.0, 10_000.0, 50.0, 0.1, &mut c_pp, &mut c_pm, &mut c_mm
            ),
            WavetapStatus::Ok
        );
        assert!((c_pp - 12.698692534756276).abs() / c_pp < 1e-12);
        assert!((c_pm - 12.57052733608532).abs() / c_pm < 1e-12);
        assert!((c_mm - 12.461866957887565).abs() / c_mm < 1e-12);
    }
}

#[test]
fn generated_header_declares_every_entry_point() {
    let header = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/wavetap.h"),
    )
    .expect("header is generated at build time");
    for symbol in [
        "wavetap_config_default",
        "wavetap_config_from_toml",
        "wavetap_config_set_seed",
        "wavetap_config_set_mode",
        "wavetap_config_set_trials",
        "wavetap_config_free",
        "wavetap_run_ber",
        "wavetap_run_llr_hist",
        "wavetap_run_probe_validation",
        "wavetap_run_cov_check",
        "wavetap_reflection_coefficient",
        "wavetap_wave_covariance",
        "wavetap_string_free",
        "wavetap_last_error_message",
        "WAVETAP_STATUS_OK",
        "WAVETAP_STATUS_INVALID_ARGUMENT",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}
