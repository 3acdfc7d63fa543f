//! C ABI over the `lora-coexist` simulator.
//!
//! Handles are opaque pointers created by `lc_*_new`-style constructors and
//! released with the matching `lc_*_free`. Every fallible call returns an
//! [`LcStatus`]; the message of the last failure on the calling thread is
//! available through [`lc_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lora_coexist::config::{parse_config, ConfigError, Experiment};
use lora_coexist::{airtime_ms, der, Framing, RunLog, SimError, TransmitterSettings};

/// Result of an API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration or a parameter was rejected.
    Config = 3,
    /// The simulation detected an internal inconsistency.
    Invariant = 4,
    /// The requested metric is undefined, e.g. DER of a silent network.
    Undefined = 5,
    /// An index was out of range.
    OutOfRange = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// A parsed and validated experiment configuration.
pub struct LcScenario {
    experiment: Experiment,
}

/// Counters of a finished run.
pub struct LcRun {
    log: RunLog,
}

/// Message counters for one network.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LcNetworkStats {
    pub sent: u64,
    pub received: u64,
    pub lost_collision: u64,
    pub lost_no_slot: u64,
    pub lost_below_sensitivity: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: LcStatus, msg: impl Into<String>) -> LcStatus {
    set_error(msg);
    status
}

fn from_sim(e: SimError) -> LcStatus {
    let status = match &e {
        SimError::Invariant(_) => LcStatus::Invariant,
        SimError::UndefinedMetric(_) => LcStatus::Undefined,
        _ => LcStatus::Config,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> LcStatus) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(LcStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf`.
///
/// Returns the length the message needs including its terminating NUL, or 0
/// if there is no message. At most `len` bytes are written and the copy is
/// always NUL-terminated when `len > 0`.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: caller guarantees `len` writable bytes at `buf`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Parses a TOML configuration and validates every sweep point.
///
/// # Safety
/// `toml` must be null or a NUL-terminated string; `out` must be null or
/// point to writable storage for a pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_from_toml(toml: *const c_char, out: *mut *mut LcScenario) -> LcStatus {
    guard(|| {
        if toml.is_null() || out.is_null() {
            return fail(LcStatus::NullPointer, "null argument to lc_scenario_from_toml");
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let text = match unsafe { CStr::from_ptr(toml) }.to_str() {
            Ok(t) => t,
            Err(e) => return fail(LcStatus::InvalidUtf8, format!("configuration is not UTF-8: {e}")),
        };
        let experiment = match parse_config(text) {
            Ok(exp) => exp,
            Err(ConfigError::Invalid(e)) => return from_sim(e),
            Err(e) => return fail(LcStatus::Config, e.to_string()),
        };
        if let Err(e) = experiment.validate() {
            return from_sim(e);
        }
        let handle = Box::into_raw(Box::new(LcScenario { experiment }));
        // SAFETY: checked non-null.
        unsafe { *out = handle };
        LcStatus::Ok
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a handle from [`lc_scenario_from_toml`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_free(scenario: *mut LcScenario) {
    if !scenario.is_null() {
        // SAFETY: handle was created by Box::into_raw.
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Number of networks (measured plus interferers) in the base layout.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_network_count(scenario: *const LcScenario, out: *mut usize) -> LcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(s), false) = (unsafe { scenario.as_ref() }, out.is_null()) else {
            return fail(LcStatus::NullPointer, "null argument to lc_scenario_network_count");
        };
        // SAFETY: checked non-null.
        unsafe { *out = 1 + s.experiment.layout.interferer_count };
        LcStatus::Ok
    })
}

/// Configured simulated duration in milliseconds.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_duration_ms(scenario: *const LcScenario, out: *mut f64) -> LcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(s), false) = (unsafe { scenario.as_ref() }, out.is_null()) else {
            return fail(LcStatus::NullPointer, "null argument to lc_scenario_duration_ms");
        };
        // SAFETY: checked non-null.
        unsafe { *out = s.experiment.duration_ms };
        LcStatus::Ok
    })
}

/// Runs the base layout of `scenario` with `seed` for `duration_ms`.
///
/// A non-positive or non-finite duration selects the configured one.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_run(
    scenario: *const LcScenario,
    seed: u64,
    duration_ms: f64,
    out: *mut *mut LcRun,
) -> LcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(s), false) = (unsafe { scenario.as_ref() }, out.is_null()) else {
            return fail(LcStatus::NullPointer, "null argument to lc_run");
        };
        let duration = if duration_ms.is_finite() && duration_ms > 0.0 {
            duration_ms
        } else {
            s.experiment.duration_ms
        };
        let log = match s.experiment.scenario().and_then(|sc| lora_coexist::run(&sc, seed, duration)) {
            Ok(log) => log,
            Err(e) => return from_sim(e),
        };
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(LcRun { log })) };
        LcStatus::Ok
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must be null or a handle from [`lc_run`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn lc_run_free(run: *mut LcRun) {
    if !run.is_null() {
        // SAFETY: handle was created by Box::into_raw.
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Number of networks in a finished run; network 0 is the measured one.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_run_network_count(run: *const LcRun, out: *mut usize) -> LcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(r), false) = (unsafe { run.as_ref() }, out.is_null()) else {
            return fail(LcStatus::NullPointer, "null argument to lc_run_network_count");
        };
        // SAFETY: checked non-null.
        unsafe { *out = r.log.stats.len() };
        LcStatus::Ok
    })
}

/// Message counters of `network`.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_run_network_stats(
    run: *const LcRun,
    network: usize,
    out: *mut LcNetworkStats,
) -> LcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(r), false) = (unsafe { run.as_ref() }, out.is_null()) else {
            return fail(LcStatus::NullPointer, "null argument to lc_run_network_stats");
        };
        let Some(s) = r.log.stats.get(network) else {
            return fail(LcStatus::OutOfRange, format!("run has {} networks, not {}", r.log.stats.len(), network + 1));
        };
        // SAFETY: checked non-null.
        unsafe {
            *out = LcNetworkStats {
                sent: s.sent,
                received: s.received,
                lost_collision: s.lost_collision,
                lost_no_slot: s.lost_no_slot,
                lost_below_sensitivity: s.lost_below_sensitivity,
            }
        };
        LcStatus::Ok
    })
}

/// Data Extraction Rate of `network`.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_run_der(run: *const LcRun, network: usize, out: *mut f64) -> LcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(r), false) = (unsafe { run.as_ref() }, out.is_null()) else {
            return fail(LcStatus::NullPointer, "null argument to lc_run_der");
        };
        let Some(s) = r.log.stats.get(network) else {
            return fail(LcStatus::OutOfRange, format!("run has {} networks, not {}", r.log.stats.len(), network + 1));
        };
        match der(s) {
            Ok(v) => {
                // SAFETY: checked non-null.
                unsafe { *out = v };
                LcStatus::Ok
            }
            Err(e) => from_sim(e),
        }
    })
}

/// Time on air of one packet with explicit header, CRC and an 8-symbol preamble.
///
/// `cr` is the coding-rate offset 1..4 (4/5..4/8).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_airtime_ms(sf: u8, bw_hz: u32, cr: u8, payload_bytes: u32, out: *mut f64) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return fail(LcStatus::NullPointer, "null argument to lc_airtime_ms");
        }
        let settings = TransmitterSettings { sf, bw_hz, cr, payload_bytes, ..TransmitterSettings::most_robust() };
        if let Err(e) = settings.validate() {
            return from_sim(e);
        }
        match airtime_ms(&settings, &Framing::default()) {
            Ok(t) => {
                // SAFETY: checked non-null.
                unsafe { *out = t };
                LcStatus::Ok
            }
            Err(e) => from_sim(e),
        }
    })
}
