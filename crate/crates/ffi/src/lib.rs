//! C ABI for the gridmarl engine.
//!
//! Conventions:
//! - Handles (`GmrlConfig`, `GmrlRun`) are opaque; create/free in pairs.
//! - Every fallible call returns a `GmrlStatus`; on failure a thread-local
//!   message is readable via `gmrl_last_error_message` until the next call
//!   on the same thread.
//! - Strings returned as `char*` are owned by the caller and must be
//!   released with `gmrl_string_free`. `const char*` returns are borrowed.
//! - All entry points catch panics; a caught panic reports
//!   `GMRL_STATUS_INTERNAL` rather than unwinding across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use gridmarl::metrics::render_metrics_csv;
use gridmarl::orchestrator::{run_scenario, write_run_outputs, ScenarioConfig, ScenarioRun};

/// Result code for every fallible FFI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GmrlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed argument: bad UTF-8, unknown preset or agent type, index
    /// out of range.
    InvalidArgument = 2,
    /// The configuration does not validate against its map.
    BadConfig = 3,
    /// The map text failed to parse.
    MapError = 4,
    /// Filesystem failure while writing artifacts.
    IoError = 5,
    /// Internal failure (caught panic).
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: GmrlStatus, msg: impl std::fmt::Display) -> GmrlStatus {
    set_last_error(msg.to_string());
    status
}

/// Runs `body` with panic containment; panics surface as `Internal`.
fn guarded(body: impl FnOnce() -> GmrlStatus) -> GmrlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(GmrlStatus::Internal, "internal panic"),
    }
}

/// Borrows a C string argument as UTF-8.
///
/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, GmrlStatus> {
    if ptr.is_null() {
        return Err(fail(
            GmrlStatus::NullPointer,
            format!("{name} must not be null"),
        ));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(GmrlStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Opaque handle: a scenario configuration under construction.
pub struct GmrlConfig {
    inner: ScenarioConfig,
}

/// Opaque handle: a finished training run (metrics plus trained agents).
pub struct GmrlRun {
    inner: ScenarioRun,
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gmrl_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message for the most recent failure on this thread, or null if the last
/// call succeeded. Borrowed; valid until the next gmrl call on this thread.
#[no_mangle]
pub extern "C" fn gmrl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Creates a configuration from a scenario preset ("s1", "s2", "s3").
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_new_preset(
    name: *const c_char,
    out: *mut *mut GmrlConfig,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        if out.is_null() {
            return fail(GmrlStatus::NullPointer, "out must not be null");
        }
        let name = match unsafe { utf8_arg(name, "name") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ScenarioConfig::preset(name) {
            Some(cfg) => {
                unsafe { *out = Box::into_raw(Box::new(GmrlConfig { inner: cfg })) };
                GmrlStatus::Ok
            }
            None => fail(
                GmrlStatus::InvalidArgument,
                format!("unknown scenario preset {name:?}"),
            ),
        }
    })
}

/// Creates a configuration from raw map text.
///
/// `label` names the map in summaries; `n_agents` uses the first N spawn
/// markers. Hyperparameters start at library defaults; adjust via setters.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out` must be a
/// valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_new_map(
    map_text: *const c_char,
    label: *const c_char,
    n_agents: usize,
    episodes: usize,
    max_steps: u32,
    out: *mut *mut GmrlConfig,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        if out.is_null() {
            return fail(GmrlStatus::NullPointer, "out must not be null");
        }
        let map_text = match unsafe { utf8_arg(map_text, "map_text") } {
            Ok(s) => s.to_owned(),
            Err(status) => return status,
        };
        let label = match unsafe { utf8_arg(label, "label") } {
            Ok(s) => s.to_owned(),
            Err(status) => return status,
        };
        let cfg = ScenarioConfig {
            scenario: None,
            map_label: label,
            map_text,
            n_agents,
            episodes,
            max_steps,
            agent_type: gridmarl::coordination::AgentType::A1,
            range_radius: 2,
            seed: 0,
            agent: Default::default(),
            coordination: Default::default(),
            reward: Default::default(),
        };
        if let Err(e) = cfg.load_map() {
            return fail(GmrlStatus::BadConfig, e);
        }
        unsafe { *out = Box::into_raw(Box::new(GmrlConfig { inner: cfg })) };
        GmrlStatus::Ok
    })
}

/// Releases a configuration handle. Null is a no-op.
///
/// # Safety
/// `cfg` must be null or a pointer previously returned by a constructor and
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_free(cfg: *mut GmrlConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

unsafe fn config_mut<'a>(cfg: *mut GmrlConfig) -> Result<&'a mut ScenarioConfig, GmrlStatus> {
    if cfg.is_null() {
        return Err(fail(GmrlStatus::NullPointer, "cfg must not be null"));
    }
    Ok(unsafe { &mut (*cfg).inner })
}

/// Sets the agent type ("A1".."A5").
///
/// # Safety
/// `cfg` must be a live configuration handle; `name` a valid string.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_set_agent_type(
    cfg: *mut GmrlConfig,
    name: *const c_char,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        let cfg = match unsafe { config_mut(cfg) } {
            Ok(c) => c,
            Err(status) => return status,
        };
        let name = match unsafe { utf8_arg(name, "name") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match name.parse() {
            Ok(at) => {
                cfg.agent_type = at;
                GmrlStatus::Ok
            }
            Err(_) => fail(
                GmrlStatus::InvalidArgument,
                format!("unknown agent type {name:?} (expected A1..A5)"),
            ),
        }
    })
}

/// Sets the master seed.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_set_seed(cfg: *mut GmrlConfig, seed: u64) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        match unsafe { config_mut(cfg) } {
            Ok(c) => {
                c.seed = seed;
                GmrlStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Sets the episode count E.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_set_episodes(
    cfg: *mut GmrlConfig,
    episodes: usize,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        match unsafe { config_mut(cfg) } {
            Ok(c) => {
                c.episodes = episodes;
                GmrlStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Sets the per-episode step budget T.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_set_max_steps(
    cfg: *mut GmrlConfig,
    max_steps: u32,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        match unsafe { config_mut(cfg) } {
            Ok(c) => {
                c.max_steps = max_steps;
                GmrlStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Sets the merge dampening factor alpha (must lie in [0, 1] at train time).
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_set_alpha(cfg: *mut GmrlConfig, alpha: f64) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        match unsafe { config_mut(cfg) } {
            Ok(c) => {
                c.coordination.alpha = alpha;
                GmrlStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Sets the observation range c (Chebyshev radius, at least 1).
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn gmrl_config_set_range(cfg: *mut GmrlConfig, range: u32) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        match unsafe { config_mut(cfg) } {
            Ok(c) => {
                c.range_radius = range;
                GmrlStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Trains the configured scenario to completion and returns a run handle.
/// Blocking; cost is proportional to E x T x agents.
///
/// # Safety
/// `cfg` must be a live configuration handle; `out` must be a valid pointer
/// to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn gmrl_train(
    cfg: *const GmrlConfig,
    out: *mut *mut GmrlRun,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        if out.is_null() {
            return fail(GmrlStatus::NullPointer, "out must not be null");
        }
        if cfg.is_null() {
            return fail(GmrlStatus::NullPointer, "cfg must not be null");
        }
        let cfg = unsafe { &(*cfg).inner };
        match run_scenario(cfg) {
            Ok(run) => {
                unsafe { *out = Box::into_raw(Box::new(GmrlRun { inner: run })) };
                GmrlStatus::Ok
            }
            Err(e) => {
                use gridmarl::orchestrator::OrchestratorError as OE;
                let status = match &e {
                    OE::Map(_) => GmrlStatus::MapError,
                    OE::BadConfig(_) => GmrlStatus::BadConfig,
                    OE::Io(_) => GmrlStatus::IoError,
                    _ => GmrlStatus::Internal,
                };
                fail(status, e)
            }
        }
    })
}

/// Releases a run handle. Null is a no-op.
///
/// # Safety
/// `run` must be null or a pointer previously returned by `gmrl_train` and
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gmrl_run_free(run: *mut GmrlRun) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}

unsafe fn run_ref<'a>(run: *const GmrlRun) -> Result<&'a ScenarioRun, GmrlStatus> {
    if run.is_null() {
        return Err(fail(GmrlStatus::NullPointer, "run must not be null"));
    }
    Ok(unsafe { &(*run).inner })
}

/// Number of episodes recorded by the run.
///
/// # Safety
/// `run` must be null or a live run handle (null yields 0).
#[no_mangle]
pub unsafe extern "C" fn gmrl_run_episode_count(run: *const GmrlRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { &(*run).inner }.result.n_episodes()
}

/// Number of agents in the run.
///
/// # Safety
/// `run` must be null or a live run handle (null yields 0).
#[no_mangle]
pub unsafe extern "C" fn gmrl_run_agent_count(run: *const GmrlRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { &(*run).inner }.result.n_agents()
}

/// Fraction of episodes in which every agent reached its goal.
///
/// # Safety
/// `run` must be a live run handle; `out_rate` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gmrl_run_system_success_rate(
    run: *const GmrlRun,
    out_rate: *mut f64,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        if out_rate.is_null() {
            return fail(GmrlStatus::NullPointer, "out_rate must not be null");
        }
        match unsafe { run_ref(run) } {
            Ok(r) => {
                unsafe { *out_rate = r.result.system_success_rate() };
                GmrlStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Per-agent success rate across the run's episodes.
///
/// # Safety
/// `run` must be a live run handle; `out_rate` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gmrl_run_agent_success_rate(
    run: *const GmrlRun,
    agent: usize,
    out_rate: *mut f64,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        if out_rate.is_null() {
            return fail(GmrlStatus::NullPointer, "out_rate must not be null");
        }
        let r = match unsafe { run_ref(run) } {
            Ok(r) => r,
            Err(status) => return status,
        };
        if agent >= r.result.n_agents() {
            return fail(
                GmrlStatus::InvalidArgument,
                format!("agent {agent} out of range ({} agents)", r.result.n_agents()),
            );
        }
        unsafe { *out_rate = r.result.agent_success_rate(agent) };
        GmrlStatus::Ok
    })
}

/// Smoothed system reward at the final episode (trailing moving average).
///
/// # Safety
/// `run` must be a live run handle; `out_reward` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gmrl_run_final_smoothed_reward(
    run: *const GmrlRun,
    out_reward: *mut f64,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        if out_reward.is_null() {
            return fail(GmrlStatus::NullPointer, "out_reward must not be null");
        }
        match unsafe { run_ref(run) } {
            Ok(r) => {
                let smoothed = r.result.smoothed_system_reward();
                unsafe { *out_reward = smoothed.last().copied().unwrap_or(f64::NAN) };
                GmrlStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Renders the run's metrics as CSV. The returned string is owned by the
/// caller; release it with `gmrl_string_free`.
///
/// # Safety
/// `run` must be a live run handle; `out_csv` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gmrl_run_metrics_csv(
    run: *const GmrlRun,
    out_csv: *mut *mut c_char,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        if out_csv.is_null() {
            return fail(GmrlStatus::NullPointer, "out_csv must not be null");
        }
        let r = match unsafe { run_ref(run) } {
            Ok(r) => r,
            Err(status) => return status,
        };
        let csv = render_metrics_csv(&r.result);
        match CString::new(csv) {
            Ok(c) => {
                unsafe { *out_csv = c.into_raw() };
                GmrlStatus::Ok
            }
            Err(_) => fail(GmrlStatus::Internal, "CSV contained an interior NUL"),
        }
    })
}

/// Writes metrics.csv, summary.json, and per-agent checkpoints into `dir`
/// (created if absent).
///
/// # Safety
/// `run` must be a live run handle; `dir` a valid NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn gmrl_run_write_outputs(
    run: *const GmrlRun,
    dir: *const c_char,
) -> GmrlStatus {
    guarded(|| {
        clear_last_error();
        let r = match unsafe { run_ref(run) } {
            Ok(r) => r,
            Err(status) => return status,
        };
        let dir = match unsafe { utf8_arg(dir, "dir") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match write_run_outputs(Path::new(dir), r) {
            Ok(_) => GmrlStatus::Ok,
            Err(e) => fail(GmrlStatus::IoError, e),
        }
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a pointer previously returned by a gmrl call that
/// documents `gmrl_string_free`, and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gmrl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    const TINY_MAP: &str = "@assign a=0\na....\n.....\n.....\n.....\n....0\n";

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        let ptr = gmrl_last_error_message();
        assert!(!ptr.is_null(), "an error message was recorded");
        unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_owned()
    }

    /// Builds a tiny custom-map config ready for a fast train call.
    fn tiny_config() -> *mut GmrlConfig {
        let map = cstr(TINY_MAP);
        let label = cstr("tiny");
        let mut cfg: *mut GmrlConfig = ptr::null_mut();
        let status =
            unsafe { gmrl_config_new_map(map.as_ptr(), label.as_ptr(), 1, 3, 5, &mut cfg) };
        assert_eq!(status, GmrlStatus::Ok);
        assert!(!cfg.is_null());
        cfg
    }

    #[test]
    fn version_is_a_static_string() {
        let v = unsafe { CStr::from_ptr(gmrl_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn preset_constructor_accepts_known_names_only() {
        let mut cfg: *mut GmrlConfig = ptr::null_mut();
        let ok = unsafe { gmrl_config_new_preset(cstr("s1").as_ptr(), &mut cfg) };
        assert_eq!(ok, GmrlStatus::Ok);
        unsafe { gmrl_config_free(cfg) };

        let mut cfg2: *mut GmrlConfig = ptr::null_mut();
        let bad = unsafe { gmrl_config_new_preset(cstr("s9").as_ptr(), &mut cfg2) };
        assert_eq!(bad, GmrlStatus::InvalidArgument);
        assert!(cfg2.is_null());
        assert!(last_error().contains("s9"));
    }

    #[test]
    fn null_arguments_are_rejected_not_dereferenced() {
        let mut cfg: *mut GmrlConfig = ptr::null_mut();
        assert_eq!(
            unsafe { gmrl_config_new_preset(ptr::null(), &mut cfg) },
            GmrlStatus::NullPointer
        );
        assert_eq!(
            unsafe { gmrl_config_new_preset(cstr("s1").as_ptr(), ptr::null_mut()) },
            GmrlStatus::NullPointer
        );
        assert_eq!(
            unsafe { gmrl_config_set_seed(ptr::null_mut(), 1) },
            GmrlStatus::NullPointer
        );
        let mut run: *mut GmrlRun = ptr::null_mut();
        assert_eq!(
            unsafe { gmrl_train(ptr::null(), &mut run) },
            GmrlStatus::NullPointer
        );
        // Free functions tolerate null.
        unsafe {
            gmrl_config_free(ptr::null_mut());
            gmrl_run_free(ptr::null_mut());
            gmrl_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn bad_map_text_reports_map_error_class() {
        let map = cstr("@assign a=0\na..\n....0\n"); // ragged rows
        let label = cstr("bad");
        let mut cfg: *mut GmrlConfig = ptr::null_mut();
        let status =
            unsafe { gmrl_config_new_map(map.as_ptr(), label.as_ptr(), 1, 1, 1, &mut cfg) };
        assert_eq!(status, GmrlStatus::BadConfig);
        assert!(cfg.is_null());
        assert!(!last_error().is_empty());
    }

    #[test]
    fn setters_validate_inputs() {
        let cfg = tiny_config();
        assert_eq!(
            unsafe { gmrl_config_set_agent_type(cfg, cstr("A5").as_ptr()) },
            GmrlStatus::Ok
        );
        assert_eq!(
            unsafe { gmrl_config_set_agent_type(cfg, cstr("A9").as_ptr()) },
            GmrlStatus::InvalidArgument
        );
        assert_eq!(unsafe { gmrl_config_set_seed(cfg, 7) }, GmrlStatus::Ok);
        assert_eq!(unsafe { gmrl_config_set_alpha(cfg, 0.25) }, GmrlStatus::Ok);
        assert_eq!(unsafe { gmrl_config_set_range(cfg, 3) }, GmrlStatus::Ok);
        unsafe { gmrl_config_free(cfg) };
    }

    #[test]
    fn train_query_write_roundtrip() {
        let cfg = tiny_config();
        unsafe {
            assert_eq!(gmrl_config_set_seed(cfg, 5), GmrlStatus::Ok);
        }
        let mut run: *mut GmrlRun = ptr::null_mut();
        assert_eq!(unsafe { gmrl_train(cfg, &mut run) }, GmrlStatus::Ok);
        assert!(!run.is_null());

        assert_eq!(unsafe { gmrl_run_episode_count(run) }, 3);
        assert_eq!(unsafe { gmrl_run_agent_count(run) }, 1);

        let mut rate = f64::NAN;
        assert_eq!(
            unsafe { gmrl_run_system_success_rate(run, &mut rate) },
            GmrlStatus::Ok
        );
        assert!((0.0..=1.0).contains(&rate));

        let mut agent_rate = f64::NAN;
        assert_eq!(
            unsafe { gmrl_run_agent_success_rate(run, 0, &mut agent_rate) },
            GmrlStatus::Ok
        );
        assert!((0.0..=1.0).contains(&agent_rate));
        assert_eq!(
            unsafe { gmrl_run_agent_success_rate(run, 9, &mut agent_rate) },
            GmrlStatus::InvalidArgument
        );

        let mut reward = f64::NAN;
        assert_eq!(
            unsafe { gmrl_run_final_smoothed_reward(run, &mut reward) },
            GmrlStatus::Ok
        );
        assert!(reward.is_finite());

        let mut csv: *mut c_char = ptr::null_mut();
        assert_eq!(unsafe { gmrl_run_metrics_csv(run, &mut csv) }, GmrlStatus::Ok);
        let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_owned();
        assert!(text.starts_with(
            "episode,agent_id,success,steps_to_goal,episodic_reward,smoothed_system_reward"
        ));
        assert_eq!(text.lines().count(), 1 + 3, "header plus one row per episode");
        unsafe { gmrl_string_free(csv) };

        let dir = tempfile::tempdir().unwrap();
        let out_dir = cstr(dir.path().join("ffi_out").to_str().unwrap());
        assert_eq!(
            unsafe { gmrl_run_write_outputs(run, out_dir.as_ptr()) },
            GmrlStatus::Ok
        );
        assert!(dir.path().join("ffi_out/metrics.csv").is_file());
        assert!(dir.path().join("ffi_out/summary.json").is_file());
        assert!(dir.path().join("ffi_out/agent0_actor.gmrl").is_file());

        unsafe {
            gmrl_run_free(run);
            gmrl_config_free(cfg);
        }
    }

    #[test]
    fn train_rejects_invalid_config_with_bad_config_status() {
        let cfg = tiny_config();
        unsafe {
            // Zero range is invalid at train time.
            assert_eq!(gmrl_config_set_range(cfg, 0), GmrlStatus::Ok);
        }
        let mut run: *mut GmrlRun = ptr::null_mut();
        assert_eq!(unsafe { gmrl_train(cfg, &mut run) }, GmrlStatus::BadConfig);
        assert!(run.is_null());
        assert!(last_error().contains("range"));
        unsafe { gmrl_config_free(cfg) };
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/include/gridmarl.h"
        ))
        .expect("cbindgen header generated at build time");
        for symbol in [
            "GmrlStatus",
            "GmrlConfig",
            "GmrlRun",
            "gmrl_config_new_preset",
            "gmrl_config_new_map",
            "gmrl_train",
            "gmrl_run_metrics_csv",
            "gmrl_run_write_outputs",
            "gmrl_last_error_message",
            "gmrl_string_free",
        ] {
            assert!(header.contains(symbol), "header mentions {symbol}");
        }
    }
}
