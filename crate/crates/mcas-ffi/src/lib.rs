//! C ABI over the mcas experiment harness.
//!
//! All functions are unwind-safe at the boundary: a panic is caught and
//! reported as `MCAS_ERR_INTERNAL`. Errors set a thread-local message
//! retrievable with `mcas_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use mcas::config::ExperimentConfig;
use mcas::error::McasError;

/// Status codes returned by every fallible entry point.
#[repr(C)]
pub enum McasStatus {
    Ok = 0,
    /// Runtime failure (solver blow-up, I/O, non-convergence).
    Runtime = 1,
    /// Invalid configuration or unparsable input.
    Config = 2,
    /// Null pointer or malformed string argument.
    Argument = 3,
    /// Caught panic; a bug, not a user error.
    Internal = 4,
}

/// Opaque experiment configuration handle.
pub struct McasConfig {
    inner: ExperimentConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &McasError) -> McasStatus {
    match err.exit_code() {
        2 => McasStatus::Config,
        _ => McasStatus::Runtime,
    }
}

fn report(err: McasError) -> c_int {
    let code = status_of(&err) as c_int;
    set_error(&err.to_string());
    code
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error(&format!("{name} is null"));
        return Err(McasStatus::Argument as c_int);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        McasStatus::Argument as c_int
    })
}

fn guarded(f: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            McasStatus::Internal as c_int
        }
    }
}

/// Copy the most recent error message for this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length in
/// bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn mcas_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mcas_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a configuration with all defaults. Never fails.
#[no_mangle]
pub extern "C" fn mcas_config_new() -> *mut McasConfig {
    let inner = ExperimentConfig::from_toml_str("", &[]).expect("defaults are valid");
    Box::into_raw(Box::new(McasConfig { inner }))
}

/// Load a configuration from a TOML file. Returns null on failure; call
/// `mcas_last_error` for the reason.
#[no_mangle]
pub unsafe extern "C" fn mcas_config_load(path: *const c_char) -> *mut McasConfig {
    let mut out: *mut McasConfig = std::ptr::null_mut();
    guarded(|| {
        let path = match str_arg(path, "path") {
            Ok(s) => s,
            Err(code) => return code,
        };
        match ExperimentConfig::load(Path::new(path), &[]) {
            Ok(inner) => {
                out = Box::into_raw(Box::new(McasConfig { inner }));
                McasStatus::Ok as c_int
            }
            Err(e) => report(e),
        }
    });
    out
}

/// Apply a dotted-path override, e.g. `kinetics.alpha=3`.
#[no_mangle]
pub unsafe extern "C" fn mcas_config_override(
    cfg: *mut McasConfig,
    key_value: *const c_char,
) -> c_int {
    guarded(|| {
        if cfg.is_null() {
            set_error("cfg is null");
            return McasStatus::Argument as c_int;
        }
        let kv = match str_arg(key_value, "key_value") {
            Ok(s) => s.to_string(),
            Err(code) => return code,
        };
        let handle = &mut *cfg;
        match ExperimentConfig::from_toml_str(&handle.inner.to_toml(), &[kv]) {
            Ok(updated) => {
                handle.inner = updated;
                McasStatus::Ok as c_int
            }
            Err(e) => report(e),
        }
    })
}

/// Serialize the resolved configuration to TOML. The returned string must be
/// freed with `mcas_string_free`.
#[no_mangle]
pub unsafe extern "C" fn mcas_config_to_toml(cfg: *const McasConfig) -> *mut c_char {
    if cfg.is_null() {
        set_error("cfg is null");
        return std::ptr::null_mut();
    }
    let text = (*cfg).inner.to_toml();
    CString::new(text).map(CString::into_raw).unwrap_or(std::ptr::null_mut())
}

/// Free a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mcas_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub unsafe extern "C" fn mcas_config_free(cfg: *mut McasConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run the full experiment pipeline, writing artifacts into `out_dir`.
#[no_mangle]
pub unsafe extern "C" fn mcas_run_experiment(
    cfg: *const McasConfig,
    out_dir: *const c_char,
) -> c_int {
    guarded(|| {
        if cfg.is_null() {
            set_error("cfg is null");
            return McasStatus::Argument as c_int;
        }
        let out = match str_arg(out_dir, "out_dir") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        match mcas::harness::run_experiment(&(*cfg).inner, &out) {
            Ok(_) => McasStatus::Ok as c_int,
            Err(e) => report(e),
        }
    })
}

/// Run the alpha sweep defined by `kinetics.alpha_list`.
#[no_mangle]
pub unsafe extern "C" fn mcas_sweep(cfg: *const McasConfig, out_dir: *const c_char) -> c_int {
    guarded(|| {
        if cfg.is_null() {
            set_error("cfg is null");
            return McasStatus::Argument as c_int;
        }
        let out = match str_arg(out_dir, "out_dir") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let alphas = (*cfg).inner.kinetics.alpha_list.clone();
        match mcas::harness::sweep_alpha(&(*cfg).inner, &alphas, &out) {
            Ok(_) => McasStatus::Ok as c_int,
            Err(e) => report(e),
        }
    })
}
