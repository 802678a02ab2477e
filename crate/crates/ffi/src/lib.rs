//! C ABI for `crane-core`.
//!
//! Objects cross the boundary as opaque handles created by `crane_*_new` or
//! a computing function and released by the matching `crane_*_free`. Every
//! fallible function returns a [`CraneStatus`]; on failure the message is
//! available from [`crane_last_error_message`] on the same thread until the
//! next failing call. Panics are caught and reported as `CRANE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use crane_core::closed_loop::SimulationResult;
use crane_core::config::{load_config, RunConfig};
use crane_core::pipeline::{compute_kernels, run_pipeline, run_simulation, KernelStage};
use crane_core::CraneError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CraneStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an index out of range.
    InvalidArgument = 1,
    /// Configuration could not be read, parsed or validated.
    ConfigError = 2,
    /// A solver failed, diverged or met degenerate input.
    NumericalError = 3,
    /// Reading or writing files failed.
    IoError = 4,
    Panic = 5,
}

/// Run configuration.
pub struct CraneConfig(RunConfig);

/// Kernels and gains on the kernel grid.
pub struct CraneKernels(KernelStage);

/// Result of a closed-loop run.
pub struct CraneSimulation(SimulationResult);

/// One time sample of a simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CraneSample {
    pub t: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub xp: f64,
    pub u: f64,
    pub v: f64,
    /// `max(|alpha|, |beta|, |Xp|, |y|)` at this sample.
    pub magnitude: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &CraneError) -> CraneStatus {
    match e {
        CraneError::Io { .. } | CraneError::Csv(_) => CraneStatus::IoError,
        e if e.is_config_error() => CraneStatus::ConfigError,
        _ => CraneStatus::NumericalError,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (CraneStatus, String)>) -> CraneStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CraneStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside crane-core".into());
            CraneStatus::Panic
        }
    }
}

fn core_err(e: CraneError) -> (CraneStatus, String) {
    (status_of(&e), e.to_string())
}

fn invalid(message: &str) -> (CraneStatus, String) {
    (CraneStatus::InvalidArgument, message.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CraneStatus, String)> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, (CraneStatus, String)> {
    p.as_ref()
        .ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (CraneStatus, String)> {
    p.as_mut()
        .ok_or_else(|| invalid(&format!("{what} is null")))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn crane_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a configuration holding the default values.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn crane_config_new(out: *mut *mut CraneConfig) -> CraneStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(CraneConfig(RunConfig::default())));
        Ok(())
    })
}

/// Loads and validates a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crane_config_load(
    path: *const c_char,
    out: *mut *mut CraneConfig,
) -> CraneStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let cfg =
            load_config(Path::new(path)).map_err(|e| (CraneStatus::ConfigError, e.to_string()))?;
        *out = Box::into_raw(Box::new(CraneConfig(cfg)));
        Ok(())
    })
}

/// Sets one configuration key using the configuration-file syntax.
/// Validation happens when the configuration is used.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn crane_config_set(
    cfg: *mut CraneConfig,
    key: *const c_char,
    value: *const c_char,
) -> CraneStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        cfg.0
            .set(key, value)
            .map_err(|e| (CraneStatus::ConfigError, e.to_string()))
    })
}

/// Checks every validation rule, including the CFL condition.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn crane_config_validate(cfg: *const CraneConfig) -> CraneStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        cfg.0
            .validate()
            .map_err(|e| (CraneStatus::ConfigError, e.to_string()))
    })
}

/// # Safety
/// `cfg` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn crane_config_free(cfg: *mut CraneConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Computes the direct and inverse kernels and the feedback gains.
///
/// # Safety
/// `cfg` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crane_kernels_compute(
    cfg: *const CraneConfig,
    out: *mut *mut CraneKernels,
) -> CraneStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        cfg.0
            .validate()
            .map_err(|e| (CraneStatus::ConfigError, e.to_string()))?;
        let stage = compute_kernels(&cfg.0).map_err(core_err)?;
        *out = Box::into_raw(Box::new(CraneKernels(stage)));
        Ok(())
    })
}

/// Writes the constants `mu`, `a0` and `b0` of the control law.
///
/// # Safety
/// `k` must come from this library; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crane_kernels_constants(
    k: *const CraneKernels,
    mu: *mut f64,
    a0: *mut f64,
    b0: *mut f64,
) -> CraneStatus {
    guard(|| {
        let g = &ref_arg(k, "kernels")?.0.gains;
        *out_arg(mu, "mu")? = g.mu;
        *out_arg(a0, "a0")? = g.a0;
        *out_arg(b0, "b0")? = g.b0;
        Ok(())
    })
}

/// Number of grid nodes `n + 1` of the kernel grid.
///
/// # Safety
/// `k` must come from this library or be null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn crane_kernels_node_count(k: *const CraneKernels) -> usize {
    k.as_ref().map_or(0, |k| k.0.gains.grid.len())
}

/// Evaluates `L_field(x, xi)` for the inverse kernels (`inverse != 0`) or
/// the direct kernels, with `field` 0..3 in the order aa, ab, ba, bb.
/// Requires `0 <= xi <= x <= 1`.
///
/// # Safety
/// `k` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crane_kernels_value(
    k: *const CraneKernels,
    inverse: i32,
    field: u32,
    x: f64,
    xi: f64,
    out: *mut f64,
) -> CraneStatus {
    guard(|| {
        let stage = &ref_arg(k, "kernels")?.0;
        let out = out_arg(out, "out")?;
        if field > 3 {
            return Err(invalid("field must be 0..3"));
        }
        if !(0.0..=1.0).contains(&x) || !(0.0..=x).contains(&xi) {
            return Err(invalid("require 0 <= xi <= x <= 1"));
        }
        let set = if inverse != 0 { &stage.l } else { &stage.k };
        *out = set.fields[field as usize].at(x, xi);
        Ok(())
    })
}

/// Copies the gain profiles `a` and `b` into caller buffers of length
/// [`crane_kernels_node_count`].
///
/// # Safety
/// `k` must come from this library; `a` and `b` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn crane_kernels_gains(
    k: *const CraneKernels,
    a: *mut f64,
    b: *mut f64,
    len: usize,
) -> CraneStatus {
    guard(|| {
        let g = &ref_arg(k, "kernels")?.0.gains;
        if a.is_null() || b.is_null() {
            return Err(invalid("output buffer is null"));
        }
        if len != g.a.len() {
            return Err(invalid(&format!(
                "buffer length {len}, expected {}",
                g.a.len()
            )));
        }
        std::slice::from_raw_parts_mut(a, len).copy_from_slice(&g.a);
        std::slice::from_raw_parts_mut(b, len).copy_from_slice(&g.b);
        Ok(())
    })
}

/// # Safety
/// `k` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn crane_kernels_free(k: *mut CraneKernels) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Runs the closed loop with previously computed kernels.
///
/// # Safety
/// `cfg` and `k` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crane_simulate(
    cfg: *const CraneConfig,
    k: *const CraneKernels,
    out: *mut *mut CraneSimulation,
) -> CraneStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let stage = &ref_arg(k, "kernels")?.0;
        let out = out_arg(out, "out")?;
        cfg.0
            .validate()
            .map_err(|e| (CraneStatus::ConfigError, e.to_string()))?;
        if stage.gains.grid.n != cfg.0.kernel_n {
            return Err(invalid("kernels were computed for a different kernel_n"));
        }
        let result = run_simulation(&cfg.0, stage).map_err(core_err)?;
        *out = Box::into_raw(Box::new(CraneSimulation(result)));
        Ok(())
    })
}

/// Number of time samples, including `t = 0`.
///
/// # Safety
/// `sim` must come from this library or be null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn crane_simulation_len(sim: *const CraneSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.0.phi.len())
}

/// # Safety
/// `sim` must come from this library and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn crane_simulation_sample(
    sim: *const CraneSimulation,
    index: usize,
    out: *mut CraneSample,
) -> CraneStatus {
    guard(|| {
        let r = &ref_arg(sim, "simulation")?.0;
        let out = out_arg(out, "out")?;
        let s = r
            .phi
            .get(index)
            .ok_or_else(|| invalid("index out of range"))?;
        *out = CraneSample {
            t: s.t,
            phi: s.phi,
            phi_dot: s.phi_dot,
            xp: r.xp[index],
            u: r.u[index],
            v: r.v[index],
            magnitude: r.magnitude(index),
        };
        Ok(())
    })
}

/// Observed settling times. A flag of 0 means the run ended before the
/// state settled and the matching time is left untouched.
///
/// # Safety
/// `sim` must come from this library; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crane_simulation_settling(
    sim: *const CraneSimulation,
    t0: *mut f64,
    has_t0: *mut i32,
    t1: *mut f64,
    has_t1: *mut i32,
) -> CraneStatus {
    guard(|| {
        let s = ref_arg(sim, "simulation")?.0.settling;
        let (t0, has_t0) = (out_arg(t0, "t0")?, out_arg(has_t0, "has_t0")?);
        let (t1, has_t1) = (out_arg(t1, "t1")?, out_arg(has_t1, "has_t1")?);
        *has_t0 = i32::from(s.t0.is_some());
        *has_t1 = i32::from(s.t1.is_some());
        if let Some(v) = s.t0 {
            *t0 = v;
        }
        if let Some(v) = s.t1 {
            *t1 = v;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn crane_simulation_free(sim: *mut CraneSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Runs the full pipeline and writes every CSV artifact into `out_dir`.
///
/// # Safety
/// `cfg` must come from this library and `out_dir` be a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn crane_run_pipeline(
    cfg: *const CraneConfig,
    out_dir: *const c_char,
) -> CraneStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let dir = str_arg(out_dir, "out_dir")?;
        run_pipeline(&cfg.0, Path::new(dir)).map_err(core_err)?;
        Ok(())
    })
}
