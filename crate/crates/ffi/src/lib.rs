//! C ABI over `wigner-core`.
//!
//! A solver is created from configuration text or a preset name, advanced in
//! whole time steps, and queried into caller-owned buffers. Every function
//! returns a [`WignerStatus`]; on failure the message is available from
//! [`wigner_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wigner_core::config::{preset, RunConfig};
use wigner_core::dynamics::{evolve, CoefficientField, Schedule};
use wigner_core::experiments::{prepare, Prepared};
use wigner_core::observables::{density, moments};
use wigner_core::{Error, ErrorKind};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WignerStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Invalid configuration or argument.
    Config = 3,
    /// CFL violation, non-finite field, failed solve.
    Numerical = 4,
    Io = 5,
    /// The output buffer is shorter than required.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Phase-space moments of the current field.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WignerMoments {
    pub time: f64,
    pub mass: f64,
    pub mean_x: f64,
    pub mean_v: f64,
    pub var_x: f64,
    pub var_v: f64,
    pub cov_xv: f64,
    pub uncertainty: f64,
    pub normalized_cov: f64,
    /// Nonzero when a variance vanished and `normalized_cov` was set to 0.
    pub degenerate: i32,
}

/// Opaque solver handle.
pub struct WignerSolver {
    prep: Prepared,
    field: CoefficientField,
    step: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> WignerStatus {
    match e.kind() {
        ErrorKind::Config => WignerStatus::Config,
        ErrorKind::Numerical => WignerStatus::Numerical,
        ErrorKind::Io => WignerStatus::Io,
    }
}

/// Runs `f`, recording errors and catching panics.
fn guard(f: impl FnOnce() -> Result<(), WignerStatus>) -> WignerStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            WignerStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside the solver");
            WignerStatus::Panic
        }
    }
}

fn lift<T>(r: wigner_core::Result<T>) -> Result<T, WignerStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, WignerStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(WignerStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        WignerStatus::InvalidUtf8
    })
}

unsafe fn solver_ref<'a>(s: *const WignerSolver) -> Result<&'a WignerSolver, WignerStatus> {
    s.as_ref().ok_or_else(|| {
        set_error("solver handle is null");
        WignerStatus::NullPointer
    })
}

unsafe fn solver_mut<'a>(s: *mut WignerSolver) -> Result<&'a mut WignerSolver, WignerStatus> {
    s.as_mut().ok_or_else(|| {
        set_error("solver handle is null");
        WignerStatus::NullPointer
    })
}

unsafe fn out_slice<'a>(
    buf: *mut f64,
    len: usize,
    needed: usize,
) -> Result<&'a mut [f64], WignerStatus> {
    if buf.is_null() {
        set_error("output buffer is null");
        return Err(WignerStatus::NullPointer);
    }
    if len < needed {
        set_error(format!("buffer holds {len} values, {needed} needed"));
        return Err(WignerStatus::BufferTooSmall);
    }
    Ok(std::slice::from_raw_parts_mut(buf, needed))
}

fn create(cfg: RunConfig, out: *mut *mut WignerSolver) -> Result<(), WignerStatus> {
    let prep = lift(prepare(&cfg))?;
    let field = prep.initial.clone();
    let solver = Box::new(WignerSolver {
        prep,
        field,
        step: 0,
    });
    unsafe { *out = Box::into_raw(solver) };
    Ok(())
}

fn check_out(out: *mut *mut WignerSolver) -> Result<(), WignerStatus> {
    if out.is_null() {
        set_error("output handle pointer is null");
        return Err(WignerStatus::NullPointer);
    }
    unsafe { *out = ptr::null_mut() };
    Ok(())
}

/// Creates a solver from TOML configuration text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_from_toml(
    toml: *const c_char,
    out: *mut *mut WignerSolver,
) -> WignerStatus {
    guard(|| {
        check_out(out)?;
        let text = read_str(toml, "configuration text")?;
        create(lift(RunConfig::from_toml(text))?, out)
    })
}

/// Creates a solver from a bundled preset such as `"harmonic"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_from_preset(
    name: *const c_char,
    out: *mut *mut WignerSolver,
) -> WignerStatus {
    guard(|| {
        check_out(out)?;
        let name = read_str(name, "preset name")?;
        create(lift(preset(name))?, out)
    })
}

/// Releases a solver; null is ignored.
///
/// # Safety
/// `solver` must come from a constructor here and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_free(solver: *mut WignerSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Advances the field by `n_steps` whole time steps.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_step(
    solver: *mut WignerSolver,
    n_steps: usize,
) -> WignerStatus {
    guard(|| {
        let s = solver_mut(solver)?;
        if n_steps == 0 {
            return Ok(());
        }
        let prep = &s.prep;
        let duration = n_steps as f64 * prep.plan.dt;
        let next = lift(evolve(
            &s.field,
            &prep.ops,
            &prep.plan,
            duration,
            &Schedule::default(),
            &mut [],
        ))?;
        s.field = next;
        s.step += n_steps;
        Ok(())
    })
}

/// Current time, number of grid points, basis size and time step.
///
/// # Safety
/// `solver` must be a live handle; null output pointers are skipped.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_info(
    solver: *const WignerSolver,
    time: *mut f64,
    nx: *mut usize,
    n_basis: *mut usize,
    dt: *mut f64,
) -> WignerStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        if let Some(p) = time.as_mut() {
            *p = s.step as f64 * s.prep.plan.dt;
        }
        if let Some(p) = nx.as_mut() {
            *p = s.prep.grid.nx;
        }
        if let Some(p) = n_basis.as_mut() {
            *p = s.prep.spec.n_basis;
        }
        if let Some(p) = dt.as_mut() {
            *p = s.prep.plan.dt;
        }
        Ok(())
    })
}

/// Writes the `nx` grid points.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_x_grid(
    solver: *const WignerSolver,
    buf: *mut f64,
    len: usize,
) -> WignerStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        let xs = s.prep.grid.points();
        out_slice(buf, len, xs.len())?.copy_from_slice(&xs);
        Ok(())
    })
}

/// Writes the probability density at the `nx` grid points.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_density(
    solver: *const WignerSolver,
    buf: *mut f64,
    len: usize,
) -> WignerStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        let rho = lift(density(&s.field, &s.prep.ops.basis_integrals))?;
        out_slice(buf, len, rho.len())?.copy_from_slice(&rho);
        Ok(())
    })
}

/// Writes the coefficients, point-major: `buf[j * n_basis + k] = a_k(x_j)`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_coefficients(
    solver: *const WignerSolver,
    buf: *mut f64,
    len: usize,
) -> WignerStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        let data = s.field.data();
        out_slice(buf, len, data.len())?.copy_from_slice(data);
        Ok(())
    })
}

/// Computes the phase-space moments of the current field.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wigner_solver_moments(
    solver: *const WignerSolver,
    out: *mut WignerMoments,
) -> WignerStatus {
    guard(|| {
        let s = solver_ref(solver)?;
        let out = out.as_mut().ok_or_else(|| {
            set_error("moments output is null");
            WignerStatus::NullPointer
        })?;
        let t = s.step as f64 * s.prep.plan.dt;
        let m = lift(moments(&s.field, &s.prep.ops, t))?;
        *out = WignerMoments {
            time: m.time,
            mass: m.mass,
            mean_x: m.mean_x,
            mean_v: m.mean_v,
            var_x: m.var_x,
            var_v: m.var_v,
            cov_xv: m.cov_xv,
            uncertainty: m.uncertainty,
            normalized_cov: m.normalized_cov,
            degenerate: m.degenerate as i32,
        };
        Ok(())
    })
}

/// Copies the last error message of this thread, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length without the NUL,
/// so a caller can retry with a larger buffer.
///
/// # Safety
/// `buf` must hold `len` bytes, or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn wigner_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
