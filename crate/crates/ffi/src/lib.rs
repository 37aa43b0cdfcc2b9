//! C interface to `hma-core`.
//!
//! Problems and solutions are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns an
//! [`HmaStatus`]; on failure the message is available from
//! [`hma_last_error_message`] on the same thread until the next failing call.
//! Nonzero status values equal the exit codes of the `hma` binary where the
//! error classes overlap.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hma_core::app::{diagnose_solution, parse_checks, solve_problem, CliError, ErrorClass, Problem, SolveOutcome};
use hma_core::gauduchon::solve_gauduchon;
use hma_core::scenario::Scenario;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmaStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Solver = 3,
    Io = 4,
    Check = 5,
    Gauduchon = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

impl From<ErrorClass> for HmaStatus {
    fn from(c: ErrorClass) -> Self {
        match c {
            ErrorClass::Config => HmaStatus::Config,
            ErrorClass::Solver => HmaStatus::Solver,
            ErrorClass::Io => HmaStatus::Io,
            ErrorClass::Check => HmaStatus::Check,
            ErrorClass::Gauduchon => HmaStatus::Gauduchon,
        }
    }
}

/// A validated scenario: grid, metric and right-hand side.
pub struct HmaProblem {
    inner: Problem,
}

/// A converged solve of an [`HmaProblem`].
pub struct HmaSolution {
    inner: SolveOutcome,
}

/// Scalar results of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HmaSolveStats {
    pub b: f64,
    pub final_residual: f64,
    pub newton_iters: usize,
    pub krylov_iters_total: usize,
    pub min_eigenvalue: f64,
    pub phi_sup: f64,
    pub phi_inf: f64,
    pub point_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(HmaStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure(e.class.into(), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HmaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HmaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(HmaStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HmaStatus::Config, format!("{what} is not valid UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn tol_arg(tol: f64) -> Option<f64> {
    (tol > 0.0).then_some(tol)
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hma_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates a scenario from TOML text.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hma_problem_from_toml(toml: *const c_char, out: *mut *mut HmaProblem) -> HmaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let scenario = Scenario::from_toml_str(text(toml, "toml")?).map_err(CliError::from)?;
        let inner = Problem::from_scenario(scenario)?;
        *out = Box::into_raw(Box::new(HmaProblem { inner }));
        Ok(())
    })
}

/// Reads a scenario file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hma_problem_load(path: *const c_char, out: *mut *mut HmaProblem) -> HmaStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = Problem::load(Path::new(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(HmaProblem { inner }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from `hma_problem_*` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hma_problem_free(problem: *mut HmaProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Complex dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hma_problem_dimension(problem: *const HmaProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.grid.n())
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hma_problem_point_count(problem: *const HmaProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.grid.point_count())
}

/// Solves the problem. `tol <= 0` keeps the scenario's residual target.
///
/// # Safety
/// `problem` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hma_solve(problem: *const HmaProblem, tol: f64, out: *mut *mut HmaSolution) -> HmaStatus {
    guard(|| {
        let problem = deref(problem, "problem")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = solve_problem(&problem.inner, tol_arg(tol))?;
        *out = Box::into_raw(Box::new(HmaSolution { inner }));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from `hma_solve` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hma_solution_free(solution: *mut HmaSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hma_solution_stats(solution: *const HmaSolution, out: *mut HmaSolveStats) -> HmaStatus {
    guard(|| {
        let s = &deref(solution, "solution")?.inner;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = HmaSolveStats {
            b: s.summary.b,
            final_residual: s.summary.final_residual,
            newton_iters: s.summary.newton_iters,
            krylov_iters_total: s.summary.krylov_iters_total,
            min_eigenvalue: s.summary.min_eigenvalue,
            phi_sup: s.summary.phi_sup,
            phi_inf: s.summary.phi_inf,
            point_count: s.report.phi.values().len(),
        };
        Ok(())
    })
}

/// Copies `φ` in row-major grid order into `buf`, which must hold
/// `point_count` values.
///
/// # Safety
/// `solution` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hma_solution_phi(solution: *const HmaSolution, buf: *mut f64, len: usize) -> HmaStatus {
    guard(|| {
        let values = deref(solution, "solution")?.inner.report.phi.values();
        copy_out(values, buf, len)
    })
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < values.len() {
        return Err(Failure(
            HmaStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Runs estimate checks and returns one JSON record per line in `*json_out`,
/// to be released with [`hma_string_free`]. `checks` is a comma-separated
/// filter, or null for all checks. Returns `HMA_STATUS_CHECK` when a
/// theorem-backed check fails; the report is still written.
///
/// # Safety
/// Handles must be live, `checks` null or nul-terminated, `json_out` writable.
#[no_mangle]
pub unsafe extern "C" fn hma_diagnose(
    problem: *const HmaProblem,
    solution: *const HmaSolution,
    checks: *const c_char,
    json_out: *mut *mut c_char,
) -> HmaStatus {
    guard(|| {
        let problem = &deref(problem, "problem")?.inner;
        let solution = &deref(solution, "solution")?.inner;
        let json_out = json_out.as_mut().ok_or_else(|| null("json_out"))?;
        let filter = if checks.is_null() { None } else { Some(text(checks, "checks")?) };
        let names = parse_checks(filter)?;
        let report = diagnose_solution(problem, &solution.report.phi, solution.report.b, &names)?;
        *json_out = CString::new(report.to_json_lines())
            .expect("json has no nul")
            .into_raw();
        let failed: Vec<_> = report.failed().iter().map(|c| c.name.clone()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure(HmaStatus::Check, format!("failed checks: {}", failed.join(", "))))
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hma_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Computes the Gauduchon conformal factor `u` (with `sup u = 0`) of the
/// problem's metric into `buf`. `tol <= 0` uses the scenario default.
///
/// # Safety
/// `problem` must be a live handle, `buf` must point to `len` writable doubles,
/// `residual_out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn hma_gauduchon(
    problem: *const HmaProblem,
    tol: f64,
    buf: *mut f64,
    len: usize,
    residual_out: *mut f64,
) -> HmaStatus {
    guard(|| {
        let problem = &deref(problem, "problem")?.inner;
        let tol = tol_arg(tol).unwrap_or(problem.scenario.diagnostics.gauduchon_tol);
        let res = solve_gauduchon(&problem.metric, tol).map_err(CliError::from)?;
        copy_out(res.u.values(), buf, len)?;
        if let Some(r) = residual_out.as_mut() {
            *r = res.residual;
        }
        Ok(())
    })
}
