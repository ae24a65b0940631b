//! C ABI over `causal_cert`.
//!
//! Every function returns a [`CcStatus`]. On failure the message is kept in
//! thread-local storage and read back with [`cc_last_error_message`].
//! Processes are opaque [`CcProcess`] handles released with [`cc_process_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use causal_cert::certify::{reference_bell_correlations, switch_family_system, threshold_search, BellFunctional};
use causal_cert::error::Error;
use causal_cert::process::manifest::load_process;
use causal_cert::process::{build_quantum_switch, depolarize, validate_process_matrix, ProcessMatrix};
use causal_cert::sdp::{solve_feasibility, SolveOptions, SolveStatus};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    Precondition = 6,
    NoCertificate = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CcSeparability {
    Feasible = 0,
    InfeasibleWithCertificate = 1,
    Undecided = 2,
}

/// Opaque process matrix.
pub struct CcProcess {
    inner: ProcessMatrix,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CcValidity {
    pub valid: bool,
    pub trace: f64,
    pub expected_trace: f64,
    pub min_eigenvalue: f64,
    pub hermitian_deviation: f64,
    pub subspace_residual: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CcInterval {
    pub lo: f64,
    pub hi: f64,
    /// Normalized margin of the infeasibility certificate at `lo`.
    pub lo_certificate_margin: f64,
    /// Constraint residual of the feasible decomposition at `hi`.
    pub hi_residual: f64,
    /// Set when a bound had to be moved to bracket the threshold.
    pub widened: bool,
    pub probes: usize,
}

/// Solver settings; pass null for the defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CcSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub alpha: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CcStatus {
    match e {
        Error::Io(_) => CcStatus::Io,
        Error::Parse(_) | Error::Json(_) => CcStatus::Parse,
        Error::Shape(_) | Error::DimensionMismatch { .. } | Error::LabelCollision(_) | Error::UnknownLabel(_) => CcStatus::Shape,
        Error::Precondition(_) => CcStatus::Precondition,
        Error::NoCertificate(_) => CcStatus::NoCertificate,
        Error::InvalidArgument(_) | Error::NotHermitian(_) | Error::ZeroHeralding(_) => CcStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (CcStatus, String)>) -> CcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CcStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CcStatus::Internal
        }
    }
}

fn lib<T>(r: causal_cert::error::Result<T>) -> Result<T, (CcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (CcStatus, String) {
    (CcStatus::NullPointer, format!("{} is null", what))
}

fn options(opts: *const CcSolveOptions) -> SolveOptions {
    match unsafe { opts.as_ref() } {
        Some(o) => SolveOptions {
            tol: o.tol,
            max_iter: o.max_iter,
            alpha: o.alpha,
            ..SolveOptions::default()
        },
        None => SolveOptions::default(),
    }
}

fn check_options(o: &SolveOptions) -> Result<(), (CcStatus, String)> {
    if !(o.tol > 0.0) || o.max_iter == 0 || !(o.alpha > 0.0 && o.alpha < 2.0) {
        return Err((CcStatus::InvalidArgument, "tol and max_iter must be positive, alpha in (0, 2)".into()));
    }
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// The quantum switch mixed with white-noise weight `r >= 0`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cc_process_switch(r: f64, out: *mut *mut CcProcess) -> CcStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let w = lib(build_quantum_switch().and_then(|w| depolarize(&w, r)))?;
        *out = Box::into_raw(Box::new(CcProcess { inner: w }));
        Ok(())
    })
}

/// Loads a process manifest (JSON with a matrix file next to it).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_process_load(path: *const c_char, out: *mut *mut CcProcess) -> CcStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| (CcStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let w = lib(load_process(path))?;
        *out = Box::into_raw(Box::new(CcProcess { inner: w }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cc_process_free(p: *mut CcProcess) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Number of parties and total matrix dimension.
///
/// # Safety
/// `p` must be a live handle; `parties` and `dim` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_process_shape(p: *const CcProcess, parties: *mut usize, dim: *mut usize) -> CcStatus {
    guard(|| {
        let p = unsafe { p.as_ref() }.ok_or_else(|| null("process"))?;
        let parties = unsafe { parties.as_mut() }.ok_or_else(|| null("parties"))?;
        let dim = unsafe { dim.as_mut() }.ok_or_else(|| null("dim"))?;
        *parties = p.inner.parties().len();
        *dim = p.inner.op().dim();
        Ok(())
    })
}

/// Validity report of a process matrix.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_process_validate(p: *const CcProcess, out: *mut CcValidity) -> CcStatus {
    guard(|| {
        let p = unsafe { p.as_ref() }.ok_or_else(|| null("process"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let rep = lib(validate_process_matrix(&p.inner))?;
        *out = CcValidity {
            valid: rep.valid,
            trace: rep.trace,
            expected_trace: rep.expected_trace,
            min_eigenvalue: rep.min_eigenvalue,
            hermitian_deviation: rep.hermitian_deviation,
            subspace_residual: rep.subspace_residual,
        };
        Ok(())
    })
}

/// Brackets the switch-family noise threshold by bisection on `[lo, hi]`.
///
/// # Safety
/// `opts` may be null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_switch_threshold(lo: f64, hi: f64, tol: f64, opts: *const CcSolveOptions, out: *mut CcInterval) -> CcStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let o = options(opts);
        check_options(&o)?;
        let iv = lib(threshold_search(switch_family_system, lo, hi, tol, &o))?;
        *out = CcInterval {
            lo: iv.lo,
            hi: iv.hi,
            lo_certificate_margin: iv.lo_certificate_margin,
            hi_residual: iv.hi_residual,
            widened: iv.widened,
            probes: iv.probes.len(),
        };
        Ok(())
    })
}

/// Separability verdict for the switch family at noise `r` under the
/// four-party definition with a quantum input for the first party.
/// `evidence` receives the certificate margin or the primal residual.
///
/// # Safety
/// `opts` may be null; `verdict` and `evidence` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_check_sep_switch(r: f64, opts: *const CcSolveOptions, verdict: *mut CcSeparability, evidence: *mut f64) -> CcStatus {
    guard(|| {
        let verdict = unsafe { verdict.as_mut() }.ok_or_else(|| null("verdict"))?;
        let evidence = unsafe { evidence.as_mut() }.ok_or_else(|| null("evidence"))?;
        let o = options(opts);
        check_options(&o)?;
        let program = lib(switch_family_system(r).and_then(|s| s.to_program()))?;
        let rep = lib(solve_feasibility(&program, &o))?;
        *verdict = match rep.status {
            SolveStatus::Feasible => CcSeparability::Feasible,
            SolveStatus::InfeasibleWithCertificate => CcSeparability::InfeasibleWithCertificate,
            SolveStatus::Undecided => CcSeparability::Undecided,
        };
        *evidence = rep.certificate.map(|c| c.margin).unwrap_or(rep.primal_residual);
        Ok(())
    })
}

/// Extended CHSH value of the reference realization and the local bound.
///
/// # Safety
/// `value` must be writable; `local_bound` may be null.
#[no_mangle]
pub unsafe extern "C" fn cc_extended_chsh_reference(value: *mut f64, local_bound: *mut f64) -> CcStatus {
    guard(|| {
        let value = unsafe { value.as_mut() }.ok_or_else(|| null("value"))?;
        let f = BellFunctional::extended_chsh();
        *value = lib(reference_bell_correlations().and_then(|p| f.value(&p)))?;
        if let Some(b) = unsafe { local_bound.as_mut() } {
            *b = f.best_deterministic_value();
        }
        Ok(())
    })
}
