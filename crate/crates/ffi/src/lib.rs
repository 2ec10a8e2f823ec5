//! C ABI over `sbspec-core`.
//!
//! Problems and corrector sets are opaque handles created by `*_new` and released
//! by `*_free`. Every call returns an [`SbspecStatus`]; on failure the message is
//! kept per thread and read with [`sbspec_last_error_message`]. Shapes are given
//! as polynomial coefficients `p` of `p(ξ)·b(ξ)` with the standard bump `b`.
//!
//! Array outputs use caller buffers: `out_len` always receives the full count, and
//! if `capacity` is smaller only the first `capacity` values are written and
//! `SBSPEC_STATUS_BUFFER_TOO_SMALL` is returned. Passing `capacity = 0` with a null
//! buffer queries the count.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sbspec_core::asymptotics::{assemble_quasimode, correctors_nonresonant, correctors_resonant, CorrectorSet};
use sbspec_core::harness::{dispatch, Dispatch};
use sbspec_core::limit::{limit_spectrum_nonresonant, limit_spectrum_resonant};
use sbspec_core::perturbed::{perturbed_eigenvalues, Eigenpair, SpectrumOptions};
use sbspec_core::resonance::{resonant_set, ResonanceOptions};
use sbspec_core::{Error, Problem, ShapeFunction};

/// |D(α)| below this selects the resonant limit.
const DISPATCH_TOL: f64 = 1e-8;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbspecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    /// the request is outside the supported theory (α = 0, double eigenvalue, ...)
    Refused = 4,
    NotFound = 5,
    Numerical = 6,
    Panic = 7,
}

/// Which term of the squeezed potential a shape is attached to.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbspecTerm {
    /// αε⁻⁴Ψ(x/ε)
    Alpha = 0,
    /// βε⁻³Φ(x/ε)
    Beta = 1,
    /// γ₁ε⁻²Υ₁(x/ε)
    Gamma1 = 2,
    /// γ₂ε⁻¹Υ₂(x/ε)
    Gamma2 = 3,
}

/// Opaque problem handle.
pub struct SbspecProblem {
    inner: Problem,
}

/// Opaque corrector set: λ₀, λ₁, λ₂ and the profiles for one limit eigenvalue.
pub struct SbspecCorrectors {
    problem: Problem,
    set: CorrectorSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SbspecStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::InvalidShape(_) | Error::Domain(_) | Error::Config { .. } => SbspecStatus::InvalidArgument,
            Error::Refused(_) | Error::NotApplicable(_) | Error::Multiplicity(_) => SbspecStatus::Refused,
            Error::NotFound(_) => SbspecStatus::NotFound,
            _ => SbspecStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SbspecStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SbspecStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<SbspecStatus, Failure>) -> SbspecStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SbspecStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn problem<'a>(p: *const SbspecProblem) -> Result<&'a Problem, Failure> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("problem"))
}

unsafe fn shape(coefficients: *const f64, n: usize) -> Result<ShapeFunction, Failure> {
    let c = slice(coefficients, n, "coefficients")?;
    if c.is_empty() {
        return Ok(ShapeFunction::zero());
    }
    Ok(ShapeFunction::bump_poly(c, 0, 1.0)?)
}

fn window(lo: f64, hi: f64) -> Result<[f64; 2], Failure> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok([lo, hi])
    } else {
        Err(invalid(format!("invalid window [{lo}, {hi}]")))
    }
}

unsafe fn write_out(
    values: &[f64],
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> Result<SbspecStatus, Failure> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = values.len();
    let n = values.len().min(capacity);
    if n > 0 {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, n);
    }
    if capacity < values.len() {
        set_error(format!("buffer holds {capacity} values, {} needed", values.len()));
        return Ok(SbspecStatus::BufferTooSmall);
    }
    Ok(SbspecStatus::Ok)
}

fn limit_pairs(p: &Problem, d: &Dispatch, w: [f64; 2], opts: SpectrumOptions) -> Result<Vec<Eigenpair>, Error> {
    match d {
        Dispatch::Nonresonant { .. } => limit_spectrum_nonresonant(p, w, opts.tol),
        Dispatch::Resonant { interface, .. } => limit_spectrum_resonant(p, interface, w, opts.tol),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sbspec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error of this thread into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full message length including the terminator, or 0 if the
/// last call succeeded.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn sbspec_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Clamped problem on (a, b) with a < 0 < b, no potential and no perturbation.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sbspec_problem_new(a: f64, b: f64, out: *mut *mut SbspecProblem) -> SbspecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner = Problem::new(a, b)?;
        *out = Box::into_raw(Box::new(SbspecProblem { inner }));
        Ok(SbspecStatus::Ok)
    })
}

/// # Safety
/// `p` must come from [`sbspec_problem_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sbspec_problem_free(p: *mut SbspecProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Sets U(x) = Σ cₖxᵏ.
///
/// # Safety
/// `p` must be a live handle; `coefficients` valid for `n` values.
#[no_mangle]
pub unsafe extern "C" fn sbspec_problem_set_potential(
    p: *mut SbspecProblem,
    coefficients: *const f64,
    n: usize,
) -> SbspecStatus {
    guard(|| {
        let h = p.as_mut().ok_or_else(|| null("problem"))?;
        let c = slice(coefficients, n, "coefficients")?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite potential coefficient"));
        }
        h.inner.potential = sbspec_core::poly::Poly::new(c);
        Ok(SbspecStatus::Ok)
    })
}

/// Attaches the shape p(ξ)·b(ξ) with the given strength to one term of the
/// squeezed potential; `term` is an `SbspecTerm` value. `n = 0` removes the shape.
///
/// # Safety
/// `p` must be a live handle; `coefficients` valid for `n` values.
#[no_mangle]
pub unsafe extern "C" fn sbspec_problem_set_term(
    p: *mut SbspecProblem,
    term: i32,
    strength: f64,
    coefficients: *const f64,
    n: usize,
) -> SbspecStatus {
    guard(|| {
        let h = p.as_mut().ok_or_else(|| null("problem"))?;
        if !strength.is_finite() {
            return Err(invalid("strength must be finite"));
        }
        let s = shape(coefficients, n)?;
        let q = h.inner.clone();
        h.inner = match term {
            t if t == SbspecTerm::Alpha as i32 => q.with_alpha(strength, s),
            t if t == SbspecTerm::Beta as i32 => q.with_beta(strength, s),
            t if t == SbspecTerm::Gamma1 as i32 => q.with_gamma1(strength, s),
            t if t == SbspecTerm::Gamma2 as i32 => q.with_gamma2(strength, s),
            t => return Err(invalid(format!("unknown term {t}"))),
        };
        Ok(SbspecStatus::Ok)
    })
}

/// Eigenvalues of the perturbed operator at `eps` in [lo, hi], repeated by multiplicity.
///
/// # Safety
/// `p` must be a live handle; `out` valid for `capacity` values; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn sbspec_perturbed_eigenvalues(
    p: *const SbspecProblem,
    eps: f64,
    lo: f64,
    hi: f64,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> SbspecStatus {
    guard(|| {
        let pr = problem(p)?;
        let ev = perturbed_eigenvalues(pr, eps, window(lo, hi)?, SpectrumOptions::default())?;
        let flat: Vec<f64> = ev.iter().flat_map(|&(l, m)| std::iter::repeat_n(l, m)).collect();
        write_out(&flat, out, capacity, out_len)
    })
}

/// Eigenvalues of the limit operator in [lo, hi], repeated by multiplicity. The
/// regime (decoupled halves or interface conditions) follows from D(α).
///
/// # Safety
/// `p` must be a live handle; `out` valid for `capacity` values; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn sbspec_limit_eigenvalues(
    p: *const SbspecProblem,
    lo: f64,
    hi: f64,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> SbspecStatus {
    guard(|| {
        let pr = problem(p)?;
        let opts = SpectrumOptions::default();
        let d = dispatch(pr, DISPATCH_TOL, opts)?;
        let pairs = limit_pairs(pr, &d, window(lo, hi)?, opts)?;
        let flat: Vec<f64> = pairs
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity))
            .collect();
        write_out(&flat, out, capacity, out_len)
    })
}

/// Resonances of the shape p(ξ)·b(ξ) in [lo, hi], ordered by |α|, at most `max_count`.
/// α = 0 is included when in the window.
///
/// # Safety
/// `coefficients` valid for `n` values; `out` valid for `capacity` values; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn sbspec_resonant_set(
    coefficients: *const f64,
    n: usize,
    lo: f64,
    hi: f64,
    max_count: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> SbspecStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("empty coefficient list"));
        }
        let psi = shape(coefficients, n)?;
        let set = resonant_set(&psi, window(lo, hi)?, max_count, ResonanceOptions::default())?;
        let alphas: Vec<f64> = set.iter().map(|r| r.alpha).collect();
        write_out(&alphas, out, capacity, out_len)
    })
}

/// Correctors for the `target`-th (1-based) limit eigenvalue in [lo, hi].
///
/// # Safety
/// `p` must be a live handle; `out` valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sbspec_correctors_new(
    p: *const SbspecProblem,
    lo: f64,
    hi: f64,
    target: usize,
    out: *mut *mut SbspecCorrectors,
) -> SbspecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let pr = problem(p)?;
        if target == 0 {
            return Err(invalid("target is 1-based"));
        }
        let opts = SpectrumOptions::default();
        let d = dispatch(pr, DISPATCH_TOL, opts)?;
        let pairs = limit_pairs(pr, &d, window(lo, hi)?, opts)?;
        let count = pairs.len();
        let pair = pairs.into_iter().nth(target - 1).ok_or_else(|| {
            Failure(
                SbspecStatus::NotFound,
                format!("target {target} but only {count} limit eigenvalues"),
            )
        })?;
        let set = match &d {
            Dispatch::Nonresonant { .. } => correctors_nonresonant(pr, &pair)?,
            Dispatch::Resonant {
                resonance, interface, ..
            } => correctors_resonant(pr, resonance, interface, &pair)?,
        };
        *out = Box::into_raw(Box::new(SbspecCorrectors {
            problem: pr.clone(),
            set,
        }));
        Ok(SbspecStatus::Ok)
    })
}

/// # Safety
/// `c` must come from [`sbspec_correctors_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sbspec_correctors_free(c: *mut SbspecCorrectors) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Writes λ₀, λ₁, λ₂ to `out[0..3]`.
///
/// # Safety
/// `c` must be a live handle; `out` valid for 3 values.
#[no_mangle]
pub unsafe extern "C" fn sbspec_correctors_lambdas(c: *const SbspecCorrectors, out: *mut f64) -> SbspecStatus {
    guard(|| {
        let h = c.as_ref().ok_or_else(|| null("correctors"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let l = [h.set.lambda0, h.set.lambda1, h.set.lambda2];
        ptr::copy_nonoverlapping(l.as_ptr(), out, 3);
        Ok(SbspecStatus::Ok)
    })
}

/// Quasimode at `eps`: Λ_ε = λ₀ + ελ₁ + ε²λ₂ and the outer and inner residual norms.
///
/// # Safety
/// `c` must be a live handle; the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn sbspec_correctors_quasimode(
    c: *const SbspecCorrectors,
    eps: f64,
    lambda_eps: *mut f64,
    residual_outer: *mut f64,
    residual_inner: *mut f64,
) -> SbspecStatus {
    guard(|| {
        let h = c.as_ref().ok_or_else(|| null("correctors"))?;
        if lambda_eps.is_null() || residual_outer.is_null() || residual_inner.is_null() {
            return Err(null("output pointer"));
        }
        let q = assemble_quasimode(&h.problem, &h.set, eps)?;
        *lambda_eps = q.lambda_eps;
        *residual_outer = q.residual_outer;
        *residual_inner = q.residual_inner;
        Ok(SbspecStatus::Ok)
    })
}
