//! C ABI over the entroscope library.
//!
//! Every fallible function returns an `int32_t` status (`ENTROSCOPE_OK` on
//! success) and writes results through out-pointers. After a failure,
//! `entroscope_last_error` returns a message for the calling thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use entroscope::critical_orbit::lyapunov_estimate;
use entroscope::entropy::{quad_entropy_ctx, tent_entropy};
use entroscope::kneading::quad_itinerary;
use entroscope::renorm::{band_merging_cascade, detect_window, feigenbaum_a_f, CascadeTable};
use entroscope::{EntropyResult, Error, ParamValue, PrecisionContext};

pub const ENTROSCOPE_OK: i32 = 0;
pub const ENTROSCOPE_INVALID_ARGUMENT: i32 = 1;
pub const ENTROSCOPE_OUT_OF_RANGE: i32 = 2;
pub const ENTROSCOPE_NULL_POINTER: i32 = 3;
/// The computation did not reach the requested accuracy.
pub const ENTROSCOPE_NOT_RESOLVED: i32 = 4;
pub const ENTROSCOPE_NOT_APPLICABLE: i32 = 5;
/// The orbit met the turning point or left the invariant interval.
pub const ENTROSCOPE_DEGENERATE_ORBIT: i32 = 6;
pub const ENTROSCOPE_BUDGET_EXCEEDED: i32 = 7;
pub const ENTROSCOPE_IO: i32 = 8;
pub const ENTROSCOPE_PANIC: i32 = 9;
pub const ENTROSCOPE_BUFFER_TOO_SMALL: i32 = 10;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => ENTROSCOPE_INVALID_ARGUMENT,
        Error::OutOfRange { .. } => ENTROSCOPE_OUT_OF_RANGE,
        Error::InsufficientPrecision { .. } | Error::NotResolved(_) | Error::InsufficientSignal(_) => {
            ENTROSCOPE_NOT_RESOLVED
        }
        Error::NotApplicable(_) => ENTROSCOPE_NOT_APPLICABLE,
        Error::DerivativeUndefined | Error::EscapingPoint(_) | Error::CriticalHit(_) | Error::ZeroHit(_) => {
            ENTROSCOPE_DEGENERATE_ORBIT
        }
        Error::Budget(_) => ENTROSCOPE_BUDGET_EXCEEDED,
        Error::Io(_) => ENTROSCOPE_IO,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ENTROSCOPE_OK,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is null"));
            ENTROSCOPE_NULL_POINTER
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            ENTROSCOPE_PANIC
        }
    }
}

fn null_error(what: &'static str) -> Failure {
    Failure::Null(what)
}

/// Opaque precision configuration.
pub struct EntroscopeContext {
    inner: PrecisionContext,
}

/// Opaque band-merging cascade table.
pub struct EntroscopeCascade {
    table: CascadeTable,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EntroscopeEntropy {
    pub value: f64,
    /// Low word; nonzero only for extended-precision contexts.
    pub value_lo: f64,
    pub error_radius: f64,
    pub renorm_depth: u32,
    pub superattracting: bool,
    pub no_root: bool,
}

impl From<EntropyResult> for EntroscopeEntropy {
    fn from(r: EntropyResult) -> Self {
        EntroscopeEntropy {
            value: r.value,
            value_lo: r.value_lo,
            error_radius: r.error_radius,
            renorm_depth: r.renorm_depth,
            superattracting: r.superattracting,
            no_root: r.no_root,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EntroscopeLyapunov {
    pub lower: f64,
    pub upper: f64,
    pub last: f64,
    pub converged: bool,
    pub steps: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EntroscopeWindow {
    pub period: usize,
    pub left: f64,
    pub right: f64,
    pub center: f64,
    pub feig_depth: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EntroscopeAccumulation {
    pub value: f64,
    pub uncertainty: f64,
    pub delta_star: f64,
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn entroscope_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// New context; `bits` = 53 selects native doubles, 128..=1024 the extended
/// backend. Returns null on invalid precision.
#[no_mangle]
pub extern "C" fn entroscope_context_new(bits: u32) -> *mut EntroscopeContext {
    let mut out = ptr::null_mut();
    guard(|| {
        let inner = PrecisionContext::from_bits(bits as usize)?;
        out = Box::into_raw(Box::new(EntroscopeContext { inner }));
        Ok(())
    });
    out
}

/// # Safety
/// `ctx` must be null or a live handle from [`entroscope_context_new`].
#[no_mangle]
pub unsafe extern "C" fn entroscope_context_set_depth(ctx: *mut EntroscopeContext, depth: usize) -> i32 {
    guard(|| {
        // SAFETY: caller guarantees a live, exclusively borrowed handle
        let ctx = unsafe { ctx.as_mut() }.ok_or_else(|| null_error("context"))?;
        if depth == 0 {
            return Err(Error::InvalidArgument("depth must be positive".into()).into());
        }
        ctx.inner = ctx.inner.with_depth(depth);
        Ok(())
    })
}

/// # Safety
/// `ctx` must be null or a handle from [`entroscope_context_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn entroscope_context_free(ctx: *mut EntroscopeContext) {
    if !ctx.is_null() {
        // SAFETY: the handle was created by Box::into_raw and is freed once
        drop(unsafe { Box::from_raw(ctx) });
    }
}

/// Entropy of `x² + a`.
///
/// # Safety
/// `ctx` must be a live context handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn entroscope_quad_entropy(
    ctx: *const EntroscopeContext,
    a: f64,
    out: *mut EntroscopeEntropy,
) -> i32 {
    guard(|| {
        // SAFETY: caller guarantees validity of both pointers
        let ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_error("context"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null_error("out"))?;
        *out = quad_entropy_ctx(a, &ctx.inner)?.into();
        Ok(())
    })
}

/// Entropy of `1 − b|x|`, `log b` for `b` in `[1, 2]`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn entroscope_tent_entropy(b: f64, out: *mut EntroscopeEntropy) -> i32 {
    guard(|| {
        // SAFETY: caller guarantees a writable pointer
        let out = unsafe { out.as_mut() }.ok_or_else(|| null_error("out"))?;
        *out = tent_entropy(b)?.into();
        Ok(())
    })
}

/// Finite-time Lyapunov exponent of the critical value over `n` steps.
///
/// # Safety
/// `ctx` must be a live context handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn entroscope_lyapunov(
    ctx: *const EntroscopeContext,
    a: f64,
    n: usize,
    out: *mut EntroscopeLyapunov,
) -> i32 {
    guard(|| {
        // SAFETY: caller guarantees validity of both pointers
        let ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_error("context"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null_error("out"))?;
        let l = lyapunov_estimate(a, n, &ctx.inner)?;
        *out = EntroscopeLyapunov {
            lower: l.lower,
            upper: l.upper,
            last: l.last,
            converged: l.converged,
            steps: l.steps,
        };
        Ok(())
    })
}

/// Kneading sequence of `x² + a` as a NUL-terminated string over `L`, `C`,
/// `R`. `*written` receives the length without the terminator; when the
/// buffer is too small it receives the required length and
/// `ENTROSCOPE_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `ctx` must be a live handle, `buf` writable for `len` bytes (or null with
/// `len` 0) and `written` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn entroscope_kneading(
    ctx: *const EntroscopeContext,
    a: f64,
    n: usize,
    buf: *mut c_char,
    len: usize,
    written: *mut usize,
) -> i32 {
    let mut status = ENTROSCOPE_OK;
    let code = guard(|| {
        // SAFETY: caller guarantees validity of the pointers
        let ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_error("context"))?;
        let written = unsafe { written.as_mut() }.ok_or_else(|| null_error("written"))?;
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()).into());
        }
        let text = quad_itinerary(ParamValue::from(a), n, &ctx.inner).to_string();
        *written = text.len();
        if buf.is_null() || len <= text.len() {
            set_last_error(format!("buffer needs {} bytes", text.len() + 1));
            status = ENTROSCOPE_BUFFER_TOO_SMALL;
            return Ok(());
        }
        // SAFETY: buf holds at least text.len() + 1 bytes
        unsafe {
            ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
            *buf.add(text.len()) = 0;
        }
        Ok(())
    });
    if code == ENTROSCOPE_OK {
        status
    } else {
        code
    }
}

/// Renormalisation window containing `a`. `*found` is false when none of
/// period up to `max_period` contains it.
///
/// # Safety
/// `out` and `found` must be writable pointers.
#[no_mangle]
pub unsafe extern "C" fn entroscope_detect_window(
    a: f64,
    max_period: usize,
    out: *mut EntroscopeWindow,
    found: *mut bool,
) -> i32 {
    guard(|| {
        // SAFETY: caller guarantees validity of both pointers
        let out = unsafe { out.as_mut() }.ok_or_else(|| null_error("out"))?;
        let found = unsafe { found.as_mut() }.ok_or_else(|| null_error("found"))?;
        match detect_window(a, max_period)? {
            Some(w) => {
                *out = EntroscopeWindow {
                    period: w.period,
                    left: w.left,
                    right: w.right,
                    center: w.center,
                    feig_depth: w.feig_depth,
                };
                *found = true;
            }
            None => *found = false,
        }
        Ok(())
    })
}

/// Band-merging cascade with rows `0..=depth`.
///
/// # Safety
/// `ctx` must be a live handle and `out` a writable pointer; on success
/// `*out` must later be released with [`entroscope_cascade_free`].
#[no_mangle]
pub unsafe extern "C" fn entroscope_cascade_new(
    ctx: *const EntroscopeContext,
    depth: usize,
    out: *mut *mut EntroscopeCascade,
) -> i32 {
    guard(|| {
        // SAFETY: caller guarantees validity of both pointers
        let ctx = unsafe { ctx.as_ref() }.ok_or_else(|| null_error("context"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null_error("out"))?;
        let table = band_merging_cascade(depth, &ctx.inner)?;
        *out = Box::into_raw(Box::new(EntroscopeCascade { table }));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live cascade handle.
#[no_mangle]
pub unsafe extern "C" fn entroscope_cascade_rows(table: *const EntroscopeCascade) -> usize {
    // SAFETY: caller guarantees null or a live handle
    unsafe { table.as_ref() }.map_or(0, |t| t.table.rows())
}

/// Row `m` as a two-word value `hi + lo`.
///
/// # Safety
/// `table` must be a live cascade handle; `hi` and `lo` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn entroscope_cascade_row(
    table: *const EntroscopeCascade,
    m: usize,
    hi: *mut f64,
    lo: *mut f64,
) -> i32 {
    guard(|| {
        // SAFETY: caller guarantees validity of the pointers
        let t = unsafe { table.as_ref() }.ok_or_else(|| null_error("table"))?;
        let hi = unsafe { hi.as_mut() }.ok_or_else(|| null_error("hi"))?;
        let lo = unsafe { lo.as_mut() }.ok_or_else(|| null_error("lo"))?;
        if m >= t.table.rows() {
            return Err(Error::InvalidArgument(format!("row {m} beyond {} rows", t.table.rows())).into());
        }
        *hi = t.table.a_m[m];
        *lo = t.table.a_m_lo[m];
        Ok(())
    })
}

/// Accumulation point of the cascade and the ratio limit.
///
/// # Safety
/// `table` must be a live cascade handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn entroscope_cascade_accumulation(
    table: *const EntroscopeCascade,
    out: *mut EntroscopeAccumulation,
) -> i32 {
    guard(|| {
        // SAFETY: caller guarantees validity of both pointers
        let t = unsafe { table.as_ref() }.ok_or_else(|| null_error("table"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null_error("out"))?;
        let acc = feigenbaum_a_f(&t.table)?;
        *out = EntroscopeAccumulation {
            value: acc.value,
            uncertainty: acc.uncertainty,
            delta_star: acc.delta_star,
        };
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle from [`entroscope_cascade_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn entroscope_cascade_free(table: *mut EntroscopeCascade) {
    if !table.is_null() {
        // SAFETY: the handle was created by Box::into_raw and is freed once
        drop(unsafe { Box::from_raw(table) });
    }
}
