//! C ABI over `heisbeta`.
//!
//! Handles are opaque and owned by the caller: every `hb_*_new`/`hb_*_from_*`
//! pairs with a `hb_*_free`. Functions return an [`HbStatus`]; on failure the
//! message is kept per thread and read with [`hb_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use heisbeta::beta::{beta_p_surface, gamma_p, VMask};
use heisbeta::config::RunConfig;
use heisbeta::flow::{trace, CharCurve};
use heisbeta::graph::{make_affine, IntrinsicGraph};
use heisbeta::multiscale::carleson_integral;
use heisbeta::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HbStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Domain = 3,
    Certification = 4,
    Parameter = 5,
    Internal = 6,
    Panic = 7,
}

/// Opaque intrinsic graph.
pub struct HbGraph(IntrinsicGraph);

/// Opaque characteristic curve.
pub struct HbCurve(CharCurve);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HbStatus {
    match e {
        Error::Config(_) => HbStatus::Config,
        Error::Parameter(_) => HbStatus::Parameter,
        Error::OutOfDomain { .. } | Error::Coverage(_) | Error::EmptyCurve { .. } | Error::Underflow(_) => {
            HbStatus::Domain
        }
        Error::Certification { .. } => HbStatus::Certification,
        Error::Internal(_) | Error::Io(_) | Error::Csv(_) => HbStatus::Internal,
    }
}

fn guard<F: FnOnce() -> Result<(), HbStatus>>(f: F) -> HbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside heisbeta".into());
            HbStatus::Panic
        }
    }
}

fn lift<T>(r: heisbeta::Result<T>) -> Result<T, HbStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, HbStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument".into());
        HbStatus::NullPointer
    })
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, HbStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer".into());
        HbStatus::NullPointer
    })
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, HbStatus> {
    if s.is_null() {
        set_error("null string argument".into());
        return Err(HbStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not UTF-8".into());
        HbStatus::Config
    })
}

/// Last error message on this thread, or NULL. Free with [`hb_string_free`].
#[no_mangle]
pub extern "C" fn hb_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Vertical plane `y = a x + b`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_affine(a: f64, b: f64, out: *mut *mut HbGraph) -> HbStatus {
    guard(|| {
        let o = out_ptr(out)?;
        *o = Box::into_raw(Box::new(HbGraph(make_affine(a, b))));
        Ok(())
    })
}

/// Builds the graph described by a full config text (top-level `seed` plus `[graph]`).
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_from_config(config: *const c_char, out: *mut *mut HbGraph) -> HbStatus {
    guard(|| {
        let text = str_arg(config)?;
        let o = out_ptr(out)?;
        let cfg = lift(RunConfig::parse(text))?;
        let g = lift(cfg.graph.build())?;
        *o = Box::into_raw(Box::new(HbGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_free(g: *mut HbGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// `ψ(x, z)`.
///
/// # Safety
/// `g` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hb_graph_psi(g: *const HbGraph, x: f64, z: f64, out: *mut f64) -> HbStatus {
    guard(|| {
        let g = deref(g)?;
        *out_ptr(out)? = lift(g.0.psi_checked(x, z))?;
        Ok(())
    })
}

/// `γ_p(v, r)` on an `nx × nz` grid over `V(Ψ(v), r)`.
///
/// # Safety
/// `g` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hb_gamma_p(
    g: *const HbGraph,
    x: f64,
    z: f64,
    r: f64,
    p: f64,
    nx: usize,
    nz: usize,
    out: *mut f64,
) -> HbStatus {
    guard(|| {
        let g = deref(g)?;
        let o = out_ptr(out)?;
        if nx < 2 || nz < 2 {
            set_error("grid needs at least 2 nodes per side".into());
            return Err(HbStatus::Parameter);
        }
        *o = lift(gamma_p(&g.0, (x, z), r, p, &VMask::new((nx, nz))))?.value;
        Ok(())
    })
}

/// `β_p(Ψ(x, z), r)` with surface measure on an `nx × nz` grid.
///
/// # Safety
/// `g` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hb_beta_p(
    g: *const HbGraph,
    x: f64,
    z: f64,
    r: f64,
    p: f64,
    nx: usize,
    nz: usize,
    out: *mut f64,
) -> HbStatus {
    guard(|| {
        let g = deref(g)?;
        let o = out_ptr(out)?;
        let center = lift(g.0.graph_map(x, z))?;
        *o = lift(beta_p_surface(&g.0, center, r, p, (nx, nz)))?.value;
        Ok(())
    })
}

/// Characteristic curve through `(x0, z0)` on `[t_min, t_max]`.
///
/// # Safety
/// `g` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hb_trace(
    g: *const HbGraph,
    x0: f64,
    z0: f64,
    t_min: f64,
    t_max: f64,
    step: f64,
    out: *mut *mut HbCurve,
) -> HbStatus {
    guard(|| {
        let g = deref(g)?;
        let o = out_ptr(out)?;
        let c = lift(trace(&g.0, x0, z0, t_min, t_max, step))?;
        *o = Box::into_raw(Box::new(HbCurve(c)));
        Ok(())
    })
}

/// # Safety
/// `c` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hb_curve_free(c: *mut HbCurve) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of nodes; 0 for NULL.
///
/// # Safety
/// `c` must be a valid pointer or NULL.
#[no_mangle]
pub unsafe extern "C" fn hb_curve_len(c: *const HbCurve) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

/// Interpolated `g(t)`, clamped to the traced range.
///
/// # Safety
/// `c` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hb_curve_eval(c: *const HbCurve, t: f64, out: *mut f64) -> HbStatus {
    guard(|| {
        let c = deref(c)?;
        *out_ptr(out)? = c.0.eval(t);
        Ok(())
    })
}

/// Normalized Carleson total for the `[graph]`, `[root]` and `[carleson]` tables of a config text.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hb_carleson_total(config: *const c_char, out: *mut f64) -> HbStatus {
    guard(|| {
        let text = str_arg(config)?;
        let o = out_ptr(out)?;
        let cfg = lift(RunConfig::parse(text))?;
        let g = lift(cfg.graph.build())?;
        *o = lift(carleson_integral(&g, &cfg.root, &cfg.carleson))?.total;
        Ok(())
    })
}
