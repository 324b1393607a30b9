//! C ABI over `weighted_minnorm`.
//!
//! Conventions: every fallible function returns a [`WmnStatus`] and writes
//! results through out-pointers. Complex vectors cross the boundary as
//! split real/imaginary `double` arrays. After a non-`OK` status,
//! [`wmn_last_error_message`] describes the failure on the calling thread.
//! Panics never unwind into C; they surface as `WMN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use num_complex::Complex64;
use weighted_minnorm::estimators::{least_squares, weighted_minnorm, SolverPath};
use weighted_minnorm::model::{GridConfig, Spectrum};
use weighted_minnorm::risk::{
    asymptotic_bound, concentration_bound, risk_over_closed, risk_under_closed,
};
use weighted_minnorm::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidDimension = 2,
    InvalidConfiguration = 3,
    InvalidRange = 4,
    OutOfRegime = 5,
    WrongRegime = 6,
    StructureViolation = 7,
    SingularSystem = 8,
    SingularConstant = 9,
    NumericalInconsistency = 10,
    UnknownTarget = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 99,
}

/// Solver selection for [`wmn_weighted_minnorm`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmnSolverPath {
    DenseSvd = 0,
    CirculantFft = 1,
}

/// Opaque coefficient spectrum `t_j = (j+1)^-1` with decay `r`.
pub struct WmnSpectrum {
    inner: Spectrum,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WmnStatus {
    match e {
        Error::InvalidDimension(_) => WmnStatus::InvalidDimension,
        Error::InvalidConfiguration(_) => WmnStatus::InvalidConfiguration,
        Error::InvalidRange(_) => WmnStatus::InvalidRange,
        Error::OutOfRegime(_) => WmnStatus::OutOfRegime,
        Error::WrongRegime(_) => WmnStatus::WrongRegime,
        Error::StructureViolation(_) => WmnStatus::StructureViolation,
        Error::SingularSystem(_) => WmnStatus::SingularSystem,
        Error::SingularConstant(_) => WmnStatus::SingularConstant,
        Error::NumericalInconsistency(_) => WmnStatus::NumericalInconsistency,
        Error::UnknownTarget(_) => WmnStatus::UnknownTarget,
        Error::Io(_) => WmnStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Buffer(usize, usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> WmnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WmnStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            WmnStatus::NullPointer
        }
        Ok(Err(Fail::Buffer(have, need))) => {
            set_error(format!("output buffer holds {have} values, {need} needed"));
            WmnStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            WmnStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn write<T>(p: *mut T, name: &'static str, v: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    p.write(v);
    Ok(())
}

unsafe fn read_complex(re: *const f64, im: *const f64, len: usize) -> Result<Vec<Complex64>, Fail> {
    if re.is_null() {
        return Err(Fail::Null("y_re"));
    }
    let re = slice::from_raw_parts(re, len);
    let im = if im.is_null() { None } else { Some(slice::from_raw_parts(im, len)) };
    Ok((0..len)
        .map(|i| Complex64::new(re[i], im.map_or(0.0, |im| im[i])))
        .collect())
}

unsafe fn write_complex(
    v: &[Complex64],
    out_re: *mut f64,
    out_im: *mut f64,
    out_len: usize,
) -> Result<(), Fail> {
    if out_re.is_null() || out_im.is_null() {
        return Err(Fail::Null("out_re/out_im"));
    }
    if out_len < v.len() {
        return Err(Fail::Buffer(out_len, v.len()));
    }
    let re = slice::from_raw_parts_mut(out_re, v.len());
    let im = slice::from_raw_parts_mut(out_im, v.len());
    for (i, c) in v.iter().enumerate() {
        re[i] = c.re;
        im[i] = c.im;
    }
    Ok(())
}

/// Creates a spectrum of dimension `dim` and decay `r`.
///
/// # Safety
/// `out` must be a valid pointer; the handle must be released with
/// [`wmn_spectrum_free`].
#[no_mangle]
pub unsafe extern "C" fn wmn_spectrum_new(dim: usize, r: f64, out: *mut *mut WmnSpectrum) -> WmnStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let inner = Spectrum::new(dim, r)?;
        out.write(Box::into_raw(Box::new(WmnSpectrum { inner })));
        Ok(())
    })
}

/// Releases a spectrum. Null is ignored.
///
/// # Safety
/// `spectrum` must come from [`wmn_spectrum_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn wmn_spectrum_free(spectrum: *mut WmnSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Ambient dimension `D`, or 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wmn_spectrum_dim(spectrum: *const WmnSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.inner.dim())
}

/// Normalizing constant `c_r`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wmn_spectrum_c_r(spectrum: *const WmnSpectrum, out: *mut f64) -> WmnStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        write(out, "out", s.inner.c_r())
    })
}

/// Closed-form risk of the weighted min-norm estimator on an aligned grid
/// `n | D`, `n | p`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wmn_risk_over_closed(
    spectrum: *const WmnSpectrum,
    n: usize,
    p: usize,
    q: f64,
    out_risk: *mut f64,
) -> WmnStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        let grid = GridConfig::classify(s.inner.dim(), n, p)?;
        write(out_risk, "out_risk", risk_over_closed(&s.inner, &grid, q)?.risk)
    })
}

/// Closed-form risk of least squares for `p <= n`, `n | D`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wmn_risk_under_closed(
    spectrum: *const WmnSpectrum,
    n: usize,
    p: usize,
    out_risk: *mut f64,
) -> WmnStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        let grid = GridConfig::classify(s.inner.dim(), n, p)?;
        write(out_risk, "out_risk", risk_under_closed(&s.inner, &grid)?)
    })
}

/// Rate bound `a n^(-2r+1) + b n^(-2r) p^(-2r+1)` and its large-`D` limit.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wmn_asymptotic_bound(
    spectrum: *const WmnSpectrum,
    n: usize,
    p: usize,
    out_bound: *mut f64,
    out_large_d_bound: *mut f64,
) -> WmnStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        let grid = GridConfig::classify(s.inner.dim(), n, p)?;
        let b = asymptotic_bound(&s.inner, &grid)?;
        write(out_bound, "out_bound", b.bound)?;
        write(out_large_d_bound, "out_large_d_bound", b.large_d_bound)
    })
}

/// Concentration constant `T_q` and the raw tail `2 exp(-min(x^2, x))`,
/// `x = t / T_q`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wmn_concentration_bound(
    r: f64,
    q: f64,
    t: f64,
    out_tq: *mut f64,
    out_tail: *mut f64,
) -> WmnStatus {
    guard(|| {
        let (tq, tail) = concentration_bound(r, q, t)?;
        write(out_tq, "out_tq", tq)?;
        write(out_tail, "out_tail", tail)
    })
}

/// Weighted min-norm interpolant from `n` samples `y` with `p >= n`
/// features. Writes `D` coefficients (zero beyond `p`). `y_im` may be null
/// for real data.
///
/// # Safety
/// `y_re` (and `y_im` when non-null) must hold `n` values; the outputs must
/// hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn wmn_weighted_minnorm(
    spectrum: *const WmnSpectrum,
    n: usize,
    p: usize,
    q: f64,
    path: WmnSolverPath,
    y_re: *const f64,
    y_im: *const f64,
    out_re: *mut f64,
    out_im: *mut f64,
    out_len: usize,
) -> WmnStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        let grid = GridConfig::classify(s.inner.dim(), n, p)?;
        let y = read_complex(y_re, y_im, n)?;
        let path = match path {
            WmnSolverPath::DenseSvd => SolverPath::DenseSvd,
            WmnSolverPath::CirculantFft => SolverPath::CirculantFft,
        };
        let fit = weighted_minnorm(&y, &s.inner, &grid, q, path)?;
        write_complex(&fit.theta_hat, out_re, out_im, out_len)
    })
}

/// Least-squares fit `F^* y / n` for `p <= n`; writes `dim` coefficients.
///
/// # Safety
/// As for [`wmn_weighted_minnorm`].
#[no_mangle]
pub unsafe extern "C" fn wmn_least_squares(
    dim: usize,
    n: usize,
    p: usize,
    y_re: *const f64,
    y_im: *const f64,
    out_re: *mut f64,
    out_im: *mut f64,
    out_len: usize,
) -> WmnStatus {
    guard(|| {
        let grid = GridConfig::classify(dim, n, p)?;
        let y = read_complex(y_re, y_im, n)?;
        let fit = least_squares(&y, &grid)?;
        write_complex(&fit.theta_hat, out_re, out_im, out_len)
    })
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wmn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
