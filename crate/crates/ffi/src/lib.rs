//! C ABI over `jetspray`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free`. Every fallible call returns a
//! [`JetsprayStatus`] and leaves a message for
//! [`jetspray_last_error_message`] on the calling thread. Arrays are
//! caller-allocated; matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use jetspray::flow::{self, GeodesicRecord};
use jetspray::spray::config::SprayConfig;
use jetspray::spray::ConnectionCoefficients;
use jetspray::{BundlePoint, GeomError, Semispray};

/// Largest bundle order accepted across the boundary.
pub const JETSPRAY_MAX_ORDER: usize = 6;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetsprayStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Domain = 5,
    Truncated = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A semispray built from a JSON config.
pub struct JetspraySpray {
    inner: Semispray,
}

/// An integrated geodesic of `S^(r)`.
pub struct JetsprayGeodesic {
    inner: GeodesicRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(JetsprayStatus, String);

impl From<GeomError> for Failure {
    fn from(e: GeomError) -> Self {
        let status = match &e {
            GeomError::Config(_) => JetsprayStatus::Config,
            GeomError::DomainError(_) | GeomError::SingularJet | GeomError::OutsideSlashed => JetsprayStatus::Domain,
            GeomError::Truncated { .. } | GeomError::TruncatedVariation { .. } => JetsprayStatus::Truncated,
            _ => JetsprayStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(JetsprayStatus::NullPointer, format!("{what} is null"))
}

/// Run `body`, translating errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> JetsprayStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            JetsprayStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside jetspray");
            JetsprayStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn spray_ref<'a>(s: *const JetspraySpray) -> Result<&'a Semispray, Failure> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("spray"))
}

unsafe fn geodesic_ref<'a>(g: *const JetsprayGeodesic) -> Result<&'a GeodesicRecord, Failure> {
    g.as_ref().map(|g| &g.inner).ok_or_else(|| null("geodesic"))
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn jetspray_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Build a spray from a JSON config string.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jetspray_spray_from_json(json: *const c_char, out: *mut *mut JetspraySpray) -> JetsprayStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(JetsprayStatus::InvalidUtf8, e.to_string()))?;
        let spray = SprayConfig::from_json(text)?.build()?;
        *out = Box::into_raw(Box::new(JetspraySpray { inner: spray }));
        Ok(())
    })
}

/// # Safety
/// `spray` must come from [`jetspray_spray_from_json`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jetspray_spray_free(spray: *mut JetspraySpray) {
    if !spray.is_null() {
        drop(Box::from_raw(spray));
    }
}

/// Chart dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `spray` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jetspray_spray_dim(spray: *const JetspraySpray) -> usize {
    spray.as_ref().map_or(0, |s| s.inner.dim())
}

/// `G(x, y)` into `out` (`n` values).
///
/// # Safety
/// `x`, `y`, `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn jetspray_spray_eval(
    spray: *const JetspraySpray,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> JetsprayStatus {
    guard(|| {
        let s = spray_ref(spray)?;
        let n = s.dim();
        let g = s.eval_real(input(x, n, "x")?, input(y, n, "y")?)?;
        output(out, n, "out")?.copy_from_slice(&g);
        Ok(())
    })
}

/// Acceleration of `S^(r)` at the state `(xi, eta)`; all three arrays hold
/// `n · 2^r` doubles in block-mask order.
///
/// # Safety
/// Array sizes as above.
#[no_mangle]
pub unsafe extern "C" fn jetspray_lifted_rhs(
    spray: *const JetspraySpray,
    r: usize,
    xi: *const f64,
    eta: *const f64,
    out: *mut f64,
) -> JetsprayStatus {
    guard(|| {
        let s = spray_ref(spray)?;
        check_order(r)?;
        let len = s.dim() << r;
        let p = BundlePoint::new(s.dim(), r, input(xi, len, "xi")?.to_vec())?;
        let v = BundlePoint::new(s.dim(), r, input(eta, len, "eta")?.to_vec())?;
        let acc = s.lifted_rhs(r, &p, &v)?;
        output(out, len, "out")?.copy_from_slice(acc.as_slice());
        Ok(())
    })
}

fn check_order(r: usize) -> Result<(), Failure> {
    if r > JETSPRAY_MAX_ORDER {
        return Err(Failure(JetsprayStatus::InvalidArgument, format!("order {r} exceeds {JETSPRAY_MAX_ORDER}")));
    }
    Ok(())
}

fn write_matrix(m: &ConnectionCoefficients, out: &mut [f64]) {
    let n = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
}

/// Nonlinear connection `N^i_j = ∂G^i/∂y^j` into `out` (`n × n`, row-major).
///
/// # Safety
/// `x`, `y` hold `n` doubles, `out` holds `n²`.
#[no_mangle]
pub unsafe extern "C" fn jetspray_connection(
    spray: *const JetspraySpray,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> JetsprayStatus {
    guard(|| {
        let s = spray_ref(spray)?;
        let n = s.dim();
        let m = s.connection(input(x, n, "x")?, input(y, n, "y")?)?;
        write_matrix(&m, output(out, n * n, "out")?);
        Ok(())
    })
}

/// Jacobi endomorphism `Φ` into `out` (`n × n`, row-major).
///
/// # Safety
/// `x`, `y` hold `n` doubles, `out` holds `n²`.
#[no_mangle]
pub unsafe extern "C" fn jetspray_jacobi_endomorphism(
    spray: *const JetspraySpray,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> JetsprayStatus {
    guard(|| {
        let s = spray_ref(spray)?;
        let n = s.dim();
        let m = s.jacobi_endomorphism(input(x, n, "x")?, input(y, n, "y")?)?;
        write_matrix(&m, output(out, n * n, "out")?);
        Ok(())
    })
}

/// Integrate the geodesic of `S^(r)` from `(pos, vel)` (each `n · 2^r`
/// doubles) over `[t0, t1]` with a fixed step. A trajectory that leaves the
/// domain is returned truncated; see [`jetspray_geodesic_is_complete`].
///
/// # Safety
/// Array sizes as above; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jetspray_integrate_geodesic(
    spray: *const JetspraySpray,
    r: usize,
    pos: *const f64,
    vel: *const f64,
    t0: f64,
    t1: f64,
    step: f64,
    out: *mut *mut JetsprayGeodesic,
) -> JetsprayStatus {
    guard(|| {
        let s = spray_ref(spray)?;
        if out.is_null() {
            return Err(null("out"));
        }
        check_order(r)?;
        let len = s.dim() << r;
        let p = BundlePoint::new(s.dim(), r, input(pos, len, "pos")?.to_vec())?;
        let v = BundlePoint::new(s.dim(), r, input(vel, len, "vel")?.to_vec())?;
        let g = flow::integrate_geodesic(s, r, (&p, &v), (t0, t1), step)?;
        *out = Box::into_raw(Box::new(JetsprayGeodesic { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `geodesic` must come from [`jetspray_integrate_geodesic`] and not be
/// used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jetspray_geodesic_free(geodesic: *mut JetsprayGeodesic) {
    if !geodesic.is_null() {
        drop(Box::from_raw(geodesic));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `geodesic` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jetspray_geodesic_len(geodesic: *const JetsprayGeodesic) -> usize {
    geodesic.as_ref().map_or(0, |g| g.inner.len())
}

/// Doubles per position (and per velocity): `n · 2^r`.
///
/// # Safety
/// `geodesic` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jetspray_geodesic_width(geodesic: *const JetsprayGeodesic) -> usize {
    geodesic.as_ref().map_or(0, |g| g.inner.dim() << g.inner.r)
}

/// 1 when the whole span was integrated, 0 when truncated or null.
///
/// # Safety
/// `geodesic` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jetspray_geodesic_is_complete(geodesic: *const JetsprayGeodesic) -> i32 {
    geodesic.as_ref().map_or(0, |g| i32::from(g.inner.is_complete()))
}

/// Sample `i`: its time, position and velocity. Any of `t`, `pos`, `vel`
/// may be null to skip it; `cap` is the size of `pos` and `vel`.
///
/// # Safety
/// Non-null outputs must be writable (`pos`, `vel` with `cap` doubles).
#[no_mangle]
pub unsafe extern "C" fn jetspray_geodesic_sample(
    geodesic: *const JetsprayGeodesic,
    i: usize,
    t: *mut f64,
    pos: *mut f64,
    vel: *mut f64,
    cap: usize,
) -> JetsprayStatus {
    guard(|| {
        let g = geodesic_ref(geodesic)?;
        if i >= g.len() {
            return Err(Failure(
                JetsprayStatus::InvalidArgument,
                format!("sample {i} out of range 0..{}", g.len()),
            ));
        }
        let width = g.dim() << g.r;
        if (!pos.is_null() || !vel.is_null()) && cap < width {
            return Err(Failure(JetsprayStatus::BufferTooSmall, format!("need {width} doubles, got {cap}")));
        }
        if !t.is_null() {
            *t = g.t_grid[i];
        }
        if !pos.is_null() {
            output(pos, width, "pos")?.copy_from_slice(g.pos[i].as_slice());
        }
        if !vel.is_null() {
            output(vel, width, "vel")?.copy_from_slice(g.vel[i].as_slice());
        }
        Ok(())
    })
}
