//! C interface to `polarity-core`.
//!
//! Every function returns a [`PolarityStatus`]; on failure a message is kept
//! per thread and can be read with [`polarity_last_error_message`]. Handles
//! are opaque and must be released with the matching `*_free` function.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;

use polarity_core::ctransform::{c_transform, QuadraticCost};
use polarity_core::divergences::{polar_fenchel_young, polar_total_fenchel_young_with, Variant};
use polarity_core::legendre::{conjugate, epigraph_body, Grid, SampledFunction};
use polarity_core::linalg::to_row_major;
use polarity_core::polarity::{pairing, polar_boundary_envelope, CostMatrix, Envelope};
use polarity_core::projective::ProjectivePoint;
use polarity_core::transforms::{decompose_s, decompose_t};
use polarity_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    Singular = 4,
    NumericalFailure = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Normalization of the total divergences.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityVariant {
    /// Divide by `sqrt(1 + |g|^2)`.
    Sqrt = 0,
    /// Divide by `1 + |g|^2`.
    Paper = 1,
}

/// Which factorization of a cost matrix through the Legendre polarity.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityFactor {
    /// `C = C_L M_T^{-1}`.
    T = 0,
    /// `C = M_S^T C_L`.
    S = 1,
}

pub struct PolarityCostMatrix(CostMatrix);

pub struct PolarityFunction(SampledFunction);

pub struct PolarityEnvelope {
    env: Envelope,
    n: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

enum Failure {
    Null(&'static str),
    Small { needed: usize, got: usize },
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> PolarityStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PolarityStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PolarityStatus::NullPointer
        }
        Ok(Err(Failure::Small { needed, got })) => {
            set_error(format!("output buffer holds {got} values, {needed} needed"));
            PolarityStatus::BufferTooSmall
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            match e {
                Error::DimensionMismatch { .. } => PolarityStatus::DimensionMismatch,
                Error::Singular { .. } => PolarityStatus::Singular,
                e if e.is_input_error() => PolarityStatus::InvalidInput,
                _ => PolarityStatus::NumericalFailure,
            }
        }
        Err(_) => {
            set_error("internal panic".into());
            PolarityStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(
    p: *mut f64,
    len: usize,
    needed: usize,
    what: &'static str,
) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    if len < needed {
        return Err(Failure::Small { needed, got: len });
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn point(coords: &[f64]) -> Result<ProjectivePoint, Failure> {
    Ok(ProjectivePoint::new(coords.to_vec())?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn polarity_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(s) => s,
            Err(_) => c"unknown",
        };
    VERSION.as_ptr()
}

/// Length in bytes of the last error message on this thread, without the
/// terminating NUL. Zero after a successful call.
#[no_mangle]
pub extern "C" fn polarity_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated). Returns
/// `BufferTooSmall` when `len` is not larger than the message length.
///
/// # Safety
/// `buf` must be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn polarity_last_error_message(
    buf: *mut c_char,
    len: usize,
) -> PolarityStatus {
    if buf.is_null() {
        return PolarityStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if len <= msg.len() {
            return PolarityStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, msg.len());
        *buf.add(msg.len()) = 0;
        PolarityStatus::Ok
    })
}

/// Cost matrix of size `(n+2) x (n+2)` from `len = (n+2)^2` row-major entries.
///
/// # Safety
/// `data` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn polarity_cost_matrix_new(
    n: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut PolarityCostMatrix,
) -> PolarityStatus {
    guard(|| {
        let d = n + 2;
        if len != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: len,
            }
            .into());
        }
        let entries = input(data, len, "data")?;
        store(out, PolarityCostMatrix(CostMatrix::new(n, entries)?))
    })
}

/// The Legendre polarity matrix `[[-I,0,0],[0,0,1],[0,1,0]]`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn polarity_cost_matrix_legendre(
    n: usize,
    out: *mut *mut PolarityCostMatrix,
) -> PolarityStatus {
    guard(|| store(out, PolarityCostMatrix(CostMatrix::legendre(n))))
}

/// The matrix mapping the epigraph of the half squared norm onto the unit ball.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn polarity_cost_matrix_parabola_to_sphere(
    n: usize,
    out: *mut *mut PolarityCostMatrix,
) -> PolarityStatus {
    guard(|| store(out, PolarityCostMatrix(CostMatrix::parabola_to_sphere(n))))
}

/// Parameter dimension `n`; the matrix is `(n+2) x (n+2)`. Zero for null.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn polarity_cost_matrix_n(c: *const PolarityCostMatrix) -> usize {
    c.as_ref().map_or(0, |c| c.0.n())
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polarity_cost_matrix_free(c: *mut PolarityCostMatrix) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// `a^T C b` for homogeneous points of length `len = n+2`.
///
/// # Safety
/// `a` and `b` must be valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn polarity_pairing(
    c: *const PolarityCostMatrix,
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> PolarityStatus {
    guard(|| {
        let c = handle(c, "c")?;
        let a = point(input(a, len, "a")?)?;
        let b = point(input(b, len, "b")?)?;
        let v = pairing(&c.0, &a, &b)?;
        output(out, 1, 1, "out")?[0] = v;
        Ok(())
    })
}

/// Writes the `(n+2)^2` row-major entries of `M_T` or `M_S`.
///
/// # Safety
/// `out` must be valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn polarity_decompose(
    c: *const PolarityCostMatrix,
    factor: PolarityFactor,
    out: *mut f64,
    out_len: usize,
) -> PolarityStatus {
    guard(|| {
        let c = handle(c, "c")?;
        let m = match factor {
            PolarityFactor::T => decompose_t(&c.0)?,
            PolarityFactor::S => decompose_s(&c.0)?,
        };
        let flat = to_row_major(m.matrix());
        output(out, out_len, flat.len(), "out")?.copy_from_slice(&flat);
        Ok(())
    })
}

/// One-dimensional sampled function on strictly increasing `theta`.
/// `gradients` may be null; values may be `+inf`.
///
/// # Safety
/// `theta`, `values` and (when non-null) `gradients` must be valid for `len`
/// reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn polarity_function_new_1d(
    theta: *const f64,
    values: *const f64,
    gradients: *const f64,
    len: usize,
    out: *mut *mut PolarityFunction,
) -> PolarityStatus {
    guard(|| {
        let theta = input(theta, len, "theta")?.to_vec();
        let values = input(values, len, "values")?.to_vec();
        let mut f = SampledFunction::from_1d(theta, values)?;
        if !gradients.is_null() {
            f = f.with_gradients(input(gradients, len, "gradients")?.to_vec())?;
        }
        store(out, PolarityFunction(f))
    })
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polarity_function_free(f: *mut PolarityFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Legendre-Fenchel conjugate of a one-dimensional sampled function at `len`
/// dual points (strictly increasing). `fast` selects the linear-time hull walk.
///
/// # Safety
/// `eta` must be valid for `len` reads and `out` for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn polarity_conjugate_1d(
    f: *const PolarityFunction,
    eta: *const f64,
    len: usize,
    fast: bool,
    out: *mut f64,
) -> PolarityStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let grid = Grid::line(input(eta, len, "eta")?.to_vec())?;
        let conj = conjugate(&f.0, &grid, fast)?;
        output(out, len, len, "out")?.copy_from_slice(conj.dual.values());
        Ok(())
    })
}

/// c-transform `min_i c(theta_i, eta_j) + F(theta_i)` of a one-dimensional
/// function under `c = Cn theta^2 + d eta^2 + e theta eta + f theta + g eta + h`.
///
/// # Safety
/// `eta` must be valid for `len` reads and `out` for `len` writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn polarity_c_transform_1d(
    f: *const PolarityFunction,
    cn: f64,
    d: f64,
    e: f64,
    f_coef: f64,
    g_coef: f64,
    h: f64,
    eta: *const f64,
    len: usize,
    out: *mut f64,
) -> PolarityStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let cost = QuadraticCost::new(
            DMatrix::from_element(1, 1, cn),
            d,
            e,
            vec![f_coef],
            vec![g_coef],
            h,
        )?;
        let grid = Grid::line(input(eta, len, "eta")?.to_vec())?;
        let ct = c_transform(&f.0, &cost, &grid)?;
        output(out, len, len, "out")?.copy_from_slice(ct.values.values());
        Ok(())
    })
}

/// Boundary of the polar of the epigraph of `f` under `c`, one point per
/// finite sample.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn polarity_envelope_new(
    c: *const PolarityCostMatrix,
    f: *const PolarityFunction,
    out: *mut *mut PolarityEnvelope,
) -> PolarityStatus {
    guard(|| {
        let c = handle(c, "c")?;
        let f = handle(f, "f")?;
        let env = polar_boundary_envelope(&c.0, &epigraph_body(&f.0)?)?;
        if let Some(s) = env.skipped.first() {
            return Err(Error::InvalidInput(format!("sample {}: {}", s.index, s.error)).into());
        }
        store(out, PolarityEnvelope { env, n: c.0.n() })
    })
}

/// Number of envelope points. Zero for null.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn polarity_envelope_len(env: *const PolarityEnvelope) -> usize {
    env.as_ref().map_or(0, |e| e.env.points.len())
}

/// Writes the `n+2` homogeneous coordinates of point `i` and whether it lies
/// at infinity. Finite points have last coordinate 1; points at infinity are
/// unit vectors.
///
/// # Safety
/// `coords` must be valid for `coords_len` writes; `ideal` may be null.
#[no_mangle]
pub unsafe extern "C" fn polarity_envelope_point(
    env: *const PolarityEnvelope,
    i: usize,
    coords: *mut f64,
    coords_len: usize,
    ideal: *mut bool,
) -> PolarityStatus {
    guard(|| {
        let env = handle(env, "env")?;
        let p = env.env.points.get(i).ok_or_else(|| {
            Error::InvalidInput(format!(
                "index {i} out of range for {} points",
                env.env.points.len()
            ))
        })?;
        let v = p.point();
        output(coords, coords_len, env.n + 2, "coords")?.copy_from_slice(v.coords());
        if let Some(flag) = ideal.as_mut() {
            *flag = p.ideal;
        }
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polarity_envelope_free(env: *mut PolarityEnvelope) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Polar Fenchel-Young divergence `[a]^T C_L [b]` of two homogeneous points
/// of length `len`, each normalized to last coordinate 1.
///
/// # Safety
/// `a` and `b` must be valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn polarity_polar_fenchel_young(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> PolarityStatus {
    guard(|| {
        let a = point(input(a, len, "a")?)?;
        let b = point(input(b, len, "b")?)?;
        output(out, 1, 1, "out")?[0] = polar_fenchel_young(&a, &b)?;
        Ok(())
    })
}

/// Polar total Fenchel-Young divergence, conformal factor taken at `b`.
///
/// # Safety
/// `a` and `b` must be valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn polarity_polar_total_fenchel_young(
    a: *const f64,
    b: *const f64,
    len: usize,
    variant: PolarityVariant,
    out: *mut f64,
) -> PolarityStatus {
    guard(|| {
        let a = point(input(a, len, "a")?)?;
        let b = point(input(b, len, "b")?)?;
        let variant = match variant {
            PolarityVariant::Sqrt => Variant::Sqrt,
            PolarityVariant::Paper => Variant::Paper,
        };
        output(out, 1, 1, "out")?[0] = polar_total_fenchel_young_with(&a, &b, variant)?;
        Ok(())
    })
}
