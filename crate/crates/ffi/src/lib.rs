//! C ABI for the fmeasure solvers.
//!
//! Kernels and potentials are opaque handles created by the `fm_kernel_*`
//! and `fm_potential_*` constructors and released with the matching `*_free`. Every fallible call
//! returns an [`FmStatus`]; on failure `fm_last_error` copies a message for
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fmeasure::dyson::dyson_sum_segmented;
use fmeasure::propagate::{fundamental_solution_v, SliceSchedule, SplittingScheme};
use fmeasure::volterra::volterra_solve;
use fmeasure::wiener_mc::{mc_functional, PathFunctional};
use fmeasure::{Error, Field, Potential, SpatialGrid, SymbolTerm, TransitionKernel};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Instability, overflow, a vanishing denominator or a truncation
    /// budget violation.
    NumericFailure = 3,
    /// Output buffer shorter than the grid.
    BufferTooSmall = 4,
    Panic = 5,
}

/// Opaque transition kernel.
pub struct FmKernel(TransitionKernel);

/// Opaque potential.
pub struct FmPotential(Potential);

/// Splitting scheme selector for [`fm_fundamental_solution`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmScheme {
    Lie = 0,
    Strang = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> FmStatus {
    match e {
        Error::InvalidArgument(_)
        | Error::NonPositiveTime(_)
        | Error::NoSymbol
        | Error::UnsampledTime(_)
        | Error::GridMismatch
        | Error::UnboundedComposite(_)
        | Error::Io(_) => FmStatus::InvalidArgument,
        _ => FmStatus::NumericFailure,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), FmStatus>) -> FmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            FmStatus::Panic
        }
    }
}

fn lift<T>(r: fmeasure::Result<T>) -> Result<T, FmStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, FmStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument");
        FmStatus::NullPointer
    })
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, FmStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer");
        FmStatus::NullPointer
    })
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], FmStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        set_error("null array argument");
        return Err(FmStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies a field into caller buffers of length `cap`; `im` may be null.
unsafe fn write_field(f: &Field, re: *mut f64, im: *mut f64, cap: usize) -> Result<(), FmStatus> {
    if re.is_null() {
        set_error("null output buffer");
        return Err(FmStatus::NullPointer);
    }
    if cap < f.len() {
        set_error(format!("buffer holds {cap} values, grid has {}", f.len()));
        return Err(FmStatus::BufferTooSmall);
    }
    let re = std::slice::from_raw_parts_mut(re, f.len());
    for (r, v) in re.iter_mut().zip(f.values()) {
        *r = v.re;
    }
    if !im.is_null() {
        let im = std::slice::from_raw_parts_mut(im, f.len());
        for (i, v) in im.iter_mut().zip(f.values()) {
            *i = v.im;
        }
    }
    Ok(())
}

fn grid(a: f64, b: f64, n: usize) -> Result<SpatialGrid, FmStatus> {
    lift(SpatialGrid::new(a, b, n))
}

unsafe fn emit<T>(value: T, dst: *mut *mut T) -> Result<(), FmStatus> {
    *out(dst)? = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `cap > 0`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fm_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Heat kernel with diffusion coefficient `d`.
///
/// # Safety
/// `kernel` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fm_kernel_heat(d: f64, kernel: *mut *mut FmKernel) -> FmStatus {
    guard(|| emit(FmKernel(lift(TransitionKernel::heat(d))?), kernel))
}

/// Ornstein–Uhlenbeck kernel.
///
/// # Safety
/// `kernel` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fm_kernel_ou(theta: f64, sigma: f64, kernel: *mut *mut FmKernel) -> FmStatus {
    guard(|| {
        emit(
            FmKernel(lift(TransitionKernel::ornstein_uhlenbeck(theta, sigma))?),
            kernel,
        )
    })
}

/// Spectral kernel with multiplier `exp(-t sum coeffs[i] (ik)^orders[i])`.
///
/// # Safety
/// `orders` and `coeffs` must each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn fm_kernel_spectral(
    orders: *const u32,
    coeffs: *const f64,
    len: usize,
    kernel: *mut *mut FmKernel,
) -> FmStatus {
    guard(|| {
        let (o, c) = (slice(orders, len)?, slice(coeffs, len)?);
        let terms = o.iter().zip(c).map(|(&n, &c)| SymbolTerm::new(n, c)).collect();
        emit(FmKernel(lift(TransitionKernel::spectral(terms))?), kernel)
    })
}

/// # Safety
/// `kernel` must be null or a handle from an `fm_kernel_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fm_kernel_free(kernel: *mut FmKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// `p(x, y, t)`; `im` may be null.
///
/// # Safety
/// `kernel` must be a live handle; `re` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_kernel_eval(
    kernel: *const FmKernel,
    x: f64,
    y: f64,
    t: f64,
    re: *mut f64,
    im: *mut f64,
) -> FmStatus {
    guard(|| {
        let z = lift(deref(kernel)?.0.eval(x, y, t))?;
        *out(re)? = z.re;
        if !im.is_null() {
            *im = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `potential` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fm_potential_constant(c: f64, potential: *mut *mut FmPotential) -> FmStatus {
    guard(|| emit(FmPotential(Potential::constant(c)), potential))
}

/// `omega^2 x^2 / 2`.
///
/// # Safety
/// `potential` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fm_potential_harmonic(omega: f64, potential: *mut *mut FmPotential) -> FmStatus {
    guard(|| emit(FmPotential(Potential::harmonic(omega)), potential))
}

/// Piecewise-linear potential through `(xs[i], vs[i])`.
///
/// # Safety
/// `xs` and `vs` must each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn fm_potential_table(
    xs: *const f64,
    vs: *const f64,
    len: usize,
    potential: *mut *mut FmPotential,
) -> FmStatus {
    guard(|| {
        let (x, v) = (slice(xs, len)?.to_vec(), slice(vs, len)?.to_vec());
        emit(FmPotential(lift(Potential::table(x, v))?), potential)
    })
}

/// # Safety
/// `potential` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_potential_free(potential: *mut FmPotential) {
    if !potential.is_null() {
        drop(Box::from_raw(potential));
    }
}

/// Time-sliced column `x -> phi_V(x, y; t)` on the grid `[a, b]` with `n`
/// points, written to `re` / `im` (capacity `cap`).
///
/// # Safety
/// Handles must be live; `re` (and `im` unless null) must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn fm_fundamental_solution(
    kernel: *const FmKernel,
    potential: *const FmPotential,
    a: f64,
    b: f64,
    n: usize,
    y: f64,
    t: f64,
    slices: usize,
    scheme: FmScheme,
    re: *mut f64,
    im: *mut f64,
    cap: usize,
) -> FmStatus {
    guard(|| {
        let (k, v, g) = (deref(kernel)?, deref(potential)?, grid(a, b, n)?);
        let scheme = match scheme {
            FmScheme::Lie => SplittingScheme::Lie,
            FmScheme::Strang => SplittingScheme::Strang,
        };
        let s = lift(SliceSchedule::new(t, slices, scheme))?;
        let f = lift(fundamental_solution_v(&k.0, &v.0, &g, &s, y))?;
        write_field(&f, re, im, cap)
    })
}

/// Volterra-marched column at time `t` with `steps` time steps.
///
/// # Safety
/// As [`fm_fundamental_solution`].
#[no_mangle]
pub unsafe extern "C" fn fm_volterra_solve(
    kernel: *const FmKernel,
    potential: *const FmPotential,
    a: f64,
    b: f64,
    n: usize,
    y: f64,
    t: f64,
    steps: usize,
    re: *mut f64,
    im: *mut f64,
    cap: usize,
) -> FmStatus {
    guard(|| {
        let (k, v, g) = (deref(kernel)?, deref(potential)?, grid(a, b, n)?);
        let state = lift(volterra_solve(&k.0, &v.0, y, t, &g, steps))?;
        write_field(state.last(), re, im, cap)
    })
}

/// Dyson partial sum of order `order` over `segments` segments of `steps`
/// time steps each. `bound` (nullable) receives the L1 remainder bound.
///
/// # Safety
/// As [`fm_fundamental_solution`]; `bound` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn fm_dyson_sum(
    kernel: *const FmKernel,
    potential: *const FmPotential,
    a: f64,
    b: f64,
    n: usize,
    y: f64,
    t: f64,
    order: usize,
    steps: usize,
    segments: usize,
    re: *mut f64,
    im: *mut f64,
    cap: usize,
    bound: *mut f64,
) -> FmStatus {
    guard(|| {
        let (k, v, g) = (deref(kernel)?, deref(potential)?, grid(a, b, n)?);
        let (f, r) = lift(dyson_sum_segmented(&k.0, &v.0, y, t, order, &g, steps, segments))?;
        write_field(&f, re, im, cap)?;
        if !bound.is_null() {
            *bound = r;
        }
        Ok(())
    })
}

/// Bridge Monte Carlo estimate of `phi_V(x, y; t)` for the heat kernel with
/// diffusion `d`.
///
/// # Safety
/// `potential` must be live; `value` and `stderr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_mc_estimate(
    potential: *const FmPotential,
    x: f64,
    y: f64,
    t: f64,
    d: f64,
    n_paths: usize,
    steps: usize,
    seed: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> FmStatus {
    guard(|| {
        let v = deref(potential)?;
        let e = lift(mc_functional(
            x,
            y,
            t,
            d,
            &v.0,
            &PathFunctional::exp_neg(),
            n_paths,
            steps,
            seed,
        ))?;
        *out(value)? = e.value;
        *out(stderr)? = e.stderr;
        Ok(())
    })
}

/// Message of the last error as an owned Rust string, for tests.
#[doc(hidden)]
pub fn last_error_string() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        fm_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}
