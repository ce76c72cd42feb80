//! C ABI over the `tsp` crate.
//!
//! Tensors and solve results are opaque handles released with their `_free`
//! function. Every fallible call returns a [`TspStatus`]; on failure the
//! message is available from [`tsp_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tsp::algebra::{tprod, TubalMatrix};
use tsp::analysis::rate_report;
use tsp::harness::{SketchChoice, SketchSpec};
use tsp::solver::{solve, spatial_probabilities, Method, ProbRule, RunRecord, SolverConfig};
use tsp::TspError;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotTSpd = 4,
    ImaginaryResidue = 5,
    Diverged = 6,
    Io = 7,
    Parse = 8,
    BufferTooSmall = 9,
    Panic = 99,
}

/// Opaque real tensor of shape m×n×l.
pub struct TspTensor(TubalMatrix);

/// Opaque solve outcome: the solution tensor and its run record.
pub struct TspSolution {
    x: TubalMatrix,
    record: RunRecord,
}

/// Solver options. String fields may be null for their defaults; `q = 0`
/// means ⌈m/τ⌉ and a NaN `theta` means the method default.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct TspSolveOptions {
    /// Method name such as "NTSP" or "ATSP-MD-II".
    pub method: *const c_char,
    /// slice, block, gaussian, fourier-row or fourier-gaussian (default slice).
    pub sketch: *const c_char,
    pub tau: usize,
    pub q: usize,
    /// uniform, slice-norm, sketch-norm or fourier-row-norm (default uniform).
    pub prob: *const c_char,
    pub theta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &TspError) -> TspStatus {
    match e {
        TspError::DimensionMismatch(_) => TspStatus::DimensionMismatch,
        TspError::NotTSpd(_) => TspStatus::NotTSpd,
        TspError::ImaginaryResidue { .. } => TspStatus::ImaginaryResidue,
        TspError::Diverged { .. } => TspStatus::Diverged,
        TspError::Io(_) => TspStatus::Io,
        TspError::Parse(_) | TspError::Json(_) | TspError::Csv(_) => TspStatus::Parse,
        _ => TspStatus::InvalidArgument,
    }
}

enum Failure {
    Status(TspStatus, String),
    Tsp(TspError),
}

impl From<TspError> for Failure {
    fn from(e: TspError) -> Self {
        Failure::Tsp(e)
    }
}

fn null() -> Failure {
    Failure::Status(TspStatus::NullPointer, "null pointer argument".into())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> TspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TspStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Tsp(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TspStatus::Panic
        }
    }
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Status(TspStatus::InvalidArgument, "string is not UTF-8".into()))
}

unsafe fn tensor<'a>(p: *const TspTensor) -> Result<&'a TubalMatrix, Failure> {
    p.as_ref().map(|t| &t.0).ok_or_else(null)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn tsp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates an m×n×l tensor from `len = m·n·l` entries in row-major (i, j, k) order.
///
/// # Safety
/// `data` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsp_tensor_new(
    m: usize,
    n: usize,
    l: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut TspTensor,
) -> TspStatus {
    guard(|| {
        if data.is_null() {
            return Err(null());
        }
        if m.checked_mul(n).and_then(|v| v.checked_mul(l)) != Some(len) {
            return Err(Failure::Status(TspStatus::DimensionMismatch, format!("{len} entries for {m}x{n}x{l}")));
        }
        let src = std::slice::from_raw_parts(data, len);
        let t = TubalMatrix::from_fn(m, n, l, |i, j, k| src[(i * n + j) * l + k]);
        put(out, TspTensor(t))
    })
}

/// Reads a `.tns` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsp_tensor_load(path: *const c_char, out: *mut *mut TspTensor) -> TspStatus {
    guard(|| {
        let p = opt_str(path)?.ok_or_else(null)?;
        put(out, TspTensor(tsp::io::load_tensor(Path::new(p))?))
    })
}

/// Writes a `.tns` file.
///
/// # Safety
/// `t` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tsp_tensor_save(t: *const TspTensor, path: *const c_char) -> TspStatus {
    guard(|| {
        let p = opt_str(path)?.ok_or_else(null)?;
        Ok(tsp::io::save_tensor(Path::new(p), tensor(t)?)?)
    })
}

/// Writes the shape into the three out-parameters.
///
/// # Safety
/// `t` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsp_tensor_dims(t: *const TspTensor, m: *mut usize, n: *mut usize, l: *mut usize) -> TspStatus {
    guard(|| {
        if m.is_null() || n.is_null() || l.is_null() {
            return Err(null());
        }
        (*m, *n, *l) = tensor(t)?.dims();
        Ok(())
    })
}

/// Copies the entries in row-major (i, j, k) order into `buf` of capacity `len`.
///
/// # Safety
/// `t` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tsp_tensor_copy(t: *const TspTensor, buf: *mut f64, len: usize) -> TspStatus {
    guard(|| {
        let x = tensor(t)?;
        if buf.is_null() {
            return Err(null());
        }
        let (m, n, l) = x.dims();
        if len < m * n * l {
            return Err(Failure::Status(TspStatus::BufferTooSmall, format!("need {} entries, got {len}", m * n * l)));
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        for i in 0..m {
            for j in 0..n {
                for k in 0..l {
                    dst[(i * n + j) * l + k] = x.get(i, j, k);
                }
            }
        }
        Ok(())
    })
}

/// Releases a tensor; null is ignored.
///
/// # Safety
/// `t` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tsp_tensor_free(t: *mut TspTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// out = a ∗ b.
///
/// # Safety
/// `a`, `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsp_tprod(a: *const TspTensor, b: *const TspTensor, out: *mut *mut TspTensor) -> TspStatus {
    guard(|| put(out, TspTensor(tprod(tensor(a)?, tensor(b)?)?)))
}

/// Options with every field at its default (NTSP, slice sketches, tol 1e-6).
#[no_mangle]
pub extern "C" fn tsp_solve_options_default() -> TspSolveOptions {
    TspSolveOptions {
        method: ptr::null(),
        sketch: ptr::null(),
        tau: 1,
        q: 0,
        prob: ptr::null(),
        theta: f64::NAN,
        tol: 1e-6,
        max_iters: 100_000,
        seed: 0,
    }
}

unsafe fn sketch_spec(o: &TspSolveOptions) -> Result<SketchSpec, Failure> {
    let kind: SketchChoice = opt_str(o.sketch)?.unwrap_or("slice").parse()?;
    Ok(SketchSpec { kind, tau: o.tau.max(1), q: (o.q > 0).then_some(o.q) })
}

unsafe fn prob_rule(o: &TspSolveOptions) -> Result<ProbRule, Failure> {
    Ok(opt_str(o.prob)?.unwrap_or("uniform").parse()?)
}

/// Solves a ∗ X = b. `truth` may be null; ε is then the relative residual.
///
/// # Safety
/// Handles must be live, `opts` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsp_solve(
    a: *const TspTensor,
    b: *const TspTensor,
    truth: *const TspTensor,
    opts: *const TspSolveOptions,
    out: *mut *mut TspSolution,
) -> TspStatus {
    guard(|| {
        let (a, b) = (tensor(a)?, tensor(b)?);
        let truth = truth.as_ref().map(|t| &t.0);
        let o = opts.as_ref().ok_or_else(null)?;
        let method: Method = opt_str(o.method)?.unwrap_or("NTSP").parse()?;
        let set = sketch_spec(o)?.build(a.rows(), a.depth(), o.seed)?;
        let mut config = SolverConfig::new(method, set);
        config.prob = prob_rule(o)?;
        config.theta = (!o.theta.is_nan()).then_some(o.theta);
        config.tol_rel_err = o.tol;
        config.max_iters = o.max_iters;
        config.seed = o.seed;
        let s = solve(a, b, truth, &config)?;
        put(out, TspSolution { x: s.x, record: s.record })
    })
}

/// Copies the solution into a new tensor handle.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsp_solution_x(s: *const TspSolution, out: *mut *mut TspTensor) -> TspStatus {
    guard(|| put(out, TspTensor(s.as_ref().ok_or_else(null)?.x.clone())))
}

/// Iterations run, final ε, and whether the stopping tolerance was met.
///
/// # Safety
/// `s` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsp_solution_summary(
    s: *const TspSolution,
    iterations: *mut usize,
    epsilon: *mut f64,
    converged: *mut bool,
) -> TspStatus {
    guard(|| {
        let r = &s.as_ref().ok_or_else(null)?.record;
        if !iterations.is_null() {
            *iterations = r.iterations;
        }
        if !epsilon.is_null() {
            *epsilon = r.final_epsilon();
        }
        if !converged.is_null() {
            *converged = r.converged();
        }
        Ok(())
    })
}

/// Writes the iteration trace as CSV.
///
/// # Safety
/// `s` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tsp_solution_write_trace(s: *const TspSolution, path: *const c_char) -> TspStatus {
    guard(|| {
        let r = &s.as_ref().ok_or_else(null)?.record;
        let p = opt_str(path)?.ok_or_else(null)?;
        Ok(r.write_csv(std::fs::File::create(p).map_err(TspError::from)?)?)
    })
}

/// Releases a solution; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tsp_solution_free(s: *mut TspSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Rate constants of the spatial family described by `opts` (method ignored),
/// as a JSON string released with [`tsp_string_free`]. Q is the identity.
///
/// # Safety
/// `a` must be a live handle, `opts` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsp_rate_report_json(
    a: *const TspTensor,
    opts: *const TspSolveOptions,
    samples: usize,
    out: *mut *mut c_char,
) -> TspStatus {
    guard(|| {
        let a = tensor(a)?;
        let o = opts.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let weight = tsp::algebra::WeightQ::identity(a.cols(), a.depth());
        let set = sketch_spec(o)?.build(a.rows(), a.depth(), o.seed)?;
        let p = spatial_probabilities(a, Some(&weight), &set, &prob_rule(o)?)?;
        let theta = if o.theta.is_nan() { 0.5 } else { o.theta };
        let report = rate_report(a, &weight, &set, &p, theta, samples, o.seed)?;
        let json = serde_json::to_string(&report).map_err(TspError::from)?;
        *out = CString::new(json).map_err(|e| Failure::Status(TspStatus::Parse, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tsp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
