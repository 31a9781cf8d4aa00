//! C interface to `aprank`.
//!
//! Tensors and decompositions cross the boundary as opaque handles created
//! by the `*_from_json` and algorithm functions and released with the
//! matching `*_free`. Every fallible call returns an [`AprankStatus`]; on
//! failure [`aprank_last_error`] describes what went wrong on the calling
//! thread. Strings returned by the library are freed with
//! [`aprank_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aprank::energy::{decompose_energy, EnergyConfig};
use aprank::frank_wolfe::{fw_decompose, FWConfig};
use aprank::norms::{estimate_lr, LrPolicy, NormKind};
use aprank::search::SearchConfig;
use aprank::sparsify::{maurey_sparsify, SparsifyConfig};
use aprank::tensor::io::{decomposition_from_json, decomposition_to_json, tensor_from_json, tensor_to_json};
use aprank::{AprankError, Decomposition, SymmetricTensor};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AprankStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    ShapeMismatch = 4,
    /// An algorithm could not meet its guarantee (search exhausted,
    /// retries used up, iteration budget reached).
    ContractFailure = 5,
    /// A computation was refused because it would exceed a size budget.
    Budget = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque symmetric tensor.
pub struct AprankTensor {
    inner: SymmetricTensor,
}

/// Opaque list of weighted rank-one terms.
pub struct AprankDecomposition {
    inner: Decomposition,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &AprankError) -> AprankStatus {
    match e {
        AprankError::ShapeMismatch(_) | AprankError::DimensionMismatch { .. } => AprankStatus::ShapeMismatch,
        AprankError::Parse(_) | AprankError::Json(_) => AprankStatus::Parse,
        AprankError::Io(_) => AprankStatus::Io,
        AprankError::ExpansionBudget { .. } | AprankError::CoveringBudget { .. } => AprankStatus::Budget,
        e if e.is_contract_failure() => AprankStatus::ContractFailure,
        _ => AprankStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (AprankStatus, String)>) -> AprankStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AprankStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AprankStatus::Panic
        }
    }
}

trait Check<T> {
    fn check(self) -> Result<T, (AprankStatus, String)>;
}

impl<T> Check<T> for aprank::Result<T> {
    fn check(self) -> Result<T, (AprankStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (AprankStatus, String) {
    (AprankStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (AprankStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (AprankStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_string(out: *mut *mut c_char, s: String) -> Result<(), (AprankStatus, String)> {
    let c = CString::new(s).map_err(|_| (AprankStatus::Panic, "string contains NUL".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aprank_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn aprank_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn aprank_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a tensor from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_tensor_from_json(json: *const c_char, out: *mut *mut AprankTensor) -> AprankStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = tensor_from_json(str_arg(json, "json")?).check()?;
        *out = Box::into_raw(Box::new(AprankTensor { inner: t }));
        Ok(())
    })
}

/// Serializes a tensor; free the result with [`aprank_string_free`].
///
/// # Safety
/// `t` must be a live tensor handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_tensor_to_json(t: *const AprankTensor, out: *mut *mut c_char) -> AprankStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        out_string(out, tensor_to_json(&t.inner).check()?)
    })
}

/// # Safety
/// `t` must be null or a live tensor handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aprank_tensor_free(t: *mut AprankTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of variables and degree.
///
/// # Safety
/// `t` must be a live tensor handle; `n` and `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_tensor_shape(t: *const AprankTensor, n: *mut usize, d: *mut usize) -> AprankStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensor"))?;
        if n.is_null() || d.is_null() {
            return Err(null("out"));
        }
        *n = t.inner.n();
        *d = t.inner.d();
        Ok(())
    })
}

/// Evaluates the tensor's form at `x[0..len]`.
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_tensor_eval(
    t: *const AprankTensor,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> AprankStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensor"))?;
        if x.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        *out = t.inner.eval(std::slice::from_raw_parts(x, len)).check()?;
        Ok(())
    })
}

/// Hilbert–Schmidt norm.
///
/// # Safety
/// `t` must be a live tensor handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_tensor_hs_norm(t: *const AprankTensor, out: *mut f64) -> AprankStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = t.inner.hs_norm();
        Ok(())
    })
}

/// `L_r` norm on the sphere: exact for even `r` when affordable, else Monte
/// Carlo over `samples` points. `std_error` may be null.
///
/// # Safety
/// `t` must be a live tensor handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_tensor_lr_norm(
    t: *const AprankTensor,
    r: f64,
    samples: usize,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> AprankStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensor"))?;
        if value.is_null() {
            return Err(null("value"));
        }
        let policy = LrPolicy {
            samples,
            seed,
            ..Default::default()
        };
        let e = estimate_lr(&t.inner, r, &policy).check()?;
        *value = e.value;
        if !std_error.is_null() {
            *std_error = e.std_error;
        }
        Ok(())
    })
}

/// Parses a decomposition from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_decomposition_from_json(
    json: *const c_char,
    out: *mut *mut AprankDecomposition,
) -> AprankStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = decomposition_from_json(str_arg(json, "json")?).check()?;
        *out = Box::into_raw(Box::new(AprankDecomposition { inner: d }));
        Ok(())
    })
}

/// Serializes a decomposition; free the result with [`aprank_string_free`].
///
/// # Safety
/// `d` must be a live decomposition handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_decomposition_to_json(
    d: *const AprankDecomposition,
    out: *mut *mut c_char,
) -> AprankStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("decomposition"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        out_string(out, decomposition_to_json(&d.inner).check()?)
    })
}

/// # Safety
/// `d` must be null or a live decomposition handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aprank_decomposition_free(d: *mut AprankDecomposition) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of terms.
///
/// # Safety
/// `d` must be a live decomposition handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_decomposition_len(d: *const AprankDecomposition, out: *mut usize) -> AprankStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("decomposition"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = d.inner.len();
        Ok(())
    })
}

/// Sums the terms into a tensor.
///
/// # Safety
/// `d` must be a live decomposition handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_decomposition_materialize(
    d: *const AprankDecomposition,
    out: *mut *mut AprankTensor,
) -> AprankStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("decomposition"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = d.inner.materialize().check()?;
        *out = Box::into_raw(Box::new(AprankTensor { inner: t }));
        Ok(())
    })
}

/// Greedy decomposition with `‖f - f̃‖_r < epsilon`; pass `r = INFINITY` for
/// the sup norm.
///
/// # Safety
/// `t` must be a live tensor handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_decompose_energy(
    t: *const AprankTensor,
    r: f64,
    epsilon: f64,
    samples: usize,
    seed: u64,
    out: *mut *mut AprankDecomposition,
) -> AprankStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = EnergyConfig::from(SearchConfig {
            sample_size: samples,
            seed,
            ..Default::default()
        });
        let res = decompose_energy(&t.inner, r, epsilon, &cfg).check()?;
        *out = Box::into_raw(Box::new(AprankDecomposition {
            inner: res.decomposition,
        }));
        Ok(())
    })
}

/// Maurey sparsification in `norm` ("hs", "l<r>" or "linf").
///
/// # Safety
/// `d` must be a live decomposition handle, `norm` a NUL-terminated string
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_sparsify(
    d: *const AprankDecomposition,
    norm: *const c_char,
    epsilon: f64,
    seed: u64,
    out: *mut *mut AprankDecomposition,
) -> AprankStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("decomposition"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let kind: NormKind = str_arg(norm, "norm")?.parse().check()?;
        let mut cfg = SparsifyConfig::new(kind, epsilon);
        cfg.seed = seed;
        let res = maurey_sparsify(&d.inner, &cfg).check()?;
        *out = Box::into_raw(Box::new(AprankDecomposition {
            inner: res.decomposition,
        }));
        Ok(())
    })
}

/// Frank–Wolfe decomposition with HS error at most `epsilon`, given a guess
/// `nuclear_guess` for the nuclear norm of the tensor.
///
/// # Safety
/// `t` must be a live tensor handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aprank_fw_decompose(
    t: *const AprankTensor,
    epsilon: f64,
    nuclear_guess: f64,
    seed: u64,
    out: *mut *mut AprankDecomposition,
) -> AprankStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = FWConfig::new(epsilon, nuclear_guess);
        cfg.seed = seed;
        let res = fw_decompose(&t.inner, &cfg).check()?;
        *out = Box::into_raw(Box::new(AprankDecomposition {
            inner: res.decomposition,
        }));
        Ok(())
    })
}
