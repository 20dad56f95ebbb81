//! C ABI over a trained hydrosense checkpoint and the sensitivity kernels.
//!
//! Every function returns an [`HsStatus`]. On failure the message is
//! available from [`hs_last_error`] on the same thread. Models are opaque
//! [`HsModel`] handles released with [`hs_model_free`]. Model inputs are
//! standardized: `x_s` has `n_static` values and `x_d` is a row-major
//! `steps × n_dynamic` block.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hydrosense::checkpoint::Checkpoint;
use hydrosense::ealstm::{backward, forward};
use hydrosense::sensitivity::{flow_percentiles, normalize_unit};
use hydrosense::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numeric = 5,
    Degenerate = 6,
    Panic = 7,
}

/// A loaded checkpoint.
pub struct HsModel {
    inner: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::Io(_) => HsStatus::Io,
        Error::Load { .. } | Error::Checkpoint(_) => HsStatus::Parse,
        Error::NumericFault { .. } | Error::TrainingFault { .. } | Error::DayFault { .. } => {
            HsStatus::Numeric
        }
        Error::Degenerate { .. } | Error::ZeroVariance(_) => HsStatus::Degenerate,
        _ => HsStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HsStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            return HsStatus::Ok;
        }
        Ok(Err(Fail::Null(what))) => (HsStatus::NullPointer, format!("null pointer: {what}")),
        Ok(Err(Fail::Invalid(msg))) => (HsStatus::InvalidArgument, msg),
        Ok(Err(Fail::Lib(e))) => (status_of(&e), e.to_string()),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (HsStatus::Panic, format!("panic: {msg}"))
        }
    };
    set_last_error(&msg);
    status
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn model<'a>(m: *const HsModel) -> Result<&'a Checkpoint, Fail> {
    m.as_ref().map(|m| &m.inner).ok_or(Fail::Null("model"))
}

fn check_inputs(
    ck: &Checkpoint,
    n_static: usize,
    steps: usize,
    n_dynamic: usize,
) -> Result<(), Fail> {
    let p = &ck.params;
    if n_static != p.n_static() || n_dynamic != p.n_dynamic() {
        return Err(Fail::Invalid(format!(
            "model expects {} static and {} dynamic inputs, got {n_static} and {n_dynamic}",
            p.n_static(),
            p.n_dynamic()
        )));
    }
    if steps == 0 {
        return Err(Fail::Invalid("at least one time step required".into()));
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a checkpoint file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_model_load(path: *const c_char, out: *mut *mut HsModel) -> HsStatus {
    guard(|| {
        if path.is_null() {
            return Err(Fail::Null("path"));
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail::Invalid("path is not UTF-8".into()))?;
        let inner = Checkpoint::load(path)?;
        *out = Box::into_raw(Box::new(HsModel { inner }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`hs_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hs_model_free(model: *mut HsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hidden size, static and dynamic input counts, and lookback length.
/// Any output pointer may be null.
///
/// # Safety
/// `m` must be a live model; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_model_dims(
    m: *const HsModel,
    hidden: *mut usize,
    n_static: *mut usize,
    n_dynamic: *mut usize,
    lookback: *mut usize,
) -> HsStatus {
    guard(|| {
        let ck = model(m)?;
        let p = &ck.params;
        for (ptr, v) in [
            (hidden, p.hidden_size()),
            (n_static, p.n_static()),
            (n_dynamic, p.n_dynamic()),
            (lookback, ck.lookback),
        ] {
            if let Some(slot) = ptr.as_mut() {
                *slot = v;
            }
        }
        Ok(())
    })
}

/// Standardized prediction for one window, written to `*yhat`.
///
/// # Safety
/// Pointers must reference `n_static`, `steps * n_dynamic` and 1 values.
#[no_mangle]
pub unsafe extern "C" fn hs_model_predict(
    m: *const HsModel,
    x_s: *const f64,
    n_static: usize,
    x_d: *const f64,
    steps: usize,
    n_dynamic: usize,
    yhat: *mut f64,
) -> HsStatus {
    guard(|| {
        let ck = model(m)?;
        check_inputs(ck, n_static, steps, n_dynamic)?;
        let x_s = input(x_s, n_static, "x_s")?;
        let x_d = input(x_d, steps * n_dynamic, "x_d")?;
        let out = output(yhat, 1, "yhat")?;
        out[0] = forward(&ck.params, x_s, x_d)?.0;
        Ok(())
    })
}

/// Prediction and its gradient with respect to the standardized static
/// inputs (`n_static` values into `grad`).
///
/// # Safety
/// Pointers must reference `n_static`, `steps * n_dynamic`, 1 and
/// `n_static` values.
#[no_mangle]
pub unsafe extern "C" fn hs_model_static_gradient(
    m: *const HsModel,
    x_s: *const f64,
    n_static: usize,
    x_d: *const f64,
    steps: usize,
    n_dynamic: usize,
    yhat: *mut f64,
    grad: *mut f64,
) -> HsStatus {
    guard(|| {
        let ck = model(m)?;
        check_inputs(ck, n_static, steps, n_dynamic)?;
        let x_s = input(x_s, n_static, "x_s")?;
        let x_d = input(x_d, steps * n_dynamic, "x_d")?;
        let y_out = output(yhat, 1, "yhat")?;
        let g_out = output(grad, n_static, "grad")?;
        let (y, cache) = forward(&ck.params, x_s, x_d)?;
        let grads = backward(&cache, &ck.params, 1.0)?;
        y_out[0] = y;
        g_out.copy_from_slice(&grads.d_xs);
        Ok(())
    })
}

/// 5th and 95th percentiles (linear interpolation between order statistics).
///
/// # Safety
/// `q` must reference `n` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_flow_percentiles(
    q: *const f64,
    n: usize,
    q05: *mut f64,
    q95: *mut f64,
) -> HsStatus {
    guard(|| {
        let q = input(q, n, "q")?;
        if q05.is_null() || q95.is_null() {
            return Err(Fail::Null("q05/q95"));
        }
        let (lo, hi) = flow_percentiles(q)?;
        *q05 = lo;
        *q95 = hi;
        Ok(())
    })
}

/// Min-max scaling of `n` values into `out`. `*degenerate` is set to 1 when
/// all values are equal (the output is then all zeros), else 0.
///
/// # Safety
/// `v` and `out` must reference `n` values; `degenerate` may be null.
#[no_mangle]
pub unsafe extern "C" fn hs_normalize_unit(
    v: *const f64,
    n: usize,
    out: *mut f64,
    degenerate: *mut i32,
) -> HsStatus {
    guard(|| {
        if n == 0 {
            return Err(Fail::Invalid("empty vector".into()));
        }
        let v = input(v, n, "v")?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Fail::Invalid("non-finite value".into()));
        }
        let dst = output(out, n, "out")?;
        let (scaled, flag) = normalize_unit(v);
        dst.copy_from_slice(&scaled);
        if let Some(d) = degenerate.as_mut() {
            *d = i32::from(flag);
        }
        Ok(())
    })
}
