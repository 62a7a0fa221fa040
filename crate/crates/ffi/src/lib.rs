//! C interface to the polariton simulator.
//!
//! A model is created from config text and released with
//! [`polariton_model_free`]. Every fallible call returns a
//! [`PolaritonStatus`]; on failure the message is kept per thread and can be
//! copied out with [`polariton_last_error_message`]. Results are written
//! through caller-provided pointers and buffers, so no memory crosses the
//! boundary except the opaque handle.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polariton::analysis::{critical_coupling, critical_coupling_single_mode, InstabilityKind};
use polariton::config::{parse_config_str, RunConfig};
use polariton::response::Model;
use polariton::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolaritonStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid config text or argument.
    InvalidArgument = 2,
    /// A numerical routine failed.
    Numerical = 3,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 4,
    /// The search found no instability below its ceiling.
    NoInstability = 5,
    Panic = 6,
}

/// Classification of the leading instability.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolaritonKind {
    Stable = 0,
    ZeroFrequency = 1,
    FiniteFrequency = 2,
}

/// Opaque model handle.
pub struct PolaritonModel {
    config: RunConfig,
    base: Model,
    coupled: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> PolaritonStatus {
    match e {
        Error::Config { .. } | Error::Domain { .. } => PolaritonStatus::InvalidArgument,
        Error::NoInstability(_) => PolaritonStatus::NoInstability,
        _ => PolaritonStatus::Numerical,
    }
}

/// Run `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (PolaritonStatus, String)>) -> PolaritonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolaritonStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PolaritonStatus::Panic
        }
    }
}

fn fail(e: Error) -> (PolaritonStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PolaritonStatus, String) {
    (PolaritonStatus::NullPointer, format!("{what} is null"))
}

/// Build a model from config text (the same format the command-line tool
/// reads). A `lambda_ratio_sq` coupling is resolved against its threshold
/// here, so this may take a moment for large systems.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polariton_model_from_config(
    text: *const c_char,
    out: *mut *mut PolaritonModel,
) -> PolaritonStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (PolaritonStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let config = parse_config_str(text).map_err(fail)?;
        let base = Model::new(config.spec.clone()).map_err(fail)?;
        let coupled = config.coupled_model(&base).map_err(fail)?;
        *out = Box::into_raw(Box::new(PolaritonModel { config, base, coupled }));
        Ok(())
    })
}

/// Release a model. Null is accepted and ignored.
///
/// # Safety
/// `model` must come from [`polariton_model_from_config`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polariton_model_free(model: *mut PolaritonModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of cavity modes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn polariton_model_n_modes(model: *const PolaritonModel) -> usize {
    model.as_ref().map_or(0, |m| m.coupled.n_modes())
}

/// Coupling strength currently in use.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polariton_model_lambda(model: *const PolaritonModel, out: *mut f64) -> PolaritonStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = m.coupled.spec().lambda;
        Ok(())
    })
}

/// Replace the coupling strength.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn polariton_model_set_lambda(model: *mut PolaritonModel, lambda: f64) -> PolaritonStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.coupled = m.base.with_lambda(lambda).map_err(fail)?;
        Ok(())
    })
}

/// Analytic threshold of a single blue-detuned mode.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polariton_critical_coupling_single_mode(
    delta0: f64,
    kappa: f64,
    out: *mut f64,
) -> PolaritonStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = critical_coupling_single_mode(delta0, kappa).map_err(fail)?;
        Ok(())
    })
}

/// Numerical threshold of the model, ignoring its current coupling.
///
/// `pole_re`/`pole_im` receive the leading pole just above threshold and may
/// be null. A stable system returns `Ok` with kind `Stable` and NaN outputs.
///
/// # Safety
/// `model` must be a live handle; `lambda_c` and `kind` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn polariton_critical_coupling(
    model: *const PolaritonModel,
    lambda_c: *mut f64,
    kind: *mut PolaritonKind,
    pole_re: *mut f64,
    pole_im: *mut f64,
) -> PolaritonStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let lambda_c = lambda_c.as_mut().ok_or_else(|| null("lambda_c"))?;
        let kind = kind.as_mut().ok_or_else(|| null("kind"))?;
        let report = critical_coupling(&m.base, &m.config.critical_options()).map_err(fail)?;
        *lambda_c = report.critical_lambda.unwrap_or(f64::NAN);
        *kind = match report.kind {
            InstabilityKind::Stable => PolaritonKind::Stable,
            InstabilityKind::ZeroFrequency => PolaritonKind::ZeroFrequency,
            InstabilityKind::FiniteFrequency => PolaritonKind::FiniteFrequency,
        };
        let pole = report
            .unstable_pole
            .unwrap_or(num_complex::Complex64::new(f64::NAN, f64::NAN));
        if let Some(re) = pole_re.as_mut() {
            *re = pole.re;
        }
        if let Some(im) = pole_im.as_mut() {
            *im = pole.im;
        }
        Ok(())
    })
}

/// All poles at the current coupling.
///
/// `count` receives the number of poles. If it exceeds `capacity` nothing
/// else is written and `BufferTooSmall` is returned. `mode` may be null; it
/// receives the cavity mode each pole is attributed to.
///
/// # Safety
/// `re`, `im` (and `mode` if non-null) must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn polariton_find_poles(
    model: *const PolaritonModel,
    re: *mut f64,
    im: *mut f64,
    mode: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> PolaritonStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let count = count.as_mut().ok_or_else(|| null("count"))?;
        let poles = m.coupled.find_poles().map_err(fail)?;
        *count = poles.poles.len();
        if poles.poles.len() > capacity {
            return Err((
                PolaritonStatus::BufferTooSmall,
                format!("{} poles need a larger buffer", poles.poles.len()),
            ));
        }
        if re.is_null() || im.is_null() {
            return Err(null("re or im"));
        }
        for (k, p) in poles.poles.iter().enumerate() {
            *re.add(k) = p.omega.re;
            *im.add(k) = p.omega.im;
            if !mode.is_null() {
                *mode.add(k) = p.mode;
            }
        }
        Ok(())
    })
}

/// Entry `(i, j)` of the spectral function at each of `n` real frequencies.
///
/// # Safety
/// `omegas`, `out_re` and `out_im` must hold `n` elements; `out_im` may be null.
#[no_mangle]
pub unsafe extern "C" fn polariton_spectral_function(
    model: *const PolaritonModel,
    omegas: *const f64,
    n: usize,
    i: usize,
    j: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> PolaritonStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if n == 0 {
            return Ok(());
        }
        if omegas.is_null() || out_re.is_null() {
            return Err(null("omegas or out_re"));
        }
        let modes = m.coupled.n_modes();
        if i >= modes || j >= modes {
            return Err((
                PolaritonStatus::InvalidArgument,
                format!("entry ({i}, {j}) outside {modes} modes"),
            ));
        }
        let omegas = std::slice::from_raw_parts(omegas, n);
        for (k, &w) in omegas.iter().enumerate() {
            let a = m.coupled.spectral_entry(w, (i, j)).map_err(fail)?;
            *out_re.add(k) = a.re;
            if !out_im.is_null() {
                *out_im.add(k) = a.im;
            }
        }
        Ok(())
    })
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit) and return its full length in bytes, excluding the NUL.
///
/// # Safety
/// `buf` must hold `len` bytes, or be null to query the length.
#[no_mangle]
pub unsafe extern "C" fn polariton_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn polariton_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
