//! C ABI for `robex`.
//!
//! Models are opaque handles created by `robex_model_load` or
//! `robex_model_from_json` and released with `robex_model_free`. Every
//! fallible call returns a `RobexStatus`; on failure the message is kept
//! per thread and can be read with `robex_last_error`. Output arrays are
//! caller-allocated with the length given alongside.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use robex::attack::{min_perturbation, AttackConfig, AttackGoal, FeatureSet};
use robex::criteria::auc;
use robex::explain::{eg_attr, grad_attr, ig_attr, loo_attr, random_attr};
use robex::{Error, Model};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobexStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad value or buffer length.
    InvalidArgument = 2,
    /// Unreadable file or malformed model text.
    Io = 3,
    Numeric = 4,
    Panic = 5,
}

/// Attribution methods available through the C ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobexMethod {
    Grad = 0,
    /// Uses `baseline` and `steps`.
    Ig = 1,
    /// Uses `baseline` as the reference value.
    Loo = 2,
    /// Uses `seed`.
    Random = 3,
    /// Uses `baseline` as a single background point, `steps` samples and `seed`.
    Eg = 4,
}

/// Opaque model handle.
pub struct RobexModel {
    inner: Model,
}

/// Attack settings; `robex_attack_config_default` fills in the defaults.
/// A non-positive `eps_cap` means `2·√d`; `use_clip` enables the box.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RobexAttackConfig {
    pub step_size: f64,
    pub num_steps: u32,
    pub binsearch_iters: u32,
    pub eps_cap: f64,
    pub use_clip: bool,
    pub clip_lo: f64,
    pub clip_hi: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RobexStatus {
    match err {
        Error::Io { .. } | Error::Parse { .. } => RobexStatus::Io,
        Error::Numeric(_) => RobexStatus::Numeric,
        _ => RobexStatus::InvalidArgument,
    }
}

struct Fail(RobexStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RobexStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RobexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RobexStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RobexStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(model: *const RobexModel) -> Result<&'a Model, Fail> {
    model.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn input<'a>(ptr: *const f64, len: usize, want: usize, what: &str) -> Result<&'a [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err(Error::Dimension {
            what: what.into(),
            expected: want,
            got: len,
        }
        .into());
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, want: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len < want {
        return Err(Error::Dimension {
            what: what.into(),
            expected: want,
            got: len,
        }
        .into());
    }
    Ok(slice::from_raw_parts_mut(ptr, want))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Fail(RobexStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn publish(model: Model, out: *mut *mut RobexModel) {
    *out = Box::into_raw(Box::new(RobexModel { inner: model }));
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn robex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model JSON file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn robex_model_load(path: *const c_char, out: *mut *mut RobexModel) -> RobexStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = Model::load(Path::new(text(path, "path")?))?;
        publish(model, out);
        Ok(())
    })
}

/// Parses model JSON text into `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn robex_model_from_json(json: *const c_char, out: *mut *mut RobexModel) -> RobexStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = Model::from_json(text(json, "json")?, Path::new("<memory>"))?;
        publish(model, out);
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn robex_model_free(model: *mut RobexModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn robex_model_input_dim(model: *const RobexModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_dim())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn robex_model_num_classes(model: *const RobexModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_classes())
}

/// Writes the logits of `x` into `logits` (capacity `logits_len`).
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn robex_model_forward(
    model: *const RobexModel,
    x: *const f64,
    x_len: usize,
    logits: *mut f64,
    logits_len: usize,
) -> RobexStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = input(x, x_len, m.input_dim(), "x")?;
        let out = output(logits, logits_len, m.num_classes(), "logits")?;
        out.copy_from_slice(&m.forward(x)?);
        Ok(())
    })
}

/// Writes the predicted class of `x` into `*class_out`.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn robex_model_predict(
    model: *const RobexModel,
    x: *const f64,
    x_len: usize,
    class_out: *mut usize,
) -> RobexStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = input(x, x_len, m.input_dim(), "x")?;
        if class_out.is_null() {
            return Err(null("class_out"));
        }
        *class_out = m.predict(x)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn robex_attack_config_default() -> RobexAttackConfig {
    let d = AttackConfig::default();
    RobexAttackConfig {
        step_size: d.step_size,
        num_steps: d.num_steps as u32,
        binsearch_iters: d.binsearch_iters as u32,
        eps_cap: 0.0,
        use_clip: false,
        clip_lo: 0.0,
        clip_hi: 1.0,
    }
}

impl From<&RobexAttackConfig> for AttackConfig {
    fn from(c: &RobexAttackConfig) -> Self {
        AttackConfig {
            step_size: c.step_size,
            num_steps: c.num_steps as usize,
            binsearch_iters: c.binsearch_iters as usize,
            eps_cap: (c.eps_cap > 0.0).then_some(c.eps_cap),
            clip_box: c.use_clip.then_some((c.clip_lo, c.clip_hi)),
            ..AttackConfig::default()
        }
    }
}

/// Smallest L2 perturbation found on the features `subset[0..subset_len]`
/// that changes the prediction of `x` (`target < 0`) or makes `target` the
/// prediction. Writes the norm, success and cap flags, and optionally the
/// perturbation (`delta_out` may be null).
///
/// # Safety
/// Pointers must be valid for the given lengths; `config` may be null for
/// defaults.
#[no_mangle]
pub unsafe extern "C" fn robex_min_perturbation(
    model: *const RobexModel,
    x: *const f64,
    x_len: usize,
    subset: *const usize,
    subset_len: usize,
    target: i64,
    config: *const RobexAttackConfig,
    norm_out: *mut f64,
    success_out: *mut bool,
    capped_out: *mut bool,
    delta_out: *mut f64,
    delta_len: usize,
) -> RobexStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = input(x, x_len, m.input_dim(), "x")?;
        if subset.is_null() && subset_len > 0 {
            return Err(null("subset"));
        }
        let idx = if subset_len == 0 {
            Vec::new()
        } else {
            slice::from_raw_parts(subset, subset_len).to_vec()
        };
        let s = FeatureSet::new(idx, m.input_dim())?;
        let goal = if target < 0 {
            AttackGoal::Untargeted {
                original: m.predict(x)?,
            }
        } else {
            AttackGoal::Targeted {
                target: target as usize,
            }
        };
        let cfg = config.as_ref().map_or_else(AttackConfig::default, AttackConfig::from);
        let r = min_perturbation(m, x, &s, goal, &cfg)?;
        if norm_out.is_null() {
            return Err(null("norm_out"));
        }
        *norm_out = r.norm;
        if !success_out.is_null() {
            *success_out = r.success;
        }
        if !capped_out.is_null() {
            *capped_out = r.capped;
        }
        if !delta_out.is_null() {
            output(delta_out, delta_len, m.input_dim(), "delta_out")?.copy_from_slice(&r.delta);
        }
        Ok(())
    })
}

/// Attribution scores of `x` under `method`. `baseline` (length `x_len`) is
/// required by IG, LOO and EG and ignored otherwise. `ranking_out` may be
/// null; when given it receives feature indices, most relevant first.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn robex_attribution(
    model: *const RobexModel,
    method: RobexMethod,
    x: *const f64,
    x_len: usize,
    baseline: *const f64,
    steps: usize,
    seed: u64,
    scores_out: *mut f64,
    scores_len: usize,
    ranking_out: *mut usize,
    ranking_len: usize,
) -> RobexStatus {
    guard(|| {
        let m = model_ref(model)?;
        let d = m.input_dim();
        let x = input(x, x_len, d, "x")?;
        let base = || input(baseline, x_len, d, "baseline");
        let attr = match method {
            RobexMethod::Grad => grad_attr(m, x)?,
            RobexMethod::Ig => ig_attr(m, x, base()?, steps)?,
            RobexMethod::Loo => loo_attr(m, x, base()?)?,
            RobexMethod::Random => random_attr(d, seed)?,
            RobexMethod::Eg => eg_attr(m, x, &[base()?.to_vec()], steps, seed)?,
        };
        output(scores_out, scores_len, d, "scores_out")?.copy_from_slice(attr.scores());
        if !ranking_out.is_null() {
            if ranking_len < d {
                return Err(Error::Dimension {
                    what: "ranking_out".into(),
                    expected: d,
                    got: ranking_len,
                }
                .into());
            }
            slice::from_raw_parts_mut(ranking_out, d).copy_from_slice(attr.ranking());
        }
        Ok(())
    })
}

/// Trapezoidal area under the curve through `(xs[i], ys[i])`.
///
/// # Safety
/// `xs` and `ys` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn robex_auc(xs: *const f64, ys: *const f64, len: usize, out: *mut f64) -> RobexStatus {
    guard(|| {
        let xs = input(xs, len, len, "xs")?;
        let ys = input(ys, len, len, "ys")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        *out = auc(&points)?;
        Ok(())
    })
}
