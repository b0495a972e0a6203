//! C interface to hashgen: text cleaning, checkpoint inference and the
//! sentence-level metrics.
//!
//! Every fallible function returns an [`HgStatus`]. On failure a message is
//! kept per thread and can be read with [`hg_last_error_message`]. Strings
//! returned through `char **` out-parameters are owned by the caller and must
//! be released with [`hg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hashgen::checkpoint::{Checkpoint, ModelKind};
use hashgen::corpus::clean::tokens;
use hashgen::corpus::clean_text;
use hashgen::evalmetrics::{bleu, descriptive_stats, meteor};
use hashgen::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    InvalidData = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HgModelKind {
    BilstmSeq2seq = 0,
    MaskedLm = 1,
}

/// Mean, sample standard deviation and %CV of a list of values.
/// `has_cv` is 0 when the mean is zero, in which case `cv_percent` is NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HgDescriptive {
    pub n: usize,
    pub mean: c_double,
    pub sd: c_double,
    pub cv_percent: c_double,
    pub has_cv: i32,
}

/// A loaded checkpoint. Opaque to C.
pub struct HgModel {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(HgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => HgStatus::Io,
            Error::InvalidArgument(_) | Error::AlreadyExists(_) => HgStatus::InvalidArgument,
            _ => HgStatus::InvalidData,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("panic: {msg}"));
            HgStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(HgStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(HgStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(HgStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure(HgStatus::InvalidData, format!("output contains NUL: {e}")))
}

/// Message for the last failed call on this thread, or NULL if the last call
/// succeeded. The pointer stays valid until the next hg_* call on the thread.
#[no_mangle]
pub extern "C" fn hg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn hg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Normalize a raw review or title: lowercase, punctuation split into
/// separate tokens, single spaces.
///
/// # Safety
/// `raw` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hg_clean_text(raw: *const c_char, out: *mut *mut c_char) -> HgStatus {
    guard(|| {
        check_out(out, "out")?;
        let raw = read_str(raw, "raw")?;
        *out = to_c_string(clean_text(raw))?;
        Ok(())
    })
}

/// Load a checkpoint file written by `hashgen train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer. On
/// success `*out` must later be released with [`hg_model_free`].
#[no_mangle]
pub unsafe extern "C" fn hg_model_load(path: *const c_char, out: *mut *mut HgModel) -> HgStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let path = read_str(path, "path")?;
        let checkpoint = Checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(HgModel { checkpoint }));
        Ok(())
    })
}

/// Release a model. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a live pointer from [`hg_model_load`].
#[no_mangle]
pub unsafe extern "C" fn hg_model_free(model: *mut HgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live pointer from [`hg_model_load`] and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hg_model_kind(model: *const HgModel, out: *mut HgModelKind) -> HgStatus {
    guard(|| {
        check_out(out, "out")?;
        let model = model
            .as_ref()
            .ok_or(Failure(HgStatus::NullPointer, "model is null".into()))?;
        *out = match model.checkpoint.kind() {
            ModelKind::BilstmSeq2seq => HgModelKind::BilstmSeq2seq,
            ModelKind::MaskedLm => HgModelKind::MaskedLm,
        };
        Ok(())
    })
}

/// Greedy title for a raw review. The review is cleaned first. The model may
/// be shared between threads.
///
/// # Safety
/// `model` must be a live pointer from [`hg_model_load`], `review` a
/// NUL-terminated string and `out` valid. `*out` must be released with
/// [`hg_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hg_model_predict(
    model: *const HgModel,
    review: *const c_char,
    out: *mut *mut c_char,
) -> HgStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ptr::null_mut();
        let model = model
            .as_ref()
            .ok_or(Failure(HgStatus::NullPointer, "model is null".into()))?;
        let review = read_str(review, "review")?;
        *out = to_c_string(model.checkpoint.predict_title(review)?)?;
        Ok(())
    })
}

unsafe fn pair_metric(
    hyp: *const c_char,
    reference: *const c_char,
    out: *mut c_double,
    f: fn(&[&str], &[&str]) -> f64,
) -> HgStatus {
    guard(|| {
        check_out(out, "out")?;
        let hyp = read_str(hyp, "hyp")?;
        let reference = read_str(reference, "reference")?;
        let h: Vec<&str> = tokens(hyp).collect();
        let r: Vec<&str> = tokens(reference).collect();
        *out = f(&h, &r);
        Ok(())
    })
}

/// Sentence BLEU of a cleaned hypothesis against a cleaned reference.
///
/// # Safety
/// `hyp` and `reference` must be NUL-terminated strings and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hg_bleu(
    hyp: *const c_char,
    reference: *const c_char,
    out: *mut c_double,
) -> HgStatus {
    pair_metric(hyp, reference, out, |h, r| bleu(h, r))
}

/// Exact-match METEOR of a cleaned hypothesis against a cleaned reference.
///
/// # Safety
/// `hyp` and `reference` must be NUL-terminated strings and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hg_meteor(
    hyp: *const c_char,
    reference: *const c_char,
    out: *mut c_double,
) -> HgStatus {
    pair_metric(hyp, reference, out, |h, r| meteor(h, r))
}

/// # Safety
/// `values` must point to `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hg_descriptive_stats(
    values: *const c_double,
    n: usize,
    out: *mut HgDescriptive,
) -> HgStatus {
    guard(|| {
        check_out(out, "out")?;
        if values.is_null() && n > 0 {
            return Err(Failure(HgStatus::NullPointer, "values is null".into()));
        }
        let values = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(values, n)
        };
        let d = descriptive_stats(values)?;
        *out = HgDescriptive {
            n: d.n,
            mean: d.mean,
            sd: d.sd,
            cv_percent: d.cv_percent.unwrap_or(f64::NAN),
            has_cv: i32::from(d.cv_percent.is_some()),
        };
        Ok(())
    })
}
