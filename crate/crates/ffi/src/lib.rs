//! C ABI over the `dectext` library.
//!
//! Every fallible function returns a `DtStatus`. On failure a message is
//! kept per thread and read back with `dt_last_error_message`. Objects
//! cross the boundary as opaque handles that the caller frees with the
//! matching `*_free` function. Panics never unwind into C; they surface as
//! `DtStatus::Panic`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use dectext::cluster::kmeans;
use dectext::config::CliConfig;
use dectext::embed::{load_embeddings, EmbeddingSet};
use dectext::linalg::Matrix;
use dectext::losses::soft_assign;
use dectext::metrics::{clustering_accuracy, nmi};
use dectext::trainer::{train, RunResult};
use dectext::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numeric = 5,
    Panic = 6,
}

/// An embedding matrix with its document ids.
pub struct DtEmbeddings(EmbeddingSet);

/// The outcome of one training run.
pub struct DtRunResult(RunResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DtStatus {
    match e {
        Error::Io { .. } => DtStatus::Io,
        Error::Parse { .. }
        | Error::BadMagic
        | Error::TruncatedPayload
        | Error::CountMismatch { .. }
        | Error::Config(_)
        | Error::Json(_)
        | Error::Csv(_) => DtStatus::Format,
        Error::NonFiniteRow { .. }
        | Error::NonFinite { .. }
        | Error::Diverged { .. }
        | Error::EmptySoftCluster { .. }
        | Error::ZeroVector
        | Error::ZeroVectorCosine => DtStatus::Numeric,
        _ => DtStatus::InvalidArgument,
    }
}

struct Fail(DtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DtStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(DtStatus::InvalidArgument, msg.into())
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            DtStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            DtStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next `dt_*` call on the same thread.
#[no_mangle]
pub extern "C" fn dt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads an `EMB1` file.
#[no_mangle]
pub unsafe extern "C" fn dt_embeddings_load(path: *const c_char, out: *mut *mut DtEmbeddings) -> DtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let set = load_embeddings(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(DtEmbeddings(set)));
        Ok(())
    })
}

/// Copies `n·d` row-major values; ids become `0..n`.
#[no_mangle]
pub unsafe extern "C" fn dt_embeddings_from_rows(
    data: *const f32,
    n: usize,
    d: usize,
    out: *mut *mut DtEmbeddings,
) -> DtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let len = n.checked_mul(d).ok_or_else(|| invalid("n·d overflows"))?;
        let values = slice_arg(data, len, "data")?.to_vec();
        let set = EmbeddingSet::new(n, d, values, (0..n as u64).collect())?;
        *out = Box::into_raw(Box::new(DtEmbeddings(set)));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dt_embeddings_n(e: *const DtEmbeddings) -> usize {
    e.as_ref().map_or(0, |e| e.0.n())
}

/// Row width, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dt_embeddings_d(e: *const DtEmbeddings) -> usize {
    e.as_ref().map_or(0, |e| e.0.d())
}

#[no_mangle]
pub unsafe extern "C" fn dt_embeddings_free(e: *mut DtEmbeddings) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Clustering accuracy and NMI of `n` predicted labels against the truth.
#[no_mangle]
pub unsafe extern "C" fn dt_evaluate(
    pred: *const usize,
    truth: *const usize,
    n: usize,
    acc_out: *mut f64,
    nmi_out: *mut f64,
) -> DtStatus {
    guard(|| {
        let pred = slice_arg(pred, n, "pred")?;
        let truth = slice_arg(truth, n, "truth")?;
        let acc_out = out_arg(acc_out, "acc_out")?;
        let nmi_out = out_arg(nmi_out, "nmi_out")?;
        *acc_out = clustering_accuracy(pred, truth)?.0;
        *nmi_out = nmi(pred, truth)?;
        Ok(())
    })
}

/// Seeded K-means. Writes `n` labels and, when `centroids_out` is not null,
/// `k·d` centroid values.
#[no_mangle]
pub unsafe extern "C" fn dt_kmeans(
    e: *const DtEmbeddings,
    k: usize,
    max_iter: usize,
    seed: u64,
    labels_out: *mut usize,
    centroids_out: *mut f64,
) -> DtStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("embeddings"))?;
        if labels_out.is_null() {
            return Err(null("labels_out"));
        }
        let (c, a) = kmeans(&e.0.to_matrix(), k, max_iter, seed)?;
        slice::from_raw_parts_mut(labels_out, a.labels.len()).copy_from_slice(&a.labels);
        if !centroids_out.is_null() {
            let flat = c.matrix.as_slice();
            slice::from_raw_parts_mut(centroids_out, flat.len()).copy_from_slice(flat);
        }
        Ok(())
    })
}

/// Student-t soft assignment of `n` rows of width `d` to `k` centroids.
/// Writes `n·k` probabilities, row-major.
#[no_mangle]
pub unsafe extern "C" fn dt_soft_assign(
    embeddings: *const f64,
    n: usize,
    d: usize,
    centroids: *const f64,
    k: usize,
    alpha: f64,
    q_out: *mut f64,
) -> DtStatus {
    guard(|| {
        let len_e = n.checked_mul(d).ok_or_else(|| invalid("n·d overflows"))?;
        let len_c = k.checked_mul(d).ok_or_else(|| invalid("k·d overflows"))?;
        let e = Matrix::from_vec(n, d, slice_arg(embeddings, len_e, "embeddings")?.to_vec())?;
        let c = Matrix::from_vec(k, d, slice_arg(centroids, len_c, "centroids")?.to_vec())?;
        if q_out.is_null() {
            return Err(null("q_out"));
        }
        let q = soft_assign(&e, &c, alpha)?;
        slice::from_raw_parts_mut(q_out, n * k).copy_from_slice(q.q.as_slice());
        Ok(())
    })
}

/// Trains from a TOML config (same keys as the command-line tool). Relative
/// data paths resolve against the working directory.
#[no_mangle]
pub unsafe extern "C" fn dt_train_toml(config_toml: *const c_char, out: *mut *mut DtRunResult) -> DtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = CliConfig::from_toml(str_arg(config_toml, "config_toml")?)?;
        let input = cfg.load_input()?;
        let result = train(&cfg.train, &input)?;
        *out = Box::into_raw(Box::new(DtRunResult(result)));
        Ok(())
    })
}

/// Final accuracy and NMI. Fails with `InvalidArgument` when the run had no labels.
#[no_mangle]
pub unsafe extern "C" fn dt_run_result_metrics(r: *const DtRunResult, acc_out: *mut f64, nmi_out: *mut f64) -> DtStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        let report = r.0.report.as_ref().ok_or_else(|| invalid("run had no ground-truth labels"))?;
        *out_arg(acc_out, "acc_out")? = report.acc;
        *out_arg(nmi_out, "nmi_out")? = report.nmi;
        Ok(())
    })
}

/// Number of labelled inputs, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dt_run_result_len(r: *const DtRunResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.labels.len())
}

/// Number of epochs recorded, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dt_run_result_epochs(r: *const DtRunResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.trace.len())
}

/// Copies the final labels; `capacity` must be at least `dt_run_result_len`.
#[no_mangle]
pub unsafe extern "C" fn dt_run_result_labels(r: *const DtRunResult, labels_out: *mut usize, capacity: usize) -> DtStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        let labels = &r.0.labels;
        if capacity < labels.len() {
            return Err(invalid(format!("capacity {capacity} < {} labels", labels.len())));
        }
        if labels_out.is_null() {
            return Err(null("labels_out"));
        }
        slice::from_raw_parts_mut(labels_out, labels.len()).copy_from_slice(labels);
        Ok(())
    })
}

/// The run as JSON with sorted keys. Free the string with `dt_string_free`.
#[no_mangle]
pub unsafe extern "C" fn dt_run_result_json(r: *const DtRunResult, out: *mut *mut c_char) -> DtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        let json = CString::new(r.0.to_json()?).map_err(|_| invalid("json contains NUL"))?;
        *out = json.into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dt_run_result_free(r: *mut DtRunResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

#[no_mangle]
pub unsafe extern "C" fn dt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
