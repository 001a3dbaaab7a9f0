//! C ABI over `aid-core`.
//!
//! Handles are opaque heap objects released with their matching `*_free`.
//! Every fallible call returns an [`AidStatus`]; on failure the message is
//! available from [`aid_last_error`] on the same thread. Strings returned
//! through out-pointers are owned by the caller and released with
//! [`aid_string_free`]. No function unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use aid_core::classifier::{kl_to_uniform, Checkpoint};
use aid_core::corpus::{generate_synthetic, read_corpus_dir, write_corpus_dir, Corpus, SynthConfig};
use aid_core::experiments::{run_experiment, ExperimentSpec};
use aid_core::types::{EmbeddingVector, FrameSequence};
use aid_core::vc::{knn_convert, Distance, MatchingSet, VcConfig};
use aid_core::{cosine_similarity, AidError};

/// Result of every fallible call. Error codes 2, 3 and 4 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AidStatus {
    Ok = 0,
    /// Invalid configuration or arguments.
    ConfigError = 2,
    /// Malformed, missing or inconsistent data.
    DataError = 3,
    /// Non-finite values or a diverged computation.
    NumericError = 4,
    /// A required pointer was null.
    NullPointer = 10,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 11,
    /// An internal panic was caught at the boundary.
    Panic = 12,
}

/// Frame matching metric for [`aid_knn_convert`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AidDistance {
    Cosine = 0,
    Euclidean = 1,
}

/// Opaque corpus handle.
pub struct AidCorpus {
    inner: Corpus,
}

/// Opaque trained-classifier handle (model plus its label index).
pub struct AidClassifier {
    inner: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &AidError) -> AidStatus {
    match err.exit_code() {
        2 => AidStatus::ConfigError,
        4 => AidStatus::NumericError,
        _ => AidStatus::DataError,
    }
}

enum Failure {
    Core(AidError),
    Status(AidStatus, &'static str),
}

impl From<AidError> for Failure {
    fn from(e: AidError) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

/// Run `f`, translating errors and panics into a status and the last-error slot.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> AidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            AidStatus::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(_) => {
            set_last_error("internal panic");
            AidStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> FfiResult<()> {
    if p.is_null() {
        Err(Failure::Status(AidStatus::NullPointer, what))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> FfiResult<&'a str> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(AidStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &'static str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Row-major `rows x dim` buffer as a frame sequence.
fn from_rows(data: &[f64], rows: usize, dim: usize) -> aid_core::Result<FrameSequence> {
    let nested: Vec<Vec<f64>> = if dim == 0 {
        vec![Vec::new(); rows]
    } else {
        data.chunks(dim).map(<[f64]>::to_vec).collect()
    };
    FrameSequence::from_rows(&nested)
}

/// Message for the most recent failed call on this thread ("" after a success).
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn aid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn aid_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generate a synthetic corpus from generator TOML (null or "" for defaults).
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aid_corpus_generate(config_toml: *const c_char, out: *mut *mut AidCorpus) -> AidStatus {
    guard(|| {
        non_null(out, "out is null")?;
        let cfg: SynthConfig = if config_toml.is_null() {
            SynthConfig::default()
        } else {
            toml::from_str(str_arg(config_toml, "config")?)
                .map_err(|e| AidError::Config(format!("generator config: {e}")))?
        };
        let corpus = generate_synthetic(&cfg)?;
        *out = Box::into_raw(Box::new(AidCorpus { inner: corpus }));
        Ok(())
    })
}

/// Read a corpus directory (manifest, feature store, optional factor table).
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aid_corpus_read(dir: *const c_char, out: *mut *mut AidCorpus) -> AidStatus {
    guard(|| {
        non_null(out, "out is null")?;
        let corpus = read_corpus_dir(Path::new(str_arg(dir, "dir is null")?))?;
        *out = Box::into_raw(Box::new(AidCorpus { inner: corpus }));
        Ok(())
    })
}

/// Write a corpus directory.
///
/// # Safety
/// `corpus` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn aid_corpus_write(corpus: *const AidCorpus, dir: *const c_char) -> AidStatus {
    guard(|| {
        non_null(corpus, "corpus is null")?;
        write_corpus_dir(&(*corpus).inner, Path::new(str_arg(dir, "dir is null")?))?;
        Ok(())
    })
}

/// Number of utterances (0 for null).
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aid_corpus_len(corpus: *const AidCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// Feature dimension (0 for null or empty).
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aid_corpus_dim(corpus: *const AidCorpus) -> usize {
    corpus.as_ref().and_then(|c| c.inner.dim()).unwrap_or(0)
}

/// Number of accent classes (0 for null).
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aid_corpus_n_accents(corpus: *const AidCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.labels().n_accents())
}

/// Release a corpus handle. Null is ignored.
///
/// # Safety
/// `corpus` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn aid_corpus_free(corpus: *mut AidCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Load a classifier checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aid_classifier_load(path: *const c_char, out: *mut *mut AidClassifier) -> AidStatus {
    guard(|| {
        non_null(out, "out is null")?;
        let ckpt = Checkpoint::load(Path::new(str_arg(path, "path is null")?))?;
        *out = Box::into_raw(Box::new(AidClassifier { inner: ckpt }));
        Ok(())
    })
}

/// Release a classifier handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn aid_classifier_free(model: *mut AidClassifier) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension expected by the classifier (0 for null).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aid_classifier_input_dim(model: *const AidClassifier) -> usize {
    model.as_ref().map_or(0, |m| m.inner.model.shape().input_dim)
}

/// Length of the accent embedding (0 for null).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aid_classifier_embedding_dim(model: *const AidClassifier) -> usize {
    model.as_ref().map_or(0, |m| m.inner.model.shape().embedding_dim())
}

/// Number of accent classes (0 for null).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aid_classifier_n_accents(model: *const AidClassifier) -> usize {
    model.as_ref().map_or(0, |m| m.inner.labels.n_accents())
}

/// Accent label of class `id`, as a new string.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aid_classifier_accent_label(
    model: *const AidClassifier,
    id: usize,
    out: *mut *mut c_char,
) -> AidStatus {
    guard(|| {
        non_null(model, "model is null")?;
        non_null(out, "out is null")?;
        let labels = (*model).inner.labels.accents();
        let label = labels.get(id).ok_or(AidError::LabelOutOfRange {
            id,
            classes: labels.len(),
        })?;
        *out = into_c_string(label.clone());
        Ok(())
    })
}

/// Predict accent class ids for `rows` row-major utterance vectors of length `dim`.
///
/// # Safety
/// `x` must hold `rows * dim` doubles and `out_labels` room for `rows` entries.
#[no_mangle]
pub unsafe extern "C" fn aid_classifier_predict(
    model: *const AidClassifier,
    x: *const f64,
    rows: usize,
    dim: usize,
    out_labels: *mut usize,
) -> AidStatus {
    guard(|| {
        non_null(model, "model is null")?;
        non_null(out_labels, "out_labels is null")?;
        let m = &(*model).inner.model;
        if !m.is_trained() {
            return Err(AidError::Untrained.into());
        }
        let data = slice_arg(x, rows.saturating_mul(dim), "x is null")?;
        let frames = from_rows(data, rows, dim)?;
        let predicted = m.predict(frames.view())?;
        std::slice::from_raw_parts_mut(out_labels, rows).copy_from_slice(&predicted);
        Ok(())
    })
}

/// Accent embedding of one utterance vector; writes `embedding_dim` doubles.
///
/// # Safety
/// `x` must hold `dim` doubles and `out` room for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aid_classifier_accent_embedding(
    model: *const AidClassifier,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> AidStatus {
    guard(|| {
        non_null(model, "model is null")?;
        non_null(out, "out is null")?;
        let m = &(*model).inner.model;
        let want = m.shape().embedding_dim();
        if out_len != want {
            return Err(AidError::DimensionMismatch {
                expected: want,
                got: out_len,
            }
            .into());
        }
        let v = EmbeddingVector::new(slice_arg(x, dim, "x is null")?.to_vec())?;
        let e = m.accent_embedding(&v)?;
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(e.values());
        Ok(())
    })
}

/// Cosine similarity of two vectors of length `dim`.
///
/// # Safety
/// `a` and `b` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aid_cosine_similarity(a: *const f64, b: *const f64, dim: usize, out: *mut f64) -> AidStatus {
    guard(|| {
        non_null(out, "out is null")?;
        let a = EmbeddingVector::new(slice_arg(a, dim, "a is null")?.to_vec())?;
        let b = EmbeddingVector::new(slice_arg(b, dim, "b is null")?.to_vec())?;
        *out = cosine_similarity(&a, &b)?;
        Ok(())
    })
}

/// KL divergence of a probability vector from the uniform distribution.
///
/// # Safety
/// `p` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aid_kl_to_uniform(p: *const f64, n: usize, out: *mut f64) -> AidStatus {
    guard(|| {
        non_null(out, "out is null")?;
        *out = kl_to_uniform(slice_arg(p, n, "p is null")?)?;
        Ok(())
    })
}

/// kNN conversion of `t` source frames against an `n`-row pool; writes `t * dim` doubles.
///
/// # Safety
/// `source` must hold `t * dim` doubles, `pool` `n * dim`, and `out` room for `t * dim`.
#[no_mangle]
pub unsafe extern "C" fn aid_knn_convert(
    source: *const f64,
    t: usize,
    pool: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    distance: AidDistance,
    out: *mut f64,
) -> AidStatus {
    guard(|| {
        non_null(out, "out is null")?;
        let src = from_rows(slice_arg(source, t.saturating_mul(dim), "source is null")?, t, dim)?;
        let pool: FrameSequence = from_rows(slice_arg(pool, n.saturating_mul(dim), "pool is null")?, n, dim)?;
        let set = MatchingSet::new("ffi", pool.view().to_owned())?;
        let cfg = VcConfig {
            k,
            distance: match distance {
                AidDistance::Cosine => Distance::Cosine,
                AidDistance::Euclidean => Distance::Euclidean,
            },
            ..VcConfig::default()
        };
        let converted = knn_convert(&src, &set, &cfg)?;
        std::slice::from_raw_parts_mut(out, t * dim).copy_from_slice(converted.as_slice());
        Ok(())
    })
}

/// Run an experiment described by TOML; `out_json` receives the run record as JSON.
///
/// # Safety
/// `spec_toml` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aid_run_experiment(spec_toml: *const c_char, out_json: *mut *mut c_char) -> AidStatus {
    guard(|| {
        non_null(out_json, "out_json is null")?;
        *out_json = ptr::null_mut();
        let spec = ExperimentSpec::from_toml(str_arg(spec_toml, "spec is null")?, Path::new("<ffi>"))?;
        let record = run_experiment(&spec)?;
        let json = serde_json::to_string(&record).map_err(|e| AidError::Config(e.to_string()))?;
        *out_json = into_c_string(json);
        Ok(())
    })
}
