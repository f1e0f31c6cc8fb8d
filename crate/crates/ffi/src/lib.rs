//! C ABI over `mbn`.
//!
//! Every fallible function returns an `MbnStatus`; on failure the message is
//! available from [`mbn_last_error`] on the same thread. Objects are opaque
//! handles released with their `*_free` function. Array outputs are written
//! into caller buffers whose length is passed alongside and checked.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mbn::data::{load_csv, CsvOptions, Dataset, Embedding, LabelVector, Metric};
use mbn::ensemble::{load_ensemble, save_ensemble, train_ensemble, EnsembleConfig, MbnEnsemble as Ensemble};
use mbn::evaluation::{accuracy, ahc, AhcConfig, Linkage};
use mbn::harness::{run_experiment, ExperimentConfig};
use mbn::matrix::Matrix;
use mbn::network::MbnConfig;
use mbn::selection::{select, SelectionConfig, SelectionMode, SelectionResult};
use mbn::validity::Criterion;
use mbn::MbnError;

/// Result of every fallible call. Values 2 to 13 mirror the library's error
/// classes and the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbnStatus {
    Ok = 0,
    Parse = 2,
    InvalidDataset = 3,
    InvalidCode = 4,
    Format = 5,
    DimensionMismatch = 6,
    ZeroVariance = 7,
    Schedule = 8,
    Config = 9,
    CriterionUndefined = 10,
    Shape = 11,
    Io = 12,
    Json = 13,
    NullPointer = 20,
    InvalidArgument = 21,
    BufferTooSmall = 22,
    Panic = 23,
}

pub const MBN_METRIC_EUCLIDEAN: u32 = 0;
pub const MBN_METRIC_COSINE: u32 = 1;

pub const MBN_MODE_SO: u32 = 0;
pub const MBN_MODE_SD: u32 = 1;
pub const MBN_MODE_RSO: u32 = 2;

pub const MBN_CRITERION_SWC: u32 = 0;
pub const MBN_CRITERION_PB: u32 = 1;
pub const MBN_CRITERION_PBM: u32 = 2;
pub const MBN_CRITERION_VRC: u32 = 3;

/// Opaque dataset handle.
pub struct MbnDataset(Dataset);

/// Opaque trained ensemble.
pub struct MbnEnsemble(Ensemble);

/// Opaque selection result.
pub struct MbnSelection(SelectionResult);

/// Ensemble training options. Zero in `top_k` means `round(1.5 c)` from
/// the dataset labels.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbnEnsembleOptions {
    pub models: usize,
    pub units_per_layer: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub bottom_fraction: f64,
    pub feature_ratio: f64,
    pub top_k: usize,
    pub seed: u64,
}

/// Selection options. Zero in `b` or `embed_dim` takes the default; `classes`
/// is required by SO and rSO and ignored by SD.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbnSelectionOptions {
    pub mode: u32,
    pub criterion: u32,
    pub b: usize,
    pub classes: usize,
    pub embed_dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &MbnError) -> MbnStatus {
    match e {
        MbnError::Parse { .. } => MbnStatus::Parse,
        MbnError::InvalidDataset(_) => MbnStatus::InvalidDataset,
        MbnError::InvalidCode(_) => MbnStatus::InvalidCode,
        MbnError::Format(_) => MbnStatus::Format,
        MbnError::DimensionMismatch { .. } => MbnStatus::DimensionMismatch,
        MbnError::ZeroVariance(_) => MbnStatus::ZeroVariance,
        MbnError::Schedule(_) => MbnStatus::Schedule,
        MbnError::Config(_) => MbnStatus::Config,
        MbnError::CriterionUndefined { .. } => MbnStatus::CriterionUndefined,
        MbnError::Shape(_) => MbnStatus::Shape,
        MbnError::Io(_) => MbnStatus::Io,
        MbnError::Json(_) => MbnStatus::Json,
    }
}

struct Fail(MbnStatus, String);

impl From<MbnError> for Fail {
    fn from(e: MbnError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(MbnStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MbnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MbnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MbnStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(MbnStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(MbnStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_path(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    let s = borrow(p, what)?;
    let s = CStr::from_ptr(s).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_ptr<'a, T>(out: *mut *mut T) -> Result<&'a mut *mut T, Fail> {
    let slot = out.as_mut().ok_or_else(|| Fail(MbnStatus::NullPointer, "output pointer is null".into()))?;
    *slot = ptr::null_mut();
    Ok(slot)
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail(MbnStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Fail(MbnStatus::NullPointer, "output buffer is null".into()));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn metric_from(m: u32) -> Result<Metric, Fail> {
    match m {
        MBN_METRIC_EUCLIDEAN => Ok(Metric::Euclidean),
        MBN_METRIC_COSINE => Ok(Metric::Cosine),
        _ => Err(invalid(format!("unknown metric {m}"))),
    }
}

fn to_labels(raw: &[i64]) -> LabelVector {
    LabelVector::from_raw(raw)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mbn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mbn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a dataset from a row-major `n x d` matrix. `labels` may be null;
/// otherwise it holds `n` arbitrary integer class ids.
///
/// # Safety
/// `features` must point to `n * d` doubles and `labels`, when not null, to
/// `n` integers. `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_new(
    features: *const f64,
    n: usize,
    d: usize,
    labels: *const i64,
    metric: u32,
    out: *mut *mut MbnDataset,
) -> MbnStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let len = n.checked_mul(d).ok_or_else(|| invalid("n * d overflows"))?;
        let values = slice(features, len, "features")?.to_vec();
        let truth = if labels.is_null() { None } else { Some(to_labels(slice(labels, n, "labels")?)) };
        let ds = Dataset::new(Matrix::from_vec(n, d, values)?, truth, metric_from(metric)?, "ffi")?;
        *slot = Box::into_raw(Box::new(MbnDataset(ds)));
        Ok(())
    })
}

/// Reads a comma-separated file without header. `label_column` is a
/// zero-based column index, or negative for no labels.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_load_csv(
    path: *const c_char,
    label_column: i64,
    metric: u32,
    out: *mut *mut MbnDataset,
) -> MbnStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let p = c_path(path, "path")?;
        let options = CsvOptions {
            label_column: usize::try_from(label_column).ok(),
            metric: metric_from(metric)?,
            ..CsvOptions::default()
        };
        *slot = Box::into_raw(Box::new(MbnDataset(load_csv(p, &options)?)));
        Ok(())
    })
}

/// Number of points, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_n(ds: *const MbnDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n())
}

/// Number of features, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_d(ds: *const MbnDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.d())
}

/// Number of classes in the labels, or 0 when unlabeled.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_classes(ds: *const MbnDataset) -> usize {
    ds.as_ref().and_then(|d| d.0.num_classes()).unwrap_or(0)
}

/// # Safety
/// `ds` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_free(ds: *mut MbnDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fills `out` with the default options: 40 models, 400 clusterings per
/// layer, delta drawn from [0.05, 0.95], bottom fraction 0.5, all features.
///
/// # Safety
/// `out` must be null or point to writable options.
#[no_mangle]
pub unsafe extern "C" fn mbn_ensemble_options_default(out: *mut MbnEnsembleOptions) {
    let base = EnsembleConfig::default();
    if let Some(o) = out.as_mut() {
        *o = MbnEnsembleOptions {
            models: base.models,
            units_per_layer: base.base.units_per_layer,
            delta_min: base.delta_range.0,
            delta_max: base.delta_range.1,
            bottom_fraction: base.base.bottom_fraction,
            feature_ratio: base.base.feature_ratio,
            top_k: 0,
            seed: 0,
        };
    }
}

/// Trains an ensemble on `ds`.
///
/// # Safety
/// `ds` and `options` must be live, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbn_ensemble_train(
    ds: *const MbnDataset,
    options: *const MbnEnsembleOptions,
    out: *mut *mut MbnEnsemble,
) -> MbnStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let data = &borrow(ds, "dataset")?.0;
        let o = *borrow(options, "options")?;
        let top_k = match o.top_k {
            0 => None,
            k => Some(k),
        };
        let cfg = EnsembleConfig {
            models: o.models,
            delta_range: (o.delta_min, o.delta_max),
            base: MbnConfig {
                units_per_layer: o.units_per_layer,
                bottom_fraction: o.bottom_fraction,
                feature_ratio: o.feature_ratio,
                top_k,
                metric: data.metric,
                seed: o.seed,
                retain_layer_codes: false,
                ..MbnConfig::default()
            },
            seed: o.seed,
        };
        *slot = Box::into_raw(Box::new(MbnEnsemble(train_ensemble(data, &cfg)?)));
        Ok(())
    })
}

/// # Safety
/// `ens` must be live and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mbn_ensemble_save(ens: *const MbnEnsemble, dir: *const c_char) -> MbnStatus {
    guard(|| {
        let e = borrow(ens, "ensemble")?;
        save_ensemble(&e.0, c_path(dir, "dir")?)?;
        Ok(())
    })
}

/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbn_ensemble_load(dir: *const c_char, out: *mut *mut MbnEnsemble) -> MbnStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        *slot = Box::into_raw(Box::new(MbnEnsemble(load_ensemble(c_path(dir, "dir")?)?)));
        Ok(())
    })
}

/// Number of base models, or 0 for a null handle.
///
/// # Safety
/// `ens` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn mbn_ensemble_models(ens: *const MbnEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.0.len())
}

/// Copies each base model's `delta` into `out`.
///
/// # Safety
/// `ens` must be live and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mbn_ensemble_deltas(ens: *const MbnEnsemble, out: *mut f64, len: usize) -> MbnStatus {
    guard(|| copy_out(&borrow(ens, "ensemble")?.0.deltas, out, len))
}

/// # Safety
/// `ens` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn mbn_ensemble_free(ens: *mut MbnEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Weights the ensemble's base models, keeps the best `B` and reduces their
/// joint output.
///
/// # Safety
/// `ens` and `options` must be live, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbn_select(
    ens: *const MbnEnsemble,
    options: *const MbnSelectionOptions,
    out: *mut *mut MbnSelection,
) -> MbnStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let e = &borrow(ens, "ensemble")?.0;
        let o = *borrow(options, "options")?;
        let mode = match o.mode {
            MBN_MODE_SO => SelectionMode::So,
            MBN_MODE_SD => SelectionMode::Sd,
            MBN_MODE_RSO => SelectionMode::Rso,
            m => return Err(invalid(format!("unknown selection mode {m}"))),
        };
        let criterion = *Criterion::ALL
            .get(o.criterion as usize)
            .ok_or_else(|| invalid(format!("unknown criterion {}", o.criterion)))?;
        let nonzero = |v: usize| (v != 0).then_some(v);
        let cfg = SelectionConfig {
            mode,
            criterion,
            b: nonzero(o.b),
            c: nonzero(o.classes),
            embed_dim: nonzero(o.embed_dim),
            linkage: Linkage::Average,
            ..SelectionConfig::default()
        };
        *slot = Box::into_raw(Box::new(MbnSelection(select(e, &cfg)?)));
        Ok(())
    })
}

/// Number of weights (one per base model), or 0 for a null handle.
///
/// # Safety
/// `sel` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn mbn_selection_models(sel: *const MbnSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.0.weights.len())
}

/// # Safety
/// `sel` must be live and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mbn_selection_weights(sel: *const MbnSelection, out: *mut f64, len: usize) -> MbnStatus {
    guard(|| copy_out(&borrow(sel, "selection")?.0.weights, out, len))
}

/// Number of kept models, or 0 for a null handle.
///
/// # Safety
/// `sel` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn mbn_selection_chosen_count(sel: *const MbnSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.0.chosen.len())
}

/// Indices of the kept models, best first.
///
/// # Safety
/// `sel` must be live and `out` hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn mbn_selection_chosen(sel: *const MbnSelection, out: *mut usize, len: usize) -> MbnStatus {
    guard(|| copy_out(&borrow(sel, "selection")?.0.chosen, out, len))
}

/// Writes the embedding's point count and dimension.
///
/// # Safety
/// `sel` must be live; `n` and `h` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mbn_selection_embedding_shape(
    sel: *const MbnSelection,
    n: *mut usize,
    h: *mut usize,
) -> MbnStatus {
    guard(|| {
        let y = &borrow(sel, "selection")?.0.selected_embedding;
        let (n, h) = (n.as_mut(), h.as_mut());
        match (n, h) {
            (Some(n), Some(h)) => {
                *n = y.n();
                *h = y.dim();
                Ok(())
            }
            _ => Err(Fail(MbnStatus::NullPointer, "shape output is null".into())),
        }
    })
}

/// Copies the row-major `n x h` embedding of the kept models.
///
/// # Safety
/// `sel` must be live and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mbn_selection_embedding(sel: *const MbnSelection, out: *mut f64, len: usize) -> MbnStatus {
    guard(|| copy_out(borrow(sel, "selection")?.0.selected_embedding.values.as_slice(), out, len))
}

/// # Safety
/// `sel` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn mbn_selection_free(sel: *mut MbnSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}

/// Clusters a row-major `n x h` embedding into `classes` groups with
/// average-linkage Euclidean AHC and writes labels in `[0, classes)`.
///
/// # Safety
/// `embedding` must hold `n * h` doubles and `labels_out` `n` entries.
#[no_mangle]
pub unsafe extern "C" fn mbn_cluster(
    embedding: *const f64,
    n: usize,
    h: usize,
    classes: usize,
    labels_out: *mut usize,
) -> MbnStatus {
    guard(|| {
        let len = n.checked_mul(h).ok_or_else(|| invalid("n * h overflows"))?;
        let y = Embedding::new(Matrix::from_vec(n, h, slice(embedding, len, "embedding")?.to_vec())?)?;
        let assigned = ahc(&y, &AhcConfig::new(classes))?;
        copy_out(assigned.as_slice(), labels_out, n)
    })
}

/// Clustering accuracy of `pred` against `truth` under the best one-to-one
/// relabeling. Labels are arbitrary integers.
///
/// # Safety
/// `pred` and `truth` must hold `n` integers and `acc` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mbn_accuracy(pred: *const i64, truth: *const i64, n: usize, acc: *mut f64) -> MbnStatus {
    guard(|| {
        let p = to_labels(slice(pred, n, "pred")?);
        let t = to_labels(slice(truth, n, "truth")?);
        let slot = acc.as_mut().ok_or_else(|| Fail(MbnStatus::NullPointer, "acc is null".into()))?;
        *slot = accuracy(&p, &t)?.acc;
        Ok(())
    })
}

/// Runs a full experiment from a JSON config and returns the JSON report,
/// to be released with [`mbn_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `report_out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn mbn_run_experiment(config_json: *const c_char, report_out: *mut *mut c_char) -> MbnStatus {
    guard(|| {
        let slot = out_ptr(report_out)?;
        let text =
            CStr::from_ptr(borrow(config_json, "config")?).to_str().map_err(|_| invalid("config is not UTF-8"))?;
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Fail(MbnStatus::Config, e.to_string()))?;
        let report = run_experiment(&cfg)?;
        let json = serde_json::to_string(&report).map_err(MbnError::from)?;
        *slot = CString::new(json).map_err(|_| invalid("report contains NUL"))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not freed.
#[no_mangle]
pub unsafe extern "C" fn mbn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
