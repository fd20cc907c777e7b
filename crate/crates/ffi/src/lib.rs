//! C ABI over the `botdetect` library.
//!
//! Every fallible call returns a [`BdStatus`]; on anything other than
//! `BD_STATUS_OK` a description is available from [`bd_last_error`] on the
//! same thread. Objects cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. Panics never unwind into C;
//! they surface as `BD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use botdetect::dtree::{self, HyperParams, TreeModel};
use botdetect::gp::{self, GpModel, KernelParams};
use botdetect::ingest::{self, LoadOptions};
use botdetect::metrics;
use botdetect::pipeline::{self, PipelineConfig};
use botdetect::preprocess::{self, SmoteConfig};
use botdetect::{bayesopt, Dataset, Error};
use ndarray::Array2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidData = 5,
    Numeric = 6,
    Panic = 7,
}

/// Labeled dataset handle.
pub struct BdDataset {
    inner: Dataset,
}

/// Fitted decision tree handle.
pub struct BdTree {
    inner: TreeModel,
}

/// Fitted Gaussian-process handle.
pub struct BdGp {
    inner: GpModel,
}

/// Tree hyperparameters; defaults from `bd_hyper_params_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BdHyperParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features_fraction: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BdMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Confusion counts (attack = positive) and metrics for both classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BdReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub attack: BdMetrics,
    pub normal: BdMetrics,
    pub macro_f_score: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(BdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(Failure::from_ref(&e), e.to_string())
    }
}

impl Failure {
    fn from_ref(e: &Error) -> BdStatus {
        match e {
            Error::Io { .. } => BdStatus::Io,
            Error::Csv(_) | Error::InvalidCell { .. } | Error::UnknownLabel { .. } | Error::ConfigParse(_) => {
                BdStatus::Parse
            }
            Error::InvalidConfig(_) | Error::DimensionMismatch { .. } | Error::LengthMismatch(..) => {
                BdStatus::InvalidArgument
            }
            Error::NotPositiveDefinite { .. } | Error::NoViableKernel | Error::ZeroVariance => BdStatus::Numeric,
            Error::Stage { source, .. } => Failure::from_ref(source),
            _ => BdStatus::InvalidData,
        }
    }

    fn null(what: &str) -> Self {
        Failure(BdStatus::NullPointer, format!("{what} is null"))
    }

    fn arg(msg: impl Into<String>) -> Self {
        Failure(BdStatus::InvalidArgument, msg.into())
    }
}

/// Runs `f`, records any error message, and never lets a panic escape.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BdStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
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
            BdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::arg(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

fn check_out<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::null(what))
    } else {
        Ok(())
    }
}

/// Message for the most recent failing call on this thread; empty after a success.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn bd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn bd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ------------------------------------------------------------------ datasets

/// Loads a labeled CSV file. `negative_label` and `features` may be NULL;
/// `features` is a comma-separated include-list.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_load(
    path: *const c_char,
    label_column: *const c_char,
    positive_label: *const c_char,
    negative_label: *const c_char,
    features: *const c_char,
    out: *mut *mut BdDataset,
) -> BdStatus {
    guard(|| {
        check_out(out, "out")?;
        let mut opts = LoadOptions::new(str_arg(label_column, "label_column")?, str_arg(positive_label, "positive_label")?);
        if !negative_label.is_null() {
            opts.negative_label = Some(str_arg(negative_label, "negative_label")?.to_owned());
        }
        if !features.is_null() {
            opts.include = Some(str_arg(features, "features")?.split(',').map(|s| s.trim().to_owned()).collect());
        }
        let inner = ingest::load_flows(str_arg(path, "path")?, &opts)?;
        out.write(Box::into_raw(Box::new(BdDataset { inner })));
        Ok(())
    })
}

/// Builds a dataset from a row-major `rows × cols` matrix and 0/1 labels
/// (1 = attack). Both buffers are copied.
///
/// # Safety
/// `features` must hold `rows * cols` values and `labels` `rows` values.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_from_arrays(
    features: *const f64,
    labels: *const u8,
    rows: usize,
    cols: usize,
    out: *mut *mut BdDataset,
) -> BdStatus {
    guard(|| {
        check_out(out, "out")?;
        let n = rows.checked_mul(cols).ok_or_else(|| Failure::arg("rows * cols overflows"))?;
        let x = slice_arg(features, n, "features")?.to_vec();
        let y = slice_arg(labels, rows, "labels")?.to_vec();
        let x = Array2::from_shape_vec((rows, cols), x).map_err(|e| Failure::arg(e.to_string()))?;
        let inner = Dataset::from_parts(x, y)?;
        out.write(Box::into_raw(Box::new(BdDataset { inner })));
        Ok(())
    })
}

/// Number of rows; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_rows(ds: *const BdDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_rows())
}

/// Number of feature columns; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_cols(ds: *const BdDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n_features())
}

/// Rows labeled `label` (0 = normal, 1 = attack); 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_class_count(ds: *const BdDataset, label: u8) -> usize {
    ds.as_ref()
        .map_or(0, |d| d.inner.labels().iter().filter(|&&l| l == label).count())
}

/// Copies row-major features into `buf`, which must hold `rows * cols` values.
///
/// # Safety
/// `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_copy_features(ds: *const BdDataset, buf: *mut f64, len: usize) -> BdStatus {
    guard(|| {
        let d = &handle(ds, "dataset")?.inner;
        let x = d.features();
        if len != x.len() {
            return Err(Failure::arg(format!("buffer holds {len} values, dataset has {}", x.len())));
        }
        check_out(buf, "buf")?;
        for (i, v) in x.iter().enumerate() {
            buf.add(i).write(*v);
        }
        Ok(())
    })
}

/// Copies labels into `buf`, which must hold `rows` values.
///
/// # Safety
/// `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_copy_labels(ds: *const BdDataset, buf: *mut u8, len: usize) -> BdStatus {
    guard(|| {
        let d = &handle(ds, "dataset")?.inner;
        if len != d.n_rows() {
            return Err(Failure::arg(format!("buffer holds {len} labels, dataset has {}", d.n_rows())));
        }
        check_out(buf, "buf")?;
        ptr::copy_nonoverlapping(d.labels().as_ptr(), buf, len);
        Ok(())
    })
}

/// Min-max scales `ds` with bounds fitted on itself into a new dataset.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_minmax(ds: *const BdDataset, out: *mut *mut BdDataset) -> BdStatus {
    guard(|| {
        check_out(out, "out")?;
        let d = &handle(ds, "dataset")?.inner;
        let inner = preprocess::fit_minmax(d).apply_dataset(d)?;
        out.write(Box::into_raw(Box::new(BdDataset { inner })));
        Ok(())
    })
}

/// SMOTE-oversamples the minority class into a new dataset.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_smote(
    ds: *const BdDataset,
    k: usize,
    target_ratio: f64,
    seed: u64,
    out: *mut *mut BdDataset,
) -> BdStatus {
    guard(|| {
        check_out(out, "out")?;
        let d = &handle(ds, "dataset")?.inner;
        let cfg = SmoteConfig { k, target_ratio, seed };
        let inner = preprocess::smote(d, &cfg)?.dataset;
        out.write(Box::into_raw(Box::new(BdDataset { inner })));
        Ok(())
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bd_dataset_free(ds: *mut BdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ------------------------------------------------------------------ trees

#[no_mangle]
pub extern "C" fn bd_hyper_params_default() -> BdHyperParams {
    let h = HyperParams::default();
    BdHyperParams {
        max_depth: h.max_depth,
        min_samples_split: h.min_samples_split,
        min_samples_leaf: h.min_samples_leaf,
        max_features_fraction: h.max_features_fraction,
    }
}

/// Fits a Gini decision tree. `hp` may be NULL for defaults.
///
/// # Safety
/// `ds` must be a live handle, `hp` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bd_tree_fit(
    ds: *const BdDataset,
    hp: *const BdHyperParams,
    seed: u64,
    out: *mut *mut BdTree,
) -> BdStatus {
    guard(|| {
        check_out(out, "out")?;
        let d = &handle(ds, "dataset")?.inner;
        let h = hp.as_ref().copied().unwrap_or_else(|| bd_hyper_params_default());
        let params = HyperParams {
            max_depth: h.max_depth,
            min_samples_split: h.min_samples_split,
            min_samples_leaf: h.min_samples_leaf,
            max_features_fraction: h.max_features_fraction,
        };
        let inner = dtree::fit_tree(d, &params, seed)?;
        out.write(Box::into_raw(Box::new(BdTree { inner })));
        Ok(())
    })
}

/// Predicts the class of one row of `n_features` values.
///
/// # Safety
/// `row` must hold `n_features` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bd_tree_predict(
    tree: *const BdTree,
    row: *const f64,
    n_features: usize,
    out: *mut u8,
) -> BdStatus {
    guard(|| {
        let t = &handle(tree, "tree")?.inner;
        let class = t.predict(slice_arg(row, n_features, "row")?)?;
        write_out(out, class, "out")
    })
}

/// Predicts every row of a row-major `rows × cols` matrix into `out[rows]`.
///
/// # Safety
/// `features` must hold `rows * cols` values; `out` must hold `rows`.
#[no_mangle]
pub unsafe extern "C" fn bd_tree_predict_batch(
    tree: *const BdTree,
    features: *const f64,
    rows: usize,
    cols: usize,
    out: *mut u8,
) -> BdStatus {
    guard(|| {
        let t = &handle(tree, "tree")?.inner;
        let n = rows.checked_mul(cols).ok_or_else(|| Failure::arg("rows * cols overflows"))?;
        let x = slice_arg(features, n, "features")?;
        check_out(out, "out")?;
        for i in 0..rows {
            out.add(i).write(t.predict(&x[i * cols..(i + 1) * cols])?);
        }
        Ok(())
    })
}

/// Depth of the tree (a lone leaf has depth 0); 0 for NULL.
///
/// # Safety
/// `tree` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bd_tree_depth(tree: *const BdTree) -> usize {
    tree.as_ref().map_or(0, |t| t.inner.depth())
}

/// Number of leaves; 0 for NULL.
///
/// # Safety
/// `tree` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bd_tree_leaves(tree: *const BdTree) -> usize {
    tree.as_ref().map_or(0, |t| t.inner.n_leaves())
}

/// Releases a tree. NULL is ignored.
///
/// # Safety
/// `tree` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bd_tree_free(tree: *mut BdTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

// ------------------------------------------------------------------ metrics

fn to_c(m: &metrics::Metrics) -> BdMetrics {
    BdMetrics {
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f_score: m.f_score,
    }
}

/// Scores `n` predictions against ground truth (labels 0/1, 1 = attack).
///
/// # Safety
/// `y_true` and `y_pred` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bd_evaluate(
    y_true: *const u8,
    y_pred: *const u8,
    n: usize,
    out: *mut BdReport,
) -> BdStatus {
    guard(|| {
        let r = metrics::evaluate(slice_arg(y_true, n, "y_true")?, slice_arg(y_pred, n, "y_pred")?)?;
        let report = BdReport {
            tp: r.confusion.tp,
            tn: r.confusion.tn,
            fp: r.confusion.fp,
            fn_: r.confusion.fn_,
            attack: to_c(&r.attack),
            normal: to_c(&r.normal),
            macro_f_score: r.macro_f_score,
        };
        write_out(out, report, "out")
    })
}

// ------------------------------------------------------------------ GP and EI

/// Fits an RBF Gaussian process to `t` row-major points of dimension `d`.
///
/// # Safety
/// `x` must hold `t * d` values and `y` `t` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bd_gp_fit(
    x: *const f64,
    y: *const f64,
    t: usize,
    d: usize,
    signal_variance: f64,
    lengthscale: f64,
    noise: f64,
    out: *mut *mut BdGp,
) -> BdStatus {
    guard(|| {
        check_out(out, "out")?;
        let n = t.checked_mul(d).ok_or_else(|| Failure::arg("t * d overflows"))?;
        let xs = Array2::from_shape_vec((t, d), slice_arg(x, n, "x")?.to_vec()).map_err(|e| Failure::arg(e.to_string()))?;
        let inner = gp::gp_fit(xs.view(), slice_arg(y, t, "y")?, KernelParams::rbf(signal_variance, lengthscale), noise)?;
        out.write(Box::into_raw(Box::new(BdGp { inner })));
        Ok(())
    })
}

/// Posterior mean and variance at one query point of dimension `d`.
///
/// # Safety
/// `q` must hold `d` values; `mean` and `variance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bd_gp_predict(
    gp: *const BdGp,
    q: *const f64,
    d: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> BdStatus {
    guard(|| {
        let m = &handle(gp, "gp")?.inner;
        check_out(mean, "mean")?;
        check_out(variance, "variance")?;
        let (mu, var) = m.predict(slice_arg(q, d, "q")?)?;
        mean.write(mu);
        variance.write(var);
        Ok(())
    })
}

/// Log marginal likelihood of the training targets; NaN for NULL.
///
/// # Safety
/// `gp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bd_gp_log_marginal_likelihood(gp: *const BdGp) -> f64 {
    gp.as_ref().map_or(f64::NAN, |m| m.inner.log_marginal_likelihood())
}

/// Releases a GP. NULL is ignored.
///
/// # Safety
/// `gp` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bd_gp_free(gp: *mut BdGp) {
    if !gp.is_null() {
        drop(Box::from_raw(gp));
    }
}

/// Expected improvement over `best + xi` of a normal posterior (maximization).
#[no_mangle]
pub extern "C" fn bd_expected_improvement(mean: f64, std: f64, best: f64, xi: f64) -> f64 {
    bayesopt::expected_improvement(mean, std, best, xi)
}

// ------------------------------------------------------------------ pipeline

/// Runs the full pipeline from a TOML config; `seed` overrides the file.
/// On success `*report` receives the text report; free it with `bd_string_free`.
///
/// # Safety
/// `config_toml` must be NUL-terminated; `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bd_run_pipeline(config_toml: *const c_char, seed: u64, report: *mut *mut c_char) -> BdStatus {
    guard(|| {
        check_out(report, "report")?;
        let mut cfg = PipelineConfig::from_toml_str(str_arg(config_toml, "config_toml")?)?;
        cfg.seed = seed;
        let text = pipeline::run_pipeline(&cfg)?.to_text();
        let c = CString::new(text).map_err(|e| Failure::arg(e.to_string()))?;
        report.write(c.into_raw());
        Ok(())
    })
}
