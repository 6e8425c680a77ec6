//! C ABI for the circular Gaussian-process models.
//!
//! Conventions:
//! - Every fallible function returns an integer code: [`CGP_OK`] on
//!   success, otherwise one of the `CGP_ERR_*` constants. The matching
//!   human-readable message is available from
//!   [`cgp_last_error_message`] until the next call on the same thread.
//! - Datasets are opaque handles created by [`cgp_dataset_read`] and
//!   released by [`cgp_dataset_free`]. Every `*_free` accepts null.
//! - Run-level operations (`cgp_fit`, `cgp_predict`, ...) mirror the
//!   CLI subcommands, operate on files/directories, and share their
//!   progress output.
//! - Panics never cross the boundary; they are caught and reported as
//!   [`CGP_ERR_PANIC`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use circgp::circ::circular_summary;
use circgp::config::RunConfig;
use circgp::dataset::{self, AngleUnit, CircularDataset, IngestOptions};
use circgp::error::{Error, Result};
use circgp::runner;

/// Success.
pub const CGP_OK: c_int = 0;
/// Validation failure: bad configuration, arguments, or data.
pub const CGP_ERR_VALIDATION: c_int = 2;
/// Numeric failure: factorization or sampling left its domain.
pub const CGP_ERR_NUMERIC: c_int = 3;
/// A required pointer argument was null.
pub const CGP_ERR_NULL: c_int = 4;
/// A string argument was not valid UTF-8.
pub const CGP_ERR_UTF8: c_int = 5;
/// An internal panic was caught at the boundary.
pub const CGP_ERR_PANIC: c_int = 6;

/// Direction column is radians (`cgp_dataset_read` unit selector).
pub const CGP_UNIT_INFER: c_int = 0;
pub const CGP_UNIT_RADIANS: c_int = 1;
pub const CGP_UNIT_DEGREES: c_int = 2;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).unwrap_or_default();
    });
}

fn report(e: &Error) -> c_int {
    set_error(&e.to_string());
    e.exit_code() as c_int
}

fn guard(f: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic caught at the FFI boundary");
            CGP_ERR_PANIC
        }
    }
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> std::result::Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error(&format!("{what} must not be null"));
        return Err(CGP_ERR_NULL);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_error(&format!("{what} is not valid UTF-8"));
            Err(CGP_ERR_UTF8)
        }
    }
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn optional_path(
    ptr: *const c_char,
    what: &str,
) -> std::result::Result<Option<PathBuf>, c_int> {
    if ptr.is_null() {
        Ok(None)
    } else {
        required_str(ptr, what).map(|s| Some(PathBuf::from(s)))
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_env_overrides(std::env::vars())?;
    Ok(cfg)
}

/// Message for the most recent failure on this thread. The pointer is
/// owned by the library and stays valid until the next API call on the
/// same thread; it is never null (initially the empty string).
#[no_mangle]
pub extern "C" fn cgp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cgp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// An ingested circular dataset (opaque).
pub struct CgpDataset {
    inner: CircularDataset,
}

/// Read a dataset CSV (columns `site_id,x,y[,time],direction[,speed]`).
///
/// `angle_unit` is one of `CGP_UNIT_INFER`, `CGP_UNIT_RADIANS`,
/// `CGP_UNIT_DEGREES`; `rotate_half_turn` and `assert_planar` are
/// booleans (0/1). On success `*out` owns the dataset and must be
/// released with [`cgp_dataset_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid
/// pointer to a `CgpDataset*` slot.
#[no_mangle]
pub unsafe extern "C" fn cgp_dataset_read(
    path: *const c_char,
    angle_unit: c_int,
    rotate_half_turn: c_int,
    assert_planar: c_int,
    out: *mut *mut CgpDataset,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("out must not be null");
            return CGP_ERR_NULL;
        }
        let path = match required_str(path, "path") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let unit = match angle_unit {
            CGP_UNIT_INFER => None,
            CGP_UNIT_RADIANS => Some(AngleUnit::Radians),
            CGP_UNIT_DEGREES => Some(AngleUnit::Degrees),
            other => {
                set_error(&format!("unknown angle unit selector {other}"));
                return CGP_ERR_VALIDATION;
            }
        };
        let options = IngestOptions {
            angle_unit: unit,
            rotate_half_turn: rotate_half_turn != 0,
            assert_planar: assert_planar != 0,
        };
        match dataset::ingest(&path, &options) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(CgpDataset { inner: ds }));
                CGP_OK
            }
            Err(e) => report(&e),
        }
    })
}

/// Number of rows in the dataset; writes it to `*out`.
///
/// # Safety
/// `ds` must come from [`cgp_dataset_read`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cgp_dataset_len(ds: *const CgpDataset, out: *mut usize) -> c_int {
    guard(|| {
        if ds.is_null() || out.is_null() {
            set_error("ds and out must not be null");
            return CGP_ERR_NULL;
        }
        *out = (*ds).inner.len();
        CGP_OK
    })
}

/// Angle (radians in `[0, 2π)`) of row `index`; writes it to `*out`.
///
/// # Safety
/// `ds` must come from [`cgp_dataset_read`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cgp_dataset_angle(
    ds: *const CgpDataset,
    index: usize,
    out: *mut f64,
) -> c_int {
    guard(|| {
        if ds.is_null() || out.is_null() {
            set_error("ds and out must not be null");
            return CGP_ERR_NULL;
        }
        let data = &(*ds).inner;
        if index >= data.len() {
            set_error(&format!("index {index} out of range ({} rows)", data.len()));
            return CGP_ERR_VALIDATION;
        }
        *out = data.angles[index].rad();
        CGP_OK
    })
}

/// Circular mean direction of the dataset; writes it to `*out`.
///
/// # Safety
/// `ds` must come from [`cgp_dataset_read`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cgp_dataset_mean_direction(
    ds: *const CgpDataset,
    out: *mut f64,
) -> c_int {
    guard(|| {
        if ds.is_null() || out.is_null() {
            set_error("ds and out must not be null");
            return CGP_ERR_NULL;
        }
        match circular_summary(&(*ds).inner.angles) {
            Ok(s) => {
                *out = s.mean_direction.rad();
                CGP_OK
            }
            Err(e) => report(&e),
        }
    })
}

/// Release a dataset handle. Null is ignored.
///
/// # Safety
/// `ds` must be null or a pointer from [`cgp_dataset_read`] not yet
/// freed; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cgp_dataset_free(ds: *mut CgpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Generate a synthetic dataset from the config's `[simulate]` block.
///
/// # Safety
/// `config_path` and `out_path` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cgp_simulate(
    config_path: *const c_char,
    out_path: *const c_char,
) -> c_int {
    guard(|| {
        let config = match required_str(config_path, "config_path") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let out = match required_str(out_path, "out_path") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        match load_config(&config).and_then(|cfg| runner::run_simulate(&cfg, &out)) {
            Ok(()) => CGP_OK,
            Err(e) => report(&e),
        }
    })
}

/// Fit the configured model. `data_path` may be null to use the
/// config's `data.path`; `warm_start != 0` continues the run already in
/// `out_dir`.
///
/// # Safety
/// All non-null pointers must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cgp_fit(
    config_path: *const c_char,
    data_path: *const c_char,
    out_dir: *const c_char,
    warm_start: c_int,
) -> c_int {
    guard(|| {
        let config = match required_str(config_path, "config_path") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let data = match optional_path(data_path, "data_path") {
            Ok(p) => p,
            Err(code) => return code,
        };
        let out = match required_str(out_dir, "out_dir") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let result = load_config(&config).and_then(|cfg| {
            let data = match data {
                Some(p) => p,
                None => cfg
                    .data
                    .as_ref()
                    .and_then(|d| d.path.clone())
                    .ok_or_else(|| {
                        Error::Config(
                            "no dataset: pass data_path or set data.path in the config".into(),
                        )
                    })?,
            };
            runner::run_fit(&cfg, &data, &out, warm_start != 0).map(|_| ())
        });
        match result {
            Ok(()) => CGP_OK,
            Err(e) => report(&e),
        }
    })
}

/// Krige the posterior in `draws_dir` onto `targets_path`.
/// `seed_override < 0` keeps the fit's seed; `keep_samples != 0` also
/// writes the full predictive sample matrix.
///
/// # Safety
/// All pointers must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cgp_predict(
    draws_dir: *const c_char,
    data_path: *const c_char,
    targets_path: *const c_char,
    out_dir: *const c_char,
    seed_override: i64,
    keep_samples: c_int,
) -> c_int {
    guard(|| {
        let args: std::result::Result<Vec<PathBuf>, c_int> =
            [(draws_dir, "draws_dir"), (data_path, "data_path"), (targets_path, "targets_path"), (out_dir, "out_dir")]
                .into_iter()
                .map(|(p, what)| required_str(p, what).map(PathBuf::from))
                .collect();
        let args = match args {
            Ok(a) => a,
            Err(code) => return code,
        };
        let seed = if seed_override < 0 { None } else { Some(seed_override as u64) };
        match runner::run_predict(&args[0], &args[1], &args[2], &args[3], seed, keep_samples != 0)
        {
            Ok(()) => CGP_OK,
            Err(e) => report(&e),
        }
    })
}

/// Write the PSRF/MPSRF report for a stored run. `out_path` may be null
/// for the default location inside the run directory.
///
/// # Safety
/// Non-null pointers must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cgp_diagnose(
    draws_dir: *const c_char,
    out_path: *const c_char,
) -> c_int {
    guard(|| {
        let dir = match required_str(draws_dir, "draws_dir") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let out = match optional_path(out_path, "out_path") {
            Ok(p) => p,
            Err(code) => return code,
        };
        match runner::run_diagnose(&dir, out.as_deref()) {
            Ok(()) => CGP_OK,
            Err(e) => report(&e),
        }
    })
}

/// Score stored predictions against a held-out truth dataset. `out_dir`
/// may be null to write next to the predictions.
///
/// # Safety
/// Non-null pointers must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cgp_score(
    pred_dir: *const c_char,
    truth_path: *const c_char,
    out_dir: *const c_char,
    max_match_distance: f64,
) -> c_int {
    guard(|| {
        let pred = match required_str(pred_dir, "pred_dir") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let truth = match required_str(truth_path, "truth_path") {
            Ok(s) => PathBuf::from(s),
            Err(code) => return code,
        };
        let out = match optional_path(out_dir, "out_dir") {
            Ok(p) => p,
            Err(code) => return code,
        };
        match runner::run_score(&pred, &truth, out.as_deref(), max_match_distance) {
            Ok(()) => CGP_OK,
            Err(e) => report(&e),
        }
    })
}
