//! C interface to the semiiv tests.
//!
//! Datasets and reports are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a [`SivStatus`];
//! on failure the message is available from [`siv_last_error_message`] on
//! the same thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use semiiv::additive::AdditiveEngine;
use semiiv::ivtest::{
    double_instrument_test, linear_double_instrument_test, semi_instrument_test, CombineMethod,
    DoubleInstrumentReport, GeneralDoubleReport, SemiInstrumentReport, StructuralRoles, TestConfig,
};
use semiiv::report::Envelope;
use semiiv::scoring::BootstrapOptions;
use semiiv::simgen::{gen_double_instrument, gen_single_instrument};
use semiiv::smoothers::{Kernel, SmootherConfig};
use semiiv::{Dataset, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SivStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidInput = 3,
    SingularFit = 4,
    Interpolation = 5,
    OutOfRange = 6,
    MissingColumn = 7,
    Csv = 8,
    Spec = 9,
    Io = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SivKernel {
    Tricube = 0,
    Epanechnikov = 1,
    Uniform = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SivEngine {
    DirectLs = 0,
    Backfit = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SivCombine {
    Joint = 0,
    Marginal = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SivModel {
    SingleInstrument = 0,
    DoubleInstrument = 1,
}

/// Test settings. Start from [`siv_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SivConfig {
    pub degree: u32,
    pub span: f64,
    pub kernel: SivKernel,
    pub engine: SivEngine,
    pub basis_size: u32,
    pub tol: f64,
    pub max_iter: u32,
    pub combine: SivCombine,
    /// Bootstrap replicates for the measurability stage; 0 disables it.
    pub bootstrap_replicates: u32,
    pub seed: u64,
    pub alpha: f64,
}

pub struct SivDataset(Dataset);

enum Report {
    Semi(Envelope<SemiInstrumentReport>),
    LinearDouble(Envelope<DoubleInstrumentReport>),
    Double(Envelope<GeneralDoubleReport>),
}

pub struct SivReport(Report);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SivStatus {
    match e {
        Error::Input(_) => SivStatus::InvalidInput,
        Error::SingularFit { .. } => SivStatus::SingularFit,
        Error::Interpolation { .. } => SivStatus::Interpolation,
        Error::OutOfRange { .. } => SivStatus::OutOfRange,
        Error::MissingColumn(_) => SivStatus::MissingColumn,
        Error::Csv { .. } => SivStatus::Csv,
        Error::Spec(_) => SivStatus::Spec,
        Error::Io(_) => SivStatus::Io,
    }
}

struct Fail(SivStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SivStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SivStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SivStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(SivStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SivStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn dataset<'a>(p: *const SivDataset) -> Result<&'a Dataset, Fail> {
    p.as_ref()
        .map(|d| &d.0)
        .ok_or_else(|| Fail(SivStatus::NullPointer, "dataset is null".into()))
}

fn out_ptr<T>(out: *mut *mut T) -> Result<(), Fail> {
    if out.is_null() {
        Err(Fail(SivStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

unsafe fn test_config(cfg: *const SivConfig) -> Result<TestConfig, Fail> {
    let c = if cfg.is_null() { siv_config_default() } else { *cfg };
    let kernel = match c.kernel {
        SivKernel::Tricube => Kernel::Tricube,
        SivKernel::Epanechnikov => Kernel::Epanechnikov,
        SivKernel::Uniform => Kernel::Uniform,
    };
    let smoother = SmootherConfig::new(c.degree as usize, c.span, kernel)?;
    let engine = match c.engine {
        SivEngine::DirectLs => AdditiveEngine::DirectLs {
            basis_size: c.basis_size as usize,
        },
        SivEngine::Backfit => AdditiveEngine::Backfit {
            smoother,
            tol: c.tol,
            max_iter: c.max_iter as usize,
        },
    };
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        return Err(Fail(SivStatus::InvalidArgument, format!("alpha must lie in (0, 1), got {}", c.alpha)));
    }
    Ok(TestConfig {
        smoother,
        engine,
        combine: match c.combine {
            SivCombine::Joint => CombineMethod::Joint,
            SivCombine::Marginal => CombineMethod::Marginal,
        },
        bootstrap: (c.bootstrap_replicates > 0)
            .then(|| BootstrapOptions::new(c.bootstrap_replicates as usize, c.seed)),
        alpha: c.alpha,
    })
}

#[no_mangle]
pub extern "C" fn siv_config_default() -> SivConfig {
    let t = TestConfig::default();
    let basis_size = match t.engine {
        AdditiveEngine::DirectLs { basis_size } => basis_size as u32,
        AdditiveEngine::Backfit { .. } => semiiv::additive::DEFAULT_BASIS_SIZE as u32,
    };
    SivConfig {
        degree: t.smoother.degree as u32,
        span: t.smoother.span,
        kernel: SivKernel::Tricube,
        engine: SivEngine::DirectLs,
        basis_size,
        tol: semiiv::additive::BACKFIT_TOL,
        max_iter: semiiv::additive::BACKFIT_MAX_ITER as u32,
        combine: SivCombine::Joint,
        bootstrap_replicates: 0,
        seed: 0,
        alpha: t.alpha,
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn siv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn siv_dataset_new() -> *mut SivDataset {
    Box::into_raw(Box::new(SivDataset(Dataset::new())))
}

/// # Safety
/// `ds` must be a live dataset handle, `name` a NUL-terminated string and
/// `values` must point to `len` readable doubles (it may be NULL when `len`
/// is 0).
#[no_mangle]
pub unsafe extern "C" fn siv_dataset_add_column(
    ds: *mut SivDataset,
    name: *const c_char,
    values: *const f64,
    len: usize,
) -> SivStatus {
    guard(|| {
        let ds = ds
            .as_mut()
            .ok_or_else(|| Fail(SivStatus::NullPointer, "dataset is null".into()))?;
        let name = text(name, "column name")?;
        let v = if len == 0 {
            Vec::new()
        } else if values.is_null() {
            return Err(Fail(SivStatus::NullPointer, "values are null".into()));
        } else {
            std::slice::from_raw_parts(values, len).to_vec()
        };
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Fail(
                SivStatus::InvalidInput,
                format!("column `{name}` has a non-finite value at index {i}"),
            ));
        }
        ds.0.push(name, v)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn siv_dataset_from_csv(path: *const c_char, out: *mut *mut SivDataset) -> SivStatus {
    guard(|| {
        out_ptr(out)?;
        let path = text(path, "path")?;
        let ds = Dataset::read_csv_path(path)?;
        *out = Box::into_raw(Box::new(SivDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn siv_dataset_n_rows(ds: *const SivDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_rows())
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn siv_dataset_free(ds: *mut SivDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Generates a simulated sample. `with_truth` also stores the hidden
/// columns.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn siv_simulate(
    model: SivModel,
    c: f64,
    n: usize,
    seed: u64,
    with_truth: bool,
    out: *mut *mut SivDataset,
) -> SivStatus {
    guard(|| {
        out_ptr(out)?;
        let sample = match model {
            SivModel::SingleInstrument => gen_single_instrument(c, n, seed)?,
            SivModel::DoubleInstrument => gen_double_instrument(c, n, seed)?,
        };
        let ds = if with_truth { sample.with_truth() } else { sample.data };
        *out = Box::into_raw(Box::new(SivDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset, the names NUL-terminated strings, `cfg`
/// NULL (defaults) or readable, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn siv_semi_instrument_test(
    ds: *const SivDataset,
    instrument: *const c_char,
    treatment: *const c_char,
    outcome: *const c_char,
    cfg: *const SivConfig,
    out: *mut *mut SivReport,
) -> SivStatus {
    guard(|| {
        out_ptr(out)?;
        let data = dataset(ds)?;
        let roles = StructuralRoles::single(
            text(instrument, "instrument")?,
            text(treatment, "treatment")?,
            text(outcome, "outcome")?,
        );
        let cfg = test_config(cfg)?;
        let r = semi_instrument_test(data, &roles, &cfg)?;
        *out = Box::into_raw(Box::new(SivReport(Report::Semi(Envelope::new("semi-instrument", cfg, r)))));
        Ok(())
    })
}

unsafe fn pair_roles(
    z1: *const c_char,
    z2: *const c_char,
    treatment: *const c_char,
    outcome: *const c_char,
) -> Result<StructuralRoles, Fail> {
    Ok(StructuralRoles::pair(
        text(z1, "first instrument")?,
        text(z2, "second instrument")?,
        text(treatment, "treatment")?,
        text(outcome, "outcome")?,
    ))
}

/// # Safety
/// As for [`siv_semi_instrument_test`].
#[no_mangle]
pub unsafe extern "C" fn siv_linear_double_test(
    ds: *const SivDataset,
    z1: *const c_char,
    z2: *const c_char,
    treatment: *const c_char,
    outcome: *const c_char,
    cfg: *const SivConfig,
    out: *mut *mut SivReport,
) -> SivStatus {
    guard(|| {
        out_ptr(out)?;
        let data = dataset(ds)?;
        let roles = pair_roles(z1, z2, treatment, outcome)?;
        let cfg = test_config(cfg)?;
        let r = linear_double_instrument_test(data, &roles, &cfg)?;
        *out = Box::into_raw(Box::new(SivReport(Report::LinearDouble(Envelope::new(
            "linear-double-instrument",
            cfg,
            r,
        )))));
        Ok(())
    })
}

/// # Safety
/// As for [`siv_semi_instrument_test`].
#[no_mangle]
pub unsafe extern "C" fn siv_double_test(
    ds: *const SivDataset,
    z1: *const c_char,
    z2: *const c_char,
    treatment: *const c_char,
    outcome: *const c_char,
    cfg: *const SivConfig,
    out: *mut *mut SivReport,
) -> SivStatus {
    guard(|| {
        out_ptr(out)?;
        let data = dataset(ds)?;
        let roles = pair_roles(z1, z2, treatment, outcome)?;
        let cfg = test_config(cfg)?;
        let r = double_instrument_test(data, &roles, &cfg)?;
        *out = Box::into_raw(Box::new(SivReport(Report::Double(Envelope::new("double-instrument", cfg, r)))));
        Ok(())
    })
}

/// Writes 1 to `accepted` when the null was accepted, 0 otherwise.
///
/// # Safety
/// `report` must be a live report handle and `accepted` writable.
#[no_mangle]
pub unsafe extern "C" fn siv_report_decision(report: *const SivReport, accepted: *mut bool) -> SivStatus {
    guard(|| {
        let r = report
            .as_ref()
            .ok_or_else(|| Fail(SivStatus::NullPointer, "report is null".into()))?;
        if accepted.is_null() {
            return Err(Fail(SivStatus::NullPointer, "output pointer is null".into()));
        }
        *accepted = match &r.0 {
            Report::Semi(e) => e.report.accepted,
            Report::LinearDouble(e) => e.report.accepted,
            Report::Double(e) => e.report.accepted,
        };
        Ok(())
    })
}

/// Pretty JSON for the report, or NULL on failure. Free with
/// [`siv_string_free`].
///
/// # Safety
/// `report` must be a live report handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn siv_report_to_json(report: *const SivReport) -> *mut c_char {
    let mut result = ptr::null_mut();
    guard(|| {
        let r = report
            .as_ref()
            .ok_or_else(|| Fail(SivStatus::NullPointer, "report is null".into()))?;
        let json = match &r.0 {
            Report::Semi(e) => e.to_json(),
            Report::LinearDouble(e) => e.to_json(),
            Report::Double(e) => e.to_json(),
        }?;
        result = CString::new(json)
            .map_err(|_| Fail(SivStatus::Io, "report contains a NUL byte".into()))?
            .into_raw();
        Ok(())
    });
    result
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn siv_report_free(report: *mut SivReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn siv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
