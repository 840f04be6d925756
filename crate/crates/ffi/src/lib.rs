//! C ABI for warfarin-gate.
//!
//! Functions return a [`WgStatus`]; results go through out-pointers. On
//! failure the message is kept per thread and read with
//! [`wg_last_error_message`]. Models are opaque handles released with
//! [`wg_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use warfarin_gate::cohort::Race;
use warfarin_gate::eval::{mae, rmse};
use warfarin_gate::gate::{label_record, GateConfig, GateLabel};
use warfarin_gate::iwpc_dose::{DoseCovariates, IwpcCoefficients};
use warfarin_gate::svm::SvmModel;
use warfarin_gate::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Numerical = 5,
    Panic = 6,
}

pub const WG_RACE_MISSING: u8 = 0;
pub const WG_RACE_WHITE: u8 = 1;
pub const WG_RACE_AFRICAN_AMERICAN: u8 = 2;
pub const WG_RACE_ASIAN: u8 = 3;

/// Label written for a patient the dose model should not be used on.
pub const WG_LABEL_HIGH_RISK: i32 = 1;
/// Label written for a patient the dose model is expected to serve.
pub const WG_LABEL_SAFE: i32 = -1;

/// Inputs of the IWPC dose model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WgCovariates {
    /// Completed decades of age, 0 to 9.
    pub age_decade: u8,
    pub height_cm: f64,
    pub weight_kg: f64,
    /// One of the `WG_RACE_*` codes.
    pub race: u8,
    /// Nonzero when taking carbamazepine, phenytoin or rifampin.
    pub enzyme: u8,
    pub amiodarone: u8,
}

/// Trained gate classifier.
pub struct WgModel {
    inner: SvmModel,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: WgStatus,
    message: String,
}

impl Failure {
    fn new(status: WgStatus, message: impl Into<String>) -> Self {
        Failure { status, message: message.into() }
    }

    fn null(what: &str) -> Self {
        Failure::new(WgStatus::NullPointer, format!("`{what}` is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => WgStatus::Io,
            _ => match e.exit_code() {
                1 => WgStatus::InvalidArgument,
                2 => WgStatus::Data,
                _ => WgStatus::Numerical,
            },
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WgStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WgStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            WgStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| Failure::new(WgStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

fn wrap(model: SvmModel) -> *mut WgModel {
    let names = model.feature_names().iter().map(|n| CString::new(n.as_str()).unwrap_or_default()).collect();
    Box::into_raw(Box::new(WgModel { inner: model, names }))
}

unsafe fn model_ref<'a>(model: *const WgModel) -> Result<&'a WgModel, Failure> {
    model.as_ref().ok_or_else(|| Failure::null("model"))
}

/// Message of the last failed call on this thread, or null after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn wg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Load a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wg_model_load(path: *const c_char, out: *mut *mut WgModel) -> WgStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let model = SvmModel::load(Path::new(path))?;
        write_out(out, wrap(model), "out")
    })
}

/// Parse a model from its text serialization.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wg_model_from_str(text: *const c_char, out: *mut *mut WgModel) -> WgStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let model = SvmModel::from_text(text)?;
        write_out(out, wrap(model), "out")
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from `wg_model_load` or `wg_model_from_str` and not
/// have been freed.
#[no_mangle]
pub unsafe extern "C" fn wg_model_free(model: *mut WgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of features the model expects; 0 for a null model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wg_model_n_features(model: *const WgModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_features())
}

/// Name of feature `index`, owned by the model; null when out of range.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wg_model_feature_name(model: *const WgModel, index: usize) -> *const c_char {
    model.as_ref().and_then(|m| m.names.get(index)).map_or(ptr::null(), |c| c.as_ptr())
}

/// Decision value for raw (unscaled) features in the model's order.
///
/// # Safety
/// `x` must point to `len` doubles and `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn wg_model_decision_value(
    model: *const WgModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> WgStatus {
    guard(|| {
        let model = model_ref(model)?;
        let x = read_slice(x, len, "x")?;
        let value = model.inner.decision_value(x)?;
        write_out(out, value, "out")
    })
}

/// Gate label (`WG_LABEL_*`) for raw features in the model's order.
///
/// # Safety
/// `x` must point to `len` doubles and `out` to one int.
#[no_mangle]
pub unsafe extern "C" fn wg_model_predict(model: *const WgModel, x: *const f64, len: usize, out: *mut i32) -> WgStatus {
    guard(|| {
        let model = model_ref(model)?;
        let x = read_slice(x, len, "x")?;
        let label = GateLabel::from_sign(model.inner.decision_value(x)?);
        write_out(out, label_code(label), "out")
    })
}

fn label_code(label: GateLabel) -> i32 {
    match label {
        GateLabel::HighRisk => WG_LABEL_HIGH_RISK,
        GateLabel::SafeForModel => WG_LABEL_SAFE,
    }
}

/// Weekly warfarin dose (mg/week) from the published IWPC coefficients.
///
/// # Safety
/// `covariates` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wg_iwpc_weekly_dose(covariates: *const WgCovariates, out: *mut f64) -> WgStatus {
    guard(|| {
        let c = covariates.as_ref().ok_or_else(|| Failure::null("covariates"))?;
        let race = Race::from_code(c.race)
            .ok_or_else(|| Failure::new(WgStatus::InvalidArgument, format!("unknown race code {}", c.race)))?;
        let covariates = DoseCovariates {
            age_decade: c.age_decade,
            height_cm: c.height_cm,
            weight_kg: c.weight_kg,
            race,
            enzyme: c.enzyme != 0,
            amiodarone: c.amiodarone != 0,
        };
        let dose = covariates.weekly_dose(&IwpcCoefficients::PUBLISHED)?;
        write_out(out, dose, "out")
    })
}

/// Ground-truth gate label: high-risk when the relative dose error
/// exceeds `threshold`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wg_gate_label(
    predicted_mg_week: f64,
    therapeutic_mg_week: f64,
    threshold: f64,
    out: *mut i32,
) -> WgStatus {
    guard(|| {
        let config = GateConfig::new(threshold)?;
        let label = label_record(predicted_mg_week, therapeutic_mg_week, &config)?;
        write_out(out, label_code(label), "out")
    })
}

/// Root mean squared error of two equally long arrays.
///
/// # Safety
/// `actual` and `predicted` must point to `len` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn wg_rmse(actual: *const f64, predicted: *const f64, len: usize, out: *mut f64) -> WgStatus {
    guard(|| {
        let value = rmse(read_slice(actual, len, "actual")?, read_slice(predicted, len, "predicted")?)?;
        write_out(out, value, "out")
    })
}

/// Mean absolute error of two equally long arrays.
///
/// # Safety
/// `actual` and `predicted` must point to `len` doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn wg_mae(actual: *const f64, predicted: *const f64, len: usize, out: *mut f64) -> WgStatus {
    guard(|| {
        let value = mae(read_slice(actual, len, "actual")?, read_slice(predicted, len, "predicted")?)?;
        write_out(out, value, "out")
    })
}
