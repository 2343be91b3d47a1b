//! C interface to `mma-doa`.
//!
//! Patterns live behind the opaque [`MmaPattern`] handle. Every fallible call
//! returns an [`MmaStatus`]; on failure [`mma_last_error`] describes the cause
//! for the calling thread. Angles are radians.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mma_doa::basis::{BasisSpec, Dimension};
use mma_doa::crb::fisher_information;
use mma_doa::estimator::{estimate, EstimatorConfig, FieldOfView, Objective};
use mma_doa::pattern::{
    eval_pattern, eval_pattern_grad, fit_pattern, load_model, load_pattern_samples, save_model, synth_pattern,
    FitOptions, PatternModel,
};
use mma_doa::signal::{power_mean, power_pdf, power_var, simulate_power, stream_rng, PowerMeasurement, SignalParams};
use mma_doa::Error;

pub const MMA_OBJECTIVE_ML: c_int = 0;
pub const MMA_OBJECTIVE_SIMPLIFIED: c_int = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Domain = 3,
    Pole = 4,
    IllConditioned = 5,
    NotIdentifiable = 6,
    DimensionMismatch = 7,
    NonFinite = 8,
    Parse = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Fitted multi-port power pattern.
pub struct MmaPattern(PatternModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmaEstimate {
    pub theta: f64,
    /// 0 in 2D.
    pub phi: f64,
    pub signal_power: f64,
    pub noise_var: f64,
    pub objective_value: f64,
    pub converged: bool,
    pub floor_active: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmaFisher {
    pub crb_theta: f64,
    /// NaN in 2D.
    pub crb_phi: f64,
    pub condition: f64,
    /// Number of parameters: 3 in 2D, 4 in 3D.
    pub size: usize,
    pub singular: bool,
    pub floor_active: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MmaStatus {
    match err {
        Error::Domain(_) => MmaStatus::Domain,
        Error::Pole { .. } => MmaStatus::Pole,
        Error::Underdetermined { .. } | Error::InvalidInput(_) | Error::DegeneratePattern(_) => MmaStatus::InvalidInput,
        Error::IllConditioned(_) => MmaStatus::IllConditioned,
        Error::NotIdentifiable { .. } => MmaStatus::NotIdentifiable,
        Error::DimensionMismatch(_) => MmaStatus::DimensionMismatch,
        Error::NonFinite(_) => MmaStatus::NonFinite,
        Error::Parse { .. } => MmaStatus::Parse,
        Error::Io(_) => MmaStatus::Io,
    }
}

struct Fail(MmaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail(status: MmaStatus, msg: &str) -> Fail {
    Fail(status, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MmaStatus::Panic
        }
    }
}

unsafe fn pattern_ref<'a>(p: *const MmaPattern) -> Result<&'a PatternModel, Fail> {
    p.as_ref()
        .map(|p| &p.0)
        .ok_or_else(|| fail(MmaStatus::NullPointer, "null pattern handle"))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(fail(MmaStatus::NullPointer, "null path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| fail(MmaStatus::InvalidInput, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_slice<'a>(buf: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if buf.is_null() {
        return Err(fail(MmaStatus::NullPointer, "null output buffer"));
    }
    if len < need {
        return Err(Fail(
            MmaStatus::BufferTooSmall,
            format!("output buffer holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(buf, need))
}

unsafe fn write_handle(out: *mut *mut MmaPattern, model: PatternModel) -> Result<(), Fail> {
    if out.is_null() {
        return Err(fail(MmaStatus::NullPointer, "null output handle"));
    }
    *out = Box::into_raw(Box::new(MmaPattern(model)));
    Ok(())
}

fn dimension_arg(dim: c_int) -> Result<Dimension, Fail> {
    match dim {
        2 => Ok(Dimension::TwoD),
        3 => Ok(Dimension::ThreeD),
        _ => Err(Fail(
            MmaStatus::InvalidInput,
            format!("dimension must be 2 or 3, got {dim}"),
        )),
    }
}

fn basis_arg(dim: c_int, order: usize) -> Result<BasisSpec, Fail> {
    Ok(match dimension_arg(dim)? {
        Dimension::TwoD => BasisSpec::fourier(order),
        Dimension::ThreeD => BasisSpec::spherical(order),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn mma_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_load(path: *const c_char, out: *mut *mut MmaPattern) -> MmaStatus {
    guard(|| {
        let model = load_model(path_arg(path)?)?;
        write_handle(out, model)
    })
}

/// # Safety
/// `pattern` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_save(pattern: *const MmaPattern, path: *const c_char) -> MmaStatus {
    guard(|| {
        save_model(pattern_ref(pattern)?, path_arg(path)?)?;
        Ok(())
    })
}

/// Random smooth nonnegative pattern of amplitude order `order` (power order `2 * order`).
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_synth(
    seed: u64,
    ports: usize,
    dimension: c_int,
    order: usize,
    smoothness: f64,
    out: *mut *mut MmaPattern,
) -> MmaStatus {
    guard(|| {
        let model = synth_pattern(seed, ports, basis_arg(dimension, order)?, smoothness)?;
        write_handle(out, model)
    })
}

/// Fits a calibration CSV. `truncation_tol <= 0` keeps the full order.
/// `residual_rms` may be NULL.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_fit_csv(
    path: *const c_char,
    dimension: c_int,
    order: usize,
    truncation_tol: f64,
    out: *mut *mut MmaPattern,
    residual_rms: *mut f64,
) -> MmaStatus {
    guard(|| {
        let samples = load_pattern_samples(path_arg(path)?)?;
        let options = FitOptions {
            truncation_tol: (truncation_tol > 0.0).then_some(truncation_tol),
            normalize: true,
        };
        let (model, report) = fit_pattern(&samples, basis_arg(dimension, order)?, &options)?;
        if let Some(r) = residual_rms.as_mut() {
            *r = report.residual_rms;
        }
        write_handle(out, model)
    })
}

/// # Safety
/// `pattern` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_free(pattern: *mut MmaPattern) {
    if !pattern.is_null() {
        drop(Box::from_raw(pattern));
    }
}

/// Port count, or 0 for NULL.
///
/// # Safety
/// `pattern` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_ports(pattern: *const MmaPattern) -> usize {
    pattern.as_ref().map_or(0, |p| p.0.ports())
}

/// 2 or 3, or 0 for NULL.
///
/// # Safety
/// `pattern` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_dimension(pattern: *const MmaPattern) -> c_int {
    pattern.as_ref().map_or(0, |p| match p.0.dimension() {
        Dimension::TwoD => 2,
        Dimension::ThreeD => 3,
    })
}

/// Floored per-port gains. `floor_active` may be NULL.
///
/// # Safety
/// `gains` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_eval(
    pattern: *const MmaPattern,
    theta: f64,
    phi: f64,
    gains: *mut f64,
    len: usize,
    floor_active: *mut bool,
) -> MmaStatus {
    guard(|| {
        let model = pattern_ref(pattern)?;
        let out = out_slice(gains, len, model.ports())?;
        let g = eval_pattern(model, theta, phi);
        out.copy_from_slice(&g.values);
        if let Some(f) = floor_active.as_mut() {
            *f = g.floor_active;
        }
        Ok(())
    })
}

/// Angular gradient of the gains; `dphi` is all zero in 2D.
///
/// # Safety
/// `dtheta` and `dphi` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mma_pattern_eval_grad(
    pattern: *const MmaPattern,
    theta: f64,
    phi: f64,
    dtheta: *mut f64,
    dphi: *mut f64,
    len: usize,
) -> MmaStatus {
    guard(|| {
        let model = pattern_ref(pattern)?;
        let m = model.ports();
        let dt = out_slice(dtheta, len, m)?;
        let dp = out_slice(dphi, len, m)?;
        let grad = eval_pattern_grad(model, theta, phi)?;
        dt.copy_from_slice(&grad.dtheta);
        dp.copy_from_slice(&grad.dphi);
        Ok(())
    })
}

/// One `snapshots`-snapshot power measurement drawn from random stream
/// `(seed, stream)`.
///
/// # Safety
/// `powers` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mma_simulate(
    pattern: *const MmaPattern,
    theta: f64,
    phi: f64,
    signal_power: f64,
    noise_var: f64,
    snapshots: usize,
    seed: u64,
    stream: u64,
    powers: *mut f64,
    len: usize,
) -> MmaStatus {
    guard(|| {
        let model = pattern_ref(pattern)?;
        let out = out_slice(powers, len, model.ports())?;
        let params = SignalParams::new(theta, phi, signal_power, noise_var)?;
        let meas = simulate_power(model, &params, snapshots, &mut stream_rng(seed, stream))?;
        out.copy_from_slice(meas.port_powers());
        Ok(())
    })
}

/// Estimates direction, signal power and noise variance from `len` port powers.
/// Theta is searched over `[theta_lo, theta_hi]`; pass NaN for both to search
/// the full range.
///
/// # Safety
/// `powers` must hold `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mma_estimate(
    pattern: *const MmaPattern,
    powers: *const f64,
    len: usize,
    snapshots: usize,
    objective: c_int,
    theta_lo: f64,
    theta_hi: f64,
    out: *mut MmaEstimate,
) -> MmaStatus {
    guard(|| {
        let model = pattern_ref(pattern)?;
        if powers.is_null() || out.is_null() {
            return Err(fail(MmaStatus::NullPointer, "null powers or output"));
        }
        let objective = match objective {
            MMA_OBJECTIVE_ML => Objective::Ml,
            MMA_OBJECTIVE_SIMPLIFIED => Objective::Simplified,
            o => return Err(Fail(MmaStatus::InvalidInput, format!("unknown objective {o}"))),
        };
        let dim = model.dimension();
        let fov = if theta_lo.is_nan() && theta_hi.is_nan() {
            FieldOfView::full(dim)
        } else {
            FieldOfView::theta_range(dim, theta_lo, theta_hi)?
        };
        let meas = PowerMeasurement::new(std::slice::from_raw_parts(powers, len).to_vec(), snapshots)?;
        let cfg = EstimatorConfig::default_for(dim)
            .with_objective(objective)
            .with_fov(fov);
        let e = estimate(&meas, model, &cfg)?;
        *out = MmaEstimate {
            theta: e.params_hat.theta,
            phi: e.params_hat.phi,
            signal_power: e.params_hat.signal_power,
            noise_var: e.params_hat.noise_var,
            objective_value: e.objective_value,
            converged: e.converged,
            floor_active: e.floor_active,
        };
        Ok(())
    })
}

/// Fisher information and bounds. When `matrix` is not NULL it receives the
/// row-major information matrix and must hold `matrix_len >= size * size` doubles.
///
/// # Safety
/// `out` must be writable; `matrix` as above.
#[no_mangle]
pub unsafe extern "C" fn mma_fisher(
    pattern: *const MmaPattern,
    theta: f64,
    phi: f64,
    signal_power: f64,
    noise_var: f64,
    snapshots: usize,
    out: *mut MmaFisher,
    matrix: *mut f64,
    matrix_len: usize,
) -> MmaStatus {
    guard(|| {
        let model = pattern_ref(pattern)?;
        let out = out
            .as_mut()
            .ok_or_else(|| fail(MmaStatus::NullPointer, "null output"))?;
        let params = SignalParams::new(theta, phi, signal_power, noise_var)?;
        let fi = fisher_information(model, &params, snapshots)?;
        let n = fi.matrix.nrows();
        if !matrix.is_null() {
            let buf = out_slice(matrix, matrix_len, n * n)?;
            for i in 0..n {
                for j in 0..n {
                    buf[i * n + j] = fi.matrix[(i, j)];
                }
            }
        }
        *out = MmaFisher {
            crb_theta: fi.crb_theta,
            crb_phi: fi.crb_phi.unwrap_or(f64::NAN),
            condition: fi.condition,
            size: n,
            singular: fi.singular,
            floor_active: fi.floor_active,
        };
        Ok(())
    })
}

/// Exact density of one port's `snapshots`-snapshot mean power; NaN on invalid arguments.
#[no_mangle]
pub extern "C" fn mma_power_pdf(x: f64, gain: f64, signal_power: f64, noise_var: f64, snapshots: usize) -> f64 {
    if !(noise_var > 0.0) || snapshots == 0 || !(gain >= 0.0) || !(signal_power >= 0.0) {
        return f64::NAN;
    }
    power_pdf(x, gain, signal_power, noise_var, snapshots)
}

/// Mean port power `gain * signal_power + noise_var`.
#[no_mangle]
pub extern "C" fn mma_power_mean(gain: f64, signal_power: f64, noise_var: f64) -> f64 {
    power_mean(gain, signal_power, noise_var)
}

/// Variance of the `snapshots`-snapshot mean port power; NaN when `snapshots == 0`.
#[no_mangle]
pub extern "C" fn mma_power_var(gain: f64, signal_power: f64, noise_var: f64, snapshots: usize) -> f64 {
    if snapshots == 0 {
        return f64::NAN;
    }
    power_var(gain, signal_power, noise_var, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses_follow_errors() {
        assert_eq!(status_of(&Error::Pole { theta: 0.0 }), MmaStatus::Pole);
        assert_eq!(
            status_of(&Error::NotIdentifiable { ports: 2, unknowns: 3 }),
            MmaStatus::NotIdentifiable
        );
        assert_eq!(dimension_arg(4).err().map(|f| f.0), Some(MmaStatus::InvalidInput));
    }

    #[test]
    fn panics_are_contained() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, MmaStatus::Panic);
        assert!(!mma_last_error().is_null());
    }
}
