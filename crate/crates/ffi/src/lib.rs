//! C interface to `vkoga-ie`.
//!
//! Every fallible function returns a [`VkieStatus`]. On failure a message
//! is available from [`vkie_last_error_message`] on the calling thread.
//! Models are opaque [`VkieModel`] handles released with [`vkie_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use vkoga_ie::burgers::{BurgersGrid, BurgersProblem};
use vkoga_ie::kernel::{gaussian_eval, ShapeParameter};
use vkoga_ie::ode::{self, Initializer, NewtonSettings, StepPredictor};
use vkoga_ie::pipeline::{load_model, save_model, ProblemSpec, Provenance, SurrogateModel};
use vkoga_ie::vkoga::{train, SelectionRule, TrainConfig, TrainingSet};
use vkoga_ie::Error;

/// Result codes. `VKIE_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VkieStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Format = 5,
    Numerical = 6,
    Panic = 7,
}

/// Greedy selection rule for [`vkie_train`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VkieRule {
    F = 0,
    P = 1,
    Fp = 2,
}

/// Statistics of a [`vkie_burgers_integrate`] run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VkieRunStats {
    pub steps: usize,
    pub total_iterations: usize,
    pub mean_iterations: f64,
    pub mean_initializer_residual: f64,
    pub wall_time_s: f64,
    /// 1 if every step converged, 0 if the run stopped early.
    pub completed: i32,
}

/// Opaque trained surrogate.
pub struct VkieModel {
    inner: SurrogateModel,
}

struct Failure(VkieStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => VkieStatus::DimensionMismatch,
            Error::InvalidInput(_) | Error::Config(_) | Error::InconsistentData(_) => {
                VkieStatus::InvalidArgument
            }
            Error::Io(_) => VkieStatus::Io,
            Error::Json(_) | Error::ModelFormat(_) => VkieStatus::Format,
            _ => VkieStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(VkieStatus::NullPointer, format!("{what} is null"))
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> VkieStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => VkieStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            VkieStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(VkieStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn model_ref<'a>(m: *const VkieModel) -> Result<&'a SurrogateModel, Failure> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn write_out(values: &[f64], out: *mut f64, out_len: usize) -> Result<(), Failure> {
    if out_len != values.len() {
        return Err(Failure(
            VkieStatus::DimensionMismatch,
            format!(
                "output buffer holds {out_len} values, need {}",
                values.len()
            ),
        ));
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vkie_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vkie_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model file and stores a new handle in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_load(
    path: *const c_char,
    out: *mut *mut VkieModel,
) -> VkieStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let model = load_model(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(VkieModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_save(
    model: *const VkieModel,
    path: *const c_char,
) -> VkieStatus {
    guard(|| {
        let m = model_ref(model)?;
        save_model(m, path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_free(model: *mut VkieModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension `1 + state_dim`; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_input_dim(model: *const VkieModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_dim())
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_output_dim(model: *const VkieModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.output_dim())
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_num_centers(model: *const VkieModel) -> usize {
    model
        .as_ref()
        .map_or(0, |m| m.inner.expansion.num_centers())
}

/// Kernel shape parameter; NaN for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_epsilon(model: *const VkieModel) -> f64 {
    model
        .as_ref()
        .map_or(f64::NAN, |m| m.inner.expansion.epsilon().value())
}

/// Evaluates the model at a raw input `x` of length `input_dim`.
///
/// # Safety
/// `x` must point to `x_len` doubles and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_eval(
    model: *const VkieModel,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> VkieStatus {
    guard(|| {
        let m = model_ref(model)?;
        let y = m.eval(slice_arg(x, x_len, "x")?)?;
        write_out(&y, out, out_len)
    })
}

/// Predicts the next state from `u_prev` for timestep `dt`.
///
/// # Safety
/// `u_prev` must point to `len` doubles and `out` to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vkie_model_predict_step(
    model: *const VkieModel,
    dt: f64,
    u_prev: *const f64,
    out: *mut f64,
    len: usize,
) -> VkieStatus {
    guard(|| {
        let m = model_ref(model)?;
        let y = m.predict(dt, slice_arg(u_prev, len, "u_prev")?)?;
        write_out(&y, out, len)
    })
}

/// Trains a one-step surrogate on raw pairs at a fixed shape parameter.
///
/// `inputs` is row-major `n x (state_dim + 1)` with rows `(dt, u)`, and
/// `targets` is row-major `n x state_dim`. `max_centers = 0` means no cap.
///
/// # Safety
/// Array pointers must cover the stated sizes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vkie_train(
    inputs: *const f64,
    targets: *const f64,
    n: usize,
    state_dim: usize,
    epsilon: f64,
    tolerance: f64,
    max_centers: usize,
    rule: VkieRule,
    out: *mut *mut VkieModel,
) -> VkieStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if n == 0 || state_dim == 0 {
            return Err(Failure(
                VkieStatus::InvalidArgument,
                "need at least one pair and state_dim >= 1".into(),
            ));
        }
        let p = state_dim + 1;
        let x = slice_arg(inputs, n * p, "inputs")?;
        let y = slice_arg(targets, n * state_dim, "targets")?;
        let data = TrainingSet::new(
            x.chunks(p).map(<[f64]>::to_vec).collect(),
            y.chunks(state_dim).map(<[f64]>::to_vec).collect(),
        )?;
        let rule = match rule {
            VkieRule::F => SelectionRule::FGreedy,
            VkieRule::P => SelectionRule::PGreedy,
            VkieRule::Fp => SelectionRule::FpGreedy,
        };
        let cfg = TrainConfig {
            tolerance,
            max_centers: (max_centers > 0).then_some(max_centers),
            rule,
            epsilon: ShapeParameter::new(epsilon)?,
        };
        let outcome = train(&data, &cfg)?;
        let problem = ProblemSpec::Custom { state_dim };
        let provenance = Provenance {
            problem,
            initial_condition: problem.initial_condition().to_string(),
            training_runs: Vec::new(),
            t_train: 0.0,
            rule,
            tolerance,
            max_centers: cfg.max_centers,
            epsilon,
            epsilon_source: "fixed".into(),
            training_points: n,
            training_points_before_dedup: n,
            selected_centers: outcome.expansion.num_centers(),
            stop_reason: outcome.stop_reason,
            cv_scores: None,
        };
        let model = SurrogateModel::new(outcome.expansion, None, provenance)?;
        *out = Box::into_raw(Box::new(VkieModel { inner: model }));
        Ok(())
    })
}

/// Gaussian kernel value `exp(-epsilon^2 |x - y|^2)`.
///
/// # Safety
/// `x` and `y` must point to `dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vkie_gaussian(
    x: *const f64,
    y: *const f64,
    dim: usize,
    epsilon: f64,
    out: *mut f64,
) -> VkieStatus {
    guard(|| {
        let x = slice_arg(x, dim, "x")?;
        let y = slice_arg(y, dim, "y")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = gaussian_eval(x, y, ShapeParameter::new(epsilon)?)?;
        Ok(())
    })
}

/// Integrates the Burgers Riemann problem with implicit Euler.
///
/// With `model` NULL each Newton solve starts from the previous state,
/// otherwise from the model prediction. `final_state` may be NULL; if given
/// it receives the last computed state (`cells` values). A run that stops
/// early returns `VKIE_STATUS_NUMERICAL` with `stats.completed = 0`.
///
/// # Safety
/// `model` must be NULL or a live handle, `stats` valid, and `final_state`
/// NULL or `cells` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vkie_burgers_integrate(
    cells: usize,
    half_width: f64,
    u_left: f64,
    u_right: f64,
    dt: f64,
    t_end: f64,
    model: *const VkieModel,
    stats: *mut VkieRunStats,
    final_state: *mut f64,
) -> VkieStatus {
    guard(|| {
        if stats.is_null() {
            return Err(null("stats"));
        }
        let problem = BurgersProblem::new(BurgersGrid::new(cells, half_width)?);
        let init = match model.as_ref() {
            Some(m) => Initializer::Surrogate(&m.inner),
            None => Initializer::PreviousValue,
        };
        let mu = [u_left, u_right];
        let traj = ode::integrate(&problem, &mu, dt, t_end, init, &NewtonSettings::default())?;
        *stats = VkieRunStats {
            steps: traj.stats.len(),
            total_iterations: traj.total_iterations(),
            mean_iterations: traj.mean_iterations(),
            mean_initializer_residual: traj.mean_initializer_residual(),
            wall_time_s: traj.wall_time_s,
            completed: i32::from(traj.is_complete()),
        };
        if !final_state.is_null() {
            write_out(traj.final_state(), final_state, cells)?;
        }
        match &traj.failure {
            Some(f) => Err(Failure(
                VkieStatus::Numerical,
                format!("step {}: {}", f.step, f.message),
            )),
            None => Ok(()),
        }
    })
}
