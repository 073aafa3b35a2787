//! C ABI for `so3-frechet`.
//!
//! Rotations cross the boundary as 9 doubles in row-major order, algebra
//! vectors and covariances as 3 and 9 doubles. Every function returns an
//! [`So3Status`]; on failure a message is available from
//! [`so3_last_error_message`] on the calling thread. Objects behind opaque
//! handles are released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use so3_frechet::drift::make_conjugation_drift;
use so3_frechet::frechet::{frechet_mean, frechet_mean_of, FrechetResult};
use so3_frechet::lie::{distance, group_exp, group_log, AlgebraVector, GroupElement};
use so3_frechet::predictor::{integrate_with, IntegrateOptions, PredictionState, VariantFlag};
use so3_frechet::sde::{simulate_ensemble, Ensemble, NoiseModel, PathConfig};
use so3_frechet::Error;

use nalgebra::Matrix3;

/// Result code of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum So3Status {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    AngleNearPi = 3,
    NotARotation = 4,
    NonIsotropicNoise = 5,
    NoConvergence = 6,
    CovarianceBlowup = 7,
    Empty = 8,
    OutOfRange = 9,
    Io = 10,
    Panic = 11,
}

/// Covariance law used by the predictor.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum So3Variant {
    General = 0,
    IsotropicCurvature = 1,
}

impl From<So3Variant> for VariantFlag {
    fn from(v: So3Variant) -> Self {
        match v {
            So3Variant::General => VariantFlag::GeneralEq7,
            So3Variant::IsotropicCurvature => VariantFlag::PaperEq9,
        }
    }
}

/// Predicted mean and covariance trajectory.
pub struct So3Trajectory {
    states: Vec<PredictionState>,
}

/// Simulated ensemble at the terminal time.
pub struct So3Ensemble {
    terminal: Ensemble,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> So3Status {
    match err {
        Error::AngleNearPi { .. } => So3Status::AngleNearPi,
        Error::NotARotation { .. } => So3Status::NotARotation,
        Error::NotAntisymmetric { .. } | Error::InvalidConfig(_) | Error::Json(_) => So3Status::InvalidArgument,
        Error::NonIsotropicNoise => So3Status::NonIsotropicNoise,
        Error::NoConvergence { .. } => So3Status::NoConvergence,
        Error::CovarianceBlowup { .. } => So3Status::CovarianceBlowup,
        Error::Empty(_) => So3Status::Empty,
        Error::Io(_) => So3Status::Io,
    }
}

struct Failure(So3Status, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(So3Status::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> So3Status {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            So3Status::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            So3Status::Panic
        }
    }
}

unsafe fn read<const N: usize>(p: *const f64, what: &str) -> Result<[f64; N], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let mut out = [0.0; N];
    out.copy_from_slice(slice::from_raw_parts(p, N));
    Ok(out)
}

unsafe fn write<const N: usize>(p: *mut f64, values: &[f64; N], what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    slice::from_raw_parts_mut(p, N).copy_from_slice(values);
    Ok(())
}

unsafe fn rotation(p: *const f64, what: &str) -> Result<GroupElement, Failure> {
    Ok(GroupElement::from_row_major(&read::<9>(p, what)?)?)
}

fn generator(a: [f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(&a)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn so3_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn so3_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Exponential of algebra coordinates `c[3]` into `out[9]`.
///
/// # Safety
/// `c` must point to 3 doubles and `out` to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn so3_exp(c: *const f64, out: *mut f64) -> So3Status {
    guard(|| {
        let [x, y, z] = read::<3>(c, "c")?;
        write(out, &group_exp(&AlgebraVector::new(x, y, z)).to_row_major(), "out")
    })
}

/// Logarithm of the rotation `g[9]` into `out[3]`.
///
/// # Safety
/// `g` must point to 9 doubles and `out` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn so3_log(g: *const f64, out: *mut f64) -> So3Status {
    guard(|| {
        let c = group_log(&rotation(g, "g")?)?;
        write(out, &c.to_array(), "out")
    })
}

/// Riemannian distance between two rotations.
///
/// # Safety
/// `a` and `b` must point to 9 doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn so3_distance(a: *const f64, b: *const f64, out: *mut f64) -> So3Status {
    guard(|| {
        let d = distance(&rotation(a, "a")?, &rotation(b, "b")?);
        write(out, &[d], "out")
    })
}

unsafe fn write_frechet(
    r: &FrechetResult,
    mean_out: *mut f64,
    cov_out: *mut f64,
    iterations_out: *mut usize,
) -> Result<(), Failure> {
    write(mean_out, &r.mean.to_row_major(), "mean_out")?;
    if !cov_out.is_null() {
        write(cov_out, &r.covariance().to_row_major(), "cov_out")?;
    }
    if !iterations_out.is_null() {
        *iterations_out = r.iterations;
    }
    Ok(())
}

/// Fréchet mean of `n` rotations stored back to back (`9 n` doubles).
/// `cov_out` and `iterations_out` may be null.
///
/// # Safety
/// `members` must point to `9 n` doubles, `mean_out` to 9 writable doubles,
/// `cov_out` (if non-null) to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn so3_frechet_mean(
    members: *const f64,
    n: usize,
    tol: f64,
    max_iter: usize,
    mean_out: *mut f64,
    cov_out: *mut f64,
    iterations_out: *mut usize,
) -> So3Status {
    guard(|| {
        if members.is_null() {
            return Err(null("members"));
        }
        let group = (0..n).map(|j| rotation(members.add(9 * j), "members")).collect::<Result<Vec<_>, _>>()?;
        let r = frechet_mean_of(&group, tol, max_iter)?;
        write_frechet(&r, mean_out, cov_out, iterations_out)
    })
}

/// Integrates the mean/covariance system from the identity for the
/// conjugation drift `b(X) = X^T A X` and isotropic noise `sigma`.
///
/// # Safety
/// `a` must point to 9 doubles; `out` must be a valid location for a handle.
#[no_mangle]
pub unsafe extern "C" fn so3_trajectory_new(
    a: *const f64,
    sigma: f64,
    horizon: f64,
    steps: usize,
    variant: So3Variant,
    out: *mut *mut So3Trajectory,
) -> So3Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let drift = make_conjugation_drift(&generator(read::<9>(a, "a")?))?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Failure(So3Status::InvalidArgument, format!("sigma must be non-negative, got {sigma}")));
        }
        let opts = IntegrateOptions::new(horizon, steps, variant.into());
        let states = integrate_with(
            &PredictionState::dirac(GroupElement::identity()),
            &drift,
            &NoiseModel::isotropic(sigma),
            &opts,
        )?;
        *out = Box::into_raw(Box::new(So3Trajectory { states }));
        Ok(())
    })
}

/// Number of states (`steps + 1`), or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a handle from [`so3_trajectory_new`].
#[no_mangle]
pub unsafe extern "C" fn so3_trajectory_len(traj: *const So3Trajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.states.len())
}

/// Time, mean (9) and covariance (9) of state `index`.
///
/// # Safety
/// `traj` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn so3_trajectory_state(
    traj: *const So3Trajectory,
    index: usize,
    t_out: *mut f64,
    mean_out: *mut f64,
    cov_out: *mut f64,
) -> So3Status {
    guard(|| {
        let traj = traj.as_ref().ok_or_else(|| null("traj"))?;
        let s = traj
            .states
            .get(index)
            .ok_or_else(|| Failure(So3Status::OutOfRange, format!("index {index} out of range")))?;
        write(t_out, &[s.t], "t_out")?;
        write(mean_out, &s.mean.to_row_major(), "mean_out")?;
        write(cov_out, &s.cov.to_row_major(), "cov_out")
    })
}

/// Releases a trajectory; null is ignored.
///
/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn so3_trajectory_free(traj: *mut So3Trajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Simulates `n_paths` paths from the identity and keeps the terminal slice.
///
/// # Safety
/// `a` must point to 9 doubles; `out` must be a valid location for a handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn so3_ensemble_simulate(
    a: *const f64,
    sigma: f64,
    horizon: f64,
    steps: usize,
    seed: u64,
    n_paths: usize,
    ball_radius: f64,
    out: *mut *mut So3Ensemble,
) -> So3Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let drift = make_conjugation_drift(&generator(read::<9>(a, "a")?))?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Failure(So3Status::InvalidArgument, format!("sigma must be non-negative, got {sigma}")));
        }
        let config = PathConfig::new(horizon, steps, seed, ball_radius)?;
        let mut slices =
            simulate_ensemble(&config, &drift, &NoiseModel::isotropic(sigma), &GroupElement::identity(), n_paths)?;
        let terminal = slices.pop().ok_or(Error::Empty("no slices"))?;
        *out = Box::into_raw(Box::new(So3Ensemble { terminal }));
        Ok(())
    })
}

/// Number of members, or 0 for a null handle.
///
/// # Safety
/// `ens` must be null or a handle from [`so3_ensemble_simulate`].
#[no_mangle]
pub unsafe extern "C" fn so3_ensemble_len(ens: *const So3Ensemble) -> usize {
    ens.as_ref().map_or(0, |e| e.terminal.len())
}

/// Number of paths stopped at the ball boundary, or 0 for a null handle.
///
/// # Safety
/// `ens` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn so3_ensemble_stopped_count(ens: *const So3Ensemble) -> usize {
    ens.as_ref().map_or(0, |e| e.terminal.stopped_count())
}

/// Member `index` as a row-major rotation.
///
/// # Safety
/// `ens` must be a live handle and `out` must point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn so3_ensemble_member(ens: *const So3Ensemble, index: usize, out: *mut f64) -> So3Status {
    guard(|| {
        let ens = ens.as_ref().ok_or_else(|| null("ens"))?;
        let g = ens
            .terminal
            .members
            .get(index)
            .ok_or_else(|| Failure(So3Status::OutOfRange, format!("index {index} out of range")))?;
        write(out, &g.to_row_major(), "out")
    })
}

/// Fréchet mean and empirical covariance of the terminal slice.
/// `cov_out` and `iterations_out` may be null.
///
/// # Safety
/// `ens` must be a live handle; `mean_out` must point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn so3_ensemble_frechet_mean(
    ens: *const So3Ensemble,
    tol: f64,
    max_iter: usize,
    mean_out: *mut f64,
    cov_out: *mut f64,
    iterations_out: *mut usize,
) -> So3Status {
    guard(|| {
        let ens = ens.as_ref().ok_or_else(|| null("ens"))?;
        let r = frechet_mean(&ens.terminal, tol, max_iter)?;
        write_frechet(&r, mean_out, cov_out, iterations_out)
    })
}

/// Releases an ensemble; null is ignored.
///
/// # Safety
/// `ens` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn so3_ensemble_free(ens: *mut So3Ensemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}
