//! Deterministic prediction of the Fréchet mean `E_t` and of the second
//! moment `Σ_t = E[ν ⊗ ν]` of the error `ν_t = log(E_t, X_t)`.
//!
//! The mean obeys `dE = E h dt` with
//!
//! ```text
//! h = b(E) + ½ (Hess b − [T b(·), ·] + ⅛ Σ_i [[[σ_i, ·], ·], σ_i]) · Σ
//! ```
//!
//! and the second moment obeys a linear ODE whose coefficients depend on
//! `E` through `b(E)` and its differential. Bilinear maps contract `Σ` as
//! `Σ_ab S_ab L(e_a, e_b)`; an operator `M` enters as `M Σ + Σ M^T`.

use std::io::Write;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::lie::{ad, bracket, group_exp, AlgebraOperator, AlgebraVector, CovMatrix, GroupElement};
use crate::sde::{fmt_f64, NoiseModel, DEFAULT_BALL_RADIUS};

/// Eigenvalue floor below which a covariance is considered broken.
pub const EIGEN_FLOOR: f64 = -1e-12;

/// Which covariance evolution law to integrate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantFlag {
    /// Generic-group law, specialised numerically to the given noise.
    #[default]
    #[serde(rename = "general_eq7", alias = "general-eq7")]
    GeneralEq7,
    /// Isotropic SO(3) law with the `⅛ E[|ν|² Id_{ν⊥}]` curvature term.
    #[serde(rename = "paper_eq9", alias = "paper-eq9")]
    PaperEq9,
}

impl VariantFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            VariantFlag::GeneralEq7 => "general_eq7",
            VariantFlag::PaperEq9 => "paper_eq9",
        }
    }
}

impl std::str::FromStr for VariantFlag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general_eq7" | "general-eq7" => Ok(VariantFlag::GeneralEq7),
            "paper_eq9" | "paper-eq9" => Ok(VariantFlag::PaperEq9),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionState {
    pub mean: GroupElement,
    pub cov: CovMatrix,
    pub t: f64,
}

impl PredictionState {
    /// Dirac initial law at `g`.
    pub fn dirac(g: GroupElement) -> Self {
        Self { mean: g, cov: CovMatrix::zero(), t: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_cov(&self.cov, self.t, f64::INFINITY)
    }
}

fn check_cov(cov: &CovMatrix, t: f64, max_trace: f64) -> Result<()> {
    let m = cov.matrix();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::CovarianceBlowup { t, reason: "non-finite entry".into() });
    }
    if cov.asymmetry() > 1e-12 * (1.0 + cov.frobenius()) {
        return Err(Error::CovarianceBlowup { t, reason: "covariance is not symmetric".into() });
    }
    let min = cov.min_eigenvalue();
    if min < EIGEN_FLOOR {
        return Err(Error::CovarianceBlowup { t, reason: format!("eigenvalue {min:e} below floor") });
    }
    if cov.trace() > max_trace {
        return Err(Error::CovarianceBlowup {
            t,
            reason: format!("trace {} exceeds squared ball radius {max_trace}", cov.trace()),
        });
    }
    Ok(())
}

/// `Σ_ab S_ab L(e_a, e_b)`.
pub fn apply_bilinear<L>(l: L, s: &CovMatrix) -> AlgebraVector
where
    L: Fn(&AlgebraVector, &AlgebraVector) -> AlgebraVector,
{
    let mut out = AlgebraVector::zero();
    for a in 0..3 {
        for b in 0..3 {
            let w = s.0[(a, b)];
            if w != 0.0 {
                out += l(&AlgebraVector::basis(a), &AlgebraVector::basis(b)) * w;
            }
        }
    }
    out
}

/// `ν ↦ Σ_i [[σ_i, ν], σ_i]`.
pub fn double_bracket_operator(noise: &NoiseModel) -> AlgebraOperator {
    AlgebraOperator::from_columns_fn(|a| {
        let e = AlgebraVector::basis(a);
        noise.sigmas.iter().fold(AlgebraVector::zero(), |acc, s| acc + bracket(&bracket(s, &e), s))
    })
}

/// `A = T b(E ·) − ad(b(E))`.
fn linear_part<D: DriftModel + ?Sized>(drift: &D, mean: &GroupElement) -> AlgebraOperator {
    drift.differential(mean) - ad(&drift.value(mean))
}

/// Mean velocity for an arbitrary noise model.
pub fn h_general<D: DriftModel + ?Sized>(state: &PredictionState, drift: &D, noise: &NoiseModel) -> AlgebraVector {
    let b = drift.value(&state.mean);
    let tb = drift.differential(&state.mean);
    let hess = drift.hessian(&state.mean);
    let correction = apply_bilinear(
        |u, v| {
            let noise_term =
                noise.sigmas.iter().fold(AlgebraVector::zero(), |acc, s| acc + bracket(&bracket(&bracket(s, u), v), s));
            hess.eval(u, v) - bracket(&tb.apply(u), v) + noise_term * 0.125
        },
        &state.cov,
    );
    b + correction * 0.5
}

/// Mean velocity for isotropic SO(3) noise, where the triple-bracket term vanishes.
pub fn h_so3<D: DriftModel + ?Sized>(state: &PredictionState, drift: &D, noise: &NoiseModel) -> Result<AlgebraVector> {
    noise.isotropic_scale().ok_or(Error::NonIsotropicNoise)?;
    let b = drift.value(&state.mean);
    let tb = drift.differential(&state.mean);
    let hess = drift.hessian(&state.mean);
    let correction = apply_bilinear(|u, v| hess.eval(u, v) - bracket(&tb.apply(u), v), &state.cov);
    Ok(b + correction * 0.5)
}

/// Levi-Civita connection of the bi-invariant metric, `∇_u v = ½ [u, v]`.
pub fn connection(u: &AlgebraVector, v: &AlgebraVector) -> AlgebraVector {
    bracket(u, v) * 0.5
}

/// Mean velocity written as `b + (½ Hess b + ∇_· T b(·)) · Σ`.
pub fn h_connection_form<D: DriftModel + ?Sized>(state: &PredictionState, drift: &D) -> AlgebraVector {
    let b = drift.value(&state.mean);
    let tb = drift.differential(&state.mean);
    let hess = drift.hessian(&state.mean);
    b + apply_bilinear(|u, v| hess.eval(u, v) * 0.5 + connection(u, &tb.apply(v)), &state.cov)
}

/// `M Σ + Σ M^T`.
fn sym_action(m: &AlgebraOperator, s: &Matrix3<f64>) -> Matrix3<f64> {
    m.0 * s + s * m.0.transpose()
}

/// Time derivative of `Σ` at `state`.
pub fn sigma_rhs<D: DriftModel + ?Sized>(
    state: &PredictionState,
    drift: &D,
    noise: &NoiseModel,
    variant: VariantFlag,
) -> Result<CovMatrix> {
    let s = state.cov.matrix();
    let a = linear_part(drift, &state.mean);
    let rhs = match variant {
        VariantFlag::GeneralEq7 => {
            let m = a - double_bracket_operator(noise) * (1.0 / 6.0);
            let spread = noise.sigmas.iter().fold(Matrix3::zeros(), |acc, sigma| {
                let ads = ad(sigma).0;
                acc + ads * s * ads.transpose()
            });
            noise.diffusion() + sym_action(&m, s) + spread * 0.25
        }
        VariantFlag::PaperEq9 => {
            let sigma = noise.isotropic_scale().ok_or(Error::NonIsotropicNoise)?;
            // E[|ν|² Id_{ν⊥}] = tr(Σ) I − Σ
            let curvature = Matrix3::identity() * s.trace() - s;
            Matrix3::identity() * (sigma * sigma) + sym_action(&a, s) + curvature * 0.125
        }
    };
    Ok(CovMatrix(rhs))
}

/// Integration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub horizon: f64,
    pub steps: usize,
    pub variant: VariantFlag,
    /// The trace of `Σ` must stay below `ball_radius²`.
    pub ball_radius: f64,
}

impl IntegrateOptions {
    pub fn new(horizon: f64, steps: usize, variant: VariantFlag) -> Self {
        Self { horizon, steps, variant, ball_radius: DEFAULT_BALL_RADIUS }
    }
}

fn velocity<D: DriftModel + ?Sized>(
    state: &PredictionState,
    drift: &D,
    noise: &NoiseModel,
    variant: VariantFlag,
) -> Result<(AlgebraVector, CovMatrix)> {
    let h = match variant {
        VariantFlag::GeneralEq7 => h_general(state, drift, noise),
        VariantFlag::PaperEq9 => h_so3(state, drift, noise)?,
    };
    Ok((h, sigma_rhs(state, drift, noise, variant)?))
}

/// `dexp^{-1}` for `d/dt (E0 exp(u)) = E0 exp(u) h`, truncated at fourth order.
fn dexp_inv(u: &AlgebraVector, h: &AlgebraVector) -> AlgebraVector {
    let uh = bracket(u, h);
    *h + uh * 0.5 + bracket(u, &uh) * (1.0 / 12.0)
}

/// Fixed-step Runge–Kutta–Munthe-Kaas (order 4) for the mean, classical RK4
/// for `Σ`, sharing stage points. Returns `steps + 1` states.
pub fn integrate<D: DriftModel + ?Sized>(
    state0: &PredictionState,
    drift: &D,
    noise: &NoiseModel,
    horizon: f64,
    steps: usize,
    variant: VariantFlag,
) -> Result<Vec<PredictionState>> {
    integrate_with(state0, drift, noise, &IntegrateOptions::new(horizon, steps, variant))
}

pub fn integrate_with<D: DriftModel + ?Sized>(
    state0: &PredictionState,
    drift: &D,
    noise: &NoiseModel,
    opts: &IntegrateOptions,
) -> Result<Vec<PredictionState>> {
    if opts.steps == 0 {
        return Err(Error::InvalidConfig("steps must be at least 1".into()));
    }
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", opts.horizon)));
    }
    state0.validate()?;
    let max_trace = opts.ball_radius * opts.ball_radius;
    let dt = opts.horizon / opts.steps as f64;
    let variant = opts.variant;

    let mut out = Vec::with_capacity(opts.steps + 1);
    out.push(*state0);
    let mut cur = *state0;
    for k in 0..opts.steps {
        let at = |u: &AlgebraVector, cov: Matrix3<f64>, c: f64| PredictionState {
            mean: cur.mean * group_exp(u),
            cov: CovMatrix(cov),
            t: cur.t + c * dt,
        };
        let s0 = cur.cov.0;

        let (h1, r1) = velocity(&cur, drift, noise, variant)?;
        let k1 = h1 * dt;

        let u2 = k1 * 0.5;
        let st2 = at(&u2, s0 + r1.0 * (0.5 * dt), 0.5);
        let (h2, r2) = velocity(&st2, drift, noise, variant)?;
        let k2 = dexp_inv(&u2, &h2) * dt;

        let u3 = k2 * 0.5;
        let st3 = at(&u3, s0 + r2.0 * (0.5 * dt), 0.5);
        let (h3, r3) = velocity(&st3, drift, noise, variant)?;
        let k3 = dexp_inv(&u3, &h3) * dt;

        let u4 = k3;
        let st4 = at(&u4, s0 + r3.0 * dt, 1.0);
        let (h4, r4) = velocity(&st4, drift, noise, variant)?;
        let k4 = dexp_inv(&u4, &h4) * dt;

        let u = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (1.0 / 6.0);
        let cov = CovMatrix(s0 + (r1.0 + r2.0 * 2.0 + r3.0 * 2.0 + r4.0) * (dt / 6.0)).symmetrized();
        let t = opts.horizon * (k + 1) as f64 / opts.steps as f64;
        check_cov(&cov, t, max_trace)?;
        cur = PredictionState { mean: (cur.mean * group_exp(&u)).repaired(), cov, t };
        out.push(cur);
    }
    Ok(out)
}

pub const TRAJECTORY_CSV_HEADER: &str = "step,t,m00,m01,m02,m10,m11,m12,m20,m21,m22,s00,s01,s02,s11,s12,s22";

pub fn write_trajectory_csv<W: Write>(mut w: W, states: &[PredictionState]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    for (k, s) in states.iter().enumerate() {
        write!(w, "{k},{}", fmt_f64(s.t))?;
        for v in s.mean.to_row_major().into_iter().chain(s.cov.upper_triangle()) {
            write!(w, ",{}", fmt_f64(v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
