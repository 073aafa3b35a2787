//! Drift fields `b: SO(3) -> so(3)` together with their first and second
//! derivatives along left-translated directions.
//!
//! For a direction `u` in the algebra, the differential at `g` is
//! `d/dt b(g exp(t u))` at `t = 0` and the Hessian is the symmetric bilinear
//! form whose diagonal is `d²/dt² b(g exp(t u))`. Curves `t ↦ g exp(t u)` are
//! geodesics of the bi-invariant metric, so this is the Riemannian Hessian.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::lie::{ad, bracket, group_exp, vee, AlgebraOperator, AlgebraVector, GroupElement};

/// Step for first-order central differences.
pub const DEFAULT_DIFFERENTIAL_STEP: f64 = 1e-4;
/// Step for second-order central differences.
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// Vector-valued bilinear map on the algebra.
///
/// Component `k` of `L(u, v)` is `u^T M_k v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bilinear(pub [Matrix3<f64>; 3]);

impl Bilinear {
    pub fn zero() -> Self {
        Self([Matrix3::zeros(); 3])
    }

    /// Builds the map from its values on basis pairs `(e_a, e_b)`.
    pub fn from_basis_fn(mut f: impl FnMut(usize, usize) -> AlgebraVector) -> Self {
        let mut m = [Matrix3::zeros(); 3];
        for a in 0..3 {
            for b in 0..3 {
                let v = f(a, b);
                for (k, mk) in m.iter_mut().enumerate() {
                    mk[(a, b)] = v.0[k];
                }
            }
        }
        Self(m)
    }

    pub fn eval(&self, u: &AlgebraVector, v: &AlgebraVector) -> AlgebraVector {
        AlgebraVector::new(u.0.dot(&(self.0[0] * v.0)), u.0.dot(&(self.0[1] * v.0)), u.0.dot(&(self.0[2] * v.0)))
    }

    /// Largest `|L(e_a, e_b) - L(e_b, e_a)|` component.
    pub fn asymmetry(&self) -> f64 {
        self.0.iter().map(|m| (m - m.transpose()).amax()).fold(0.0, f64::max)
    }
}

/// A drift field with first and second derivatives.
pub trait DriftModel: Send + Sync {
    fn value(&self, g: &GroupElement) -> AlgebraVector;

    /// Matrix of `u ↦ T_g b(g u)`.
    fn differential(&self, g: &GroupElement) -> AlgebraOperator;

    /// `(u, v) ↦ Hess_g b(g u, g v)`.
    fn hessian(&self, g: &GroupElement) -> Bilinear;

    fn mode(&self) -> DerivativeMode {
        DerivativeMode::Analytic
    }
}

impl<D: DriftModel + ?Sized> DriftModel for &D {
    fn value(&self, g: &GroupElement) -> AlgebraVector {
        (**self).value(g)
    }
    fn differential(&self, g: &GroupElement) -> AlgebraOperator {
        (**self).differential(g)
    }
    fn hessian(&self, g: &GroupElement) -> Bilinear {
        (**self).hessian(g)
    }
    fn mode(&self) -> DerivativeMode {
        (**self).mode()
    }
}

/// Left-invariant drift `b(X) = b0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantDrift(pub AlgebraVector);

impl DriftModel for ConstantDrift {
    fn value(&self, _: &GroupElement) -> AlgebraVector {
        self.0
    }
    fn differential(&self, _: &GroupElement) -> AlgebraOperator {
        AlgebraOperator::zero()
    }
    fn hessian(&self, _: &GroupElement) -> Bilinear {
        Bilinear::zero()
    }
}

/// `b(X) = X^{-1} A X` for a fixed antisymmetric `A`.
///
/// The right-trivialised flow it generates is `dX/dt = A X`, so the
/// deterministic solution from `X0` is `exp(tA) X0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugationDrift {
    a: Matrix3<f64>,
}

impl ConjugationDrift {
    pub fn generator(&self) -> &Matrix3<f64> {
        &self.a
    }
}

/// Builds the conjugation drift after checking `A^T = -A` within 1e-12.
pub fn make_conjugation_drift(a: &Matrix3<f64>) -> Result<ConjugationDrift> {
    let defect = (a + a.transpose()).amax();
    if defect.is_nan() || defect > 1e-12 {
        return Err(Error::NotAntisymmetric { defect });
    }
    Ok(ConjugationDrift { a: *a })
}

impl DriftModel for ConjugationDrift {
    fn value(&self, g: &GroupElement) -> AlgebraVector {
        let x = g.matrix();
        vee(&(x.transpose() * self.a * x))
    }

    fn differential(&self, g: &GroupElement) -> AlgebraOperator {
        ad(&self.value(g))
    }

    fn hessian(&self, g: &GroupElement) -> Bilinear {
        let b = self.value(g);
        Bilinear::from_basis_fn(|i, j| {
            let (u, v) = (AlgebraVector::basis(i), AlgebraVector::basis(j));
            (bracket(&bracket(&b, &u), &v) + bracket(&bracket(&b, &v), &u)) * 0.5
        })
    }
}

/// Derivatives of an arbitrary drift by central differences along `g exp(t e_a)`.
pub struct FiniteDifferenceDrift<F> {
    f: F,
    step: f64,
    hessian_step: f64,
}

/// Wraps a value-only drift; `delta` is the first-order step.
pub fn make_finite_difference_drift<F>(f: F, delta: f64) -> Result<FiniteDifferenceDrift<F>>
where
    F: Fn(&GroupElement) -> AlgebraVector + Send + Sync,
{
    FiniteDifferenceDrift::with_steps(f, delta, DEFAULT_HESSIAN_STEP)
}

impl<F> FiniteDifferenceDrift<F>
where
    F: Fn(&GroupElement) -> AlgebraVector + Send + Sync,
{
    pub fn with_steps(f: F, step: f64, hessian_step: f64) -> Result<Self> {
        if !(step > 0.0 && hessian_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "finite-difference steps must be positive (got {step}, {hessian_step})"
            )));
        }
        Ok(Self { f, step, hessian_step })
    }

    fn along(&self, g: &GroupElement, dir: &AlgebraVector, t: f64) -> AlgebraVector {
        (self.f)(&(g * &group_exp(&(*dir * t))))
    }

    /// `d²/dt² b(g exp(t w))` at 0.
    fn second_derivative(&self, g: &GroupElement, w: &AlgebraVector, center: &AlgebraVector) -> AlgebraVector {
        let h = self.hessian_step;
        (self.along(g, w, h) - *center * 2.0 + self.along(g, w, -h)) * (1.0 / (h * h))
    }
}

impl<F> DriftModel for FiniteDifferenceDrift<F>
where
    F: Fn(&GroupElement) -> AlgebraVector + Send + Sync,
{
    fn value(&self, g: &GroupElement) -> AlgebraVector {
        (self.f)(g)
    }

    fn differential(&self, g: &GroupElement) -> AlgebraOperator {
        let h = self.step;
        AlgebraOperator::from_columns_fn(|a| {
            let e = AlgebraVector::basis(a);
            (self.along(g, &e, h) - self.along(g, &e, -h)) * (0.5 / h)
        })
    }

    #[allow(clippy::needless_range_loop)]
    fn hessian(&self, g: &GroupElement) -> Bilinear {
        let center = (self.f)(g);
        let mut entries = [[AlgebraVector::zero(); 3]; 3];
        for a in 0..3 {
            let ea = AlgebraVector::basis(a);
            entries[a][a] = self.second_derivative(g, &ea, &center);
            for b in 0..a {
                let eb = AlgebraVector::basis(b);
                // polarization: H(a, b) = (Q(a + b) - Q(a - b)) / 4
                let plus = self.second_derivative(g, &(ea + eb), &center);
                let minus = self.second_derivative(g, &(ea - eb), &center);
                let mixed = (plus - minus) * 0.25;
                entries[a][b] = mixed;
                entries[b][a] = mixed;
            }
        }
        Bilinear::from_basis_fn(|a, b| entries[a][b])
    }

    fn mode(&self) -> DerivativeMode {
        DerivativeMode::FiniteDifference
    }
}
