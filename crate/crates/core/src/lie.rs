//! SO(3) with the bi-invariant Frobenius metric `<A, B> = tr(A^T B)`.
//!
//! Algebra coordinates are taken in the orthonormal basis `G_i = E_i / sqrt(2)`,
//! where `E_i` are the standard generators (`[E_1, E_2] = E_3`). Under this
//! convention a rotation by `theta` about the unit axis `n` has coordinates
//! `sqrt(2) * theta * n`, and the Riemannian distance is `sqrt(2)` times the
//! rotation angle.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for the `m^T m = I` and `det m = 1` checks.
pub const ROTATION_TOL: f64 = 1e-9;

/// Largest rotation angle accepted by [`group_log`].
pub const MAX_LOG_ANGLE: f64 = PI - 1e-6;

const SMALL_ANGLE: f64 = 1e-4;

/// Element of so(3) in `G`-basis coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct AlgebraVector(pub Vector3<f64>);

impl AlgebraVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    /// `i`-th basis vector `e_i` (coordinates of `G_i`).
    pub fn basis(i: usize) -> Self {
        let mut v = Vector3::zeros();
        v[i] = 1.0;
        Self(v)
    }

    pub fn coords(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.dot(&other.0)
    }

    /// Coordinates of the same element in the standard generators `E_i`
    /// (i.e. the usual axis-angle vector).
    pub fn to_axis_angle(&self) -> Vector3<f64> {
        self.0 * FRAC_1_SQRT_2
    }

    pub fn from_axis_angle(w: &Vector3<f64>) -> Self {
        Self(w * SQRT_2)
    }

    /// Outer product `self ⊗ other` as a 3×3 matrix.
    pub fn outer(&self, other: &Self) -> Matrix3<f64> {
        self.0 * other.0.transpose()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }
}

impl From<[f64; 3]> for AlgebraVector {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<AlgebraVector> for [f64; 3] {
    fn from(v: AlgebraVector) -> Self {
        v.to_array()
    }
}

impl Add for AlgebraVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl AddAssign for AlgebraVector {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for AlgebraVector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Neg for AlgebraVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Mul<f64> for AlgebraVector {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self(self.0 * s)
    }
}

impl Mul<AlgebraVector> for f64 {
    type Output = AlgebraVector;
    fn mul(self, v: AlgebraVector) -> AlgebraVector {
        AlgebraVector(v.0 * self)
    }
}

/// Rotation matrix in SO(3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct GroupElement(Matrix3<f64>);

impl GroupElement {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps `m` after checking orthogonality and orientation at [`ROTATION_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let orthogonality = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if orthogonality > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotARotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    /// Wraps `m` without validation. The caller guarantees `m` is a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Closest rotation to an arbitrary 3×3 matrix (polar factor, det forced to +1).
    pub fn project(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u_fix = u;
            u_fix.column_mut(2).neg_mut();
            r = u_fix * v_t;
        }
        Self(r)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn act(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.0 * p
    }

    /// Frobenius norm of `m^T m - I`.
    pub fn orthogonality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    pub fn is_valid(&self) -> bool {
        self.orthogonality_defect() <= ROTATION_TOL && (self.0.determinant() - 1.0).abs() <= ROTATION_TOL
    }

    /// Re-projects onto SO(3), but only if the invariants are violated.
    pub fn repaired(self) -> Self {
        if self.is_valid() {
            self
        } else {
            Self::project(&self.0)
        }
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let skew = vee_std(&((self.0 - self.0.transpose()) * 0.5));
        let cos = ((self.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        skew.norm().atan2(cos)
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
    }

    pub fn from_row_major(a: &[f64; 9]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_row_slice(a))
    }
}

impl Mul for GroupElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a GroupElement> for &'a GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        GroupElement(self.0 * rhs.0)
    }
}

impl TryFrom<[f64; 9]> for GroupElement {
    type Error = Error;
    fn try_from(a: [f64; 9]) -> Result<Self> {
        Self::from_row_major(&a)
    }
}

impl From<GroupElement> for [f64; 9] {
    fn from(g: GroupElement) -> Self {
        g.to_row_major()
    }
}

/// Linear map on algebra coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraOperator(pub Matrix3<f64>);

impl AlgebraOperator {
    pub fn zero() -> Self {
        Self(Matrix3::zeros())
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn apply(&self, v: &AlgebraVector) -> AlgebraVector {
        AlgebraVector(self.0 * v.0)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Builds the operator whose `a`-th column is `f(e_a)`.
    pub fn from_columns_fn(mut f: impl FnMut(usize) -> AlgebraVector) -> Self {
        let mut m = Matrix3::zeros();
        for a in 0..3 {
            m.set_column(a, &f(a).0);
        }
        Self(m)
    }

    /// Orthogonal projector onto the complement of `v` (`Id_{v⊥}`); identity when `v = 0`.
    pub fn perp_projector(v: &AlgebraVector) -> Self {
        let n2 = v.norm_squared();
        if n2 == 0.0 {
            return Self::identity();
        }
        Self(Matrix3::identity() - v.outer(v) / n2)
    }
}

impl Add for AlgebraOperator {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for AlgebraOperator {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul for AlgebraOperator {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl Mul<f64> for AlgebraOperator {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self(self.0 * s)
    }
}

/// Symmetric second moment `E[nu ⊗ nu]` in `G`-basis coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 9]", into = "[f64; 9]")]
pub struct CovMatrix(pub Matrix3<f64>);

impl CovMatrix {
    pub fn zero() -> Self {
        Self(Matrix3::zeros())
    }

    pub fn scaled_identity(s: f64) -> Self {
        Self(Matrix3::identity() * s)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn symmetrized(&self) -> Self {
        Self((self.0 + self.0.transpose()) * 0.5)
    }

    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.symmetrized().0.symmetric_eigen().eigenvalues.min()
    }

    /// `(s00, s01, s02, s11, s12, s22)`.
    pub fn upper_triangle(&self) -> [f64; 6] {
        let m = &self.0;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] = self.0[(r, c)];
            }
        }
        out
    }
}

impl From<[f64; 9]> for CovMatrix {
    fn from(a: [f64; 9]) -> Self {
        Self(Matrix3::from_row_slice(&a))
    }
}

impl From<CovMatrix> for [f64; 9] {
    fn from(c: CovMatrix) -> Self {
        c.to_row_major()
    }
}

/// Open geodesic ball `B(center, radius)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallSpec {
    pub center: GroupElement,
    pub radius: f64,
}

impl BallSpec {
    /// Rejects radii that do not give a regular geodesic ball.
    pub fn new(center: GroupElement, radius: f64) -> Result<Self> {
        let max = ball_constants().max_radius;
        if !(radius > 0.0 && radius < max) {
            return Err(Error::InvalidConfig(format!("ball radius {radius} must lie in (0, {max})")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        distance(&self.center, g) < self.radius
    }
}

/// Curvature bound and maximal regular-ball radius for SO(3) under this metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallConstants {
    /// Sectional curvature (constant on SO(3)).
    pub curvature: f64,
    pub max_radius: f64,
}

/// Standard skew matrix: `hat_std(w) p = w × p`.
pub fn hat_std(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat_std`] on the antisymmetric part of `m`.
pub fn vee_std(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(0.5 * (m[(2, 1)] - m[(1, 2)]), 0.5 * (m[(0, 2)] - m[(2, 0)]), 0.5 * (m[(1, 0)] - m[(0, 1)]))
}

/// `sum_i c_i G_i` as a 3×3 antisymmetric matrix.
pub fn hat(c: &AlgebraVector) -> Matrix3<f64> {
    hat_std(&c.to_axis_angle())
}

/// `G`-basis coordinates of the antisymmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> AlgebraVector {
    AlgebraVector::from_axis_angle(&vee_std(m))
}

/// Lie bracket in coordinates: `(u × v) / sqrt(2)`.
pub fn bracket(u: &AlgebraVector, v: &AlgebraVector) -> AlgebraVector {
    AlgebraVector(u.0.cross(&v.0) * FRAC_1_SQRT_2)
}

/// Matrix of `v ↦ [u, v]`.
pub fn ad(u: &AlgebraVector) -> AlgebraOperator {
    AlgebraOperator(hat_std(&u.0) * FRAC_1_SQRT_2)
}

/// Rodrigues exponential.
pub fn group_exp(c: &AlgebraVector) -> GroupElement {
    let w = c.to_axis_angle();
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat_std(&w);
    GroupElement(Matrix3::identity() + k * a + k * k * b)
}

/// Principal logarithm at the identity.
pub fn group_log(g: &GroupElement) -> Result<AlgebraVector> {
    let m = g.matrix();
    let s = vee_std(&((m - m.transpose()) * 0.5));
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin = s.norm();
    let theta = sin.atan2(cos);
    if theta >= MAX_LOG_ANGLE {
        return Err(Error::AngleNearPi { angle: theta });
    }
    // w = theta / sin(theta) * s
    let scale = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    } else {
        theta / sin
    };
    Ok(AlgebraVector::from_axis_angle(&(s * scale)))
}

/// `log(y, x) = y^{-1} log_y(x) = log(y^{-1} x)`.
pub fn relative_log(y: &GroupElement, x: &GroupElement) -> Result<AlgebraVector> {
    group_log(&(&y.inverse() * x))
}

/// Riemannian distance, `sqrt(2)` times the angle of `y^{-1} x`.
pub fn distance(y: &GroupElement, x: &GroupElement) -> f64 {
    SQRT_2 * (&y.inverse() * x).angle()
}

/// `Ad_g u` in coordinates (`g hat(u) g^T`).
pub fn adjoint(g: &GroupElement, u: &AlgebraVector) -> AlgebraVector {
    AlgebraVector(g.matrix() * u.0)
}

pub fn ball_constants() -> BallConstants {
    // K(X, Y) = 1/4 |[X, Y]|^2 on an orthonormal pair.
    let curvature = 0.25 * bracket(&AlgebraVector::basis(0), &AlgebraVector::basis(1)).norm_squared();
    let curvature_bound = PI / (2.0 * curvature.sqrt());
    // cut locus of x is at distance sqrt(2) * pi; the ball must stay within half of it.
    let injectivity = SQRT_2 * PI;
    BallConstants { curvature, max_radius: curvature_bound.min(injectivity / 2.0) }
}
