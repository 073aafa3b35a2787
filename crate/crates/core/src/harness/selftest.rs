//! Fast invariant suite behind the `selftest` subcommand.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;

use nalgebra::Matrix3;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::drift::{make_conjugation_drift, make_finite_difference_drift, ConstantDrift, DriftModel};
use crate::lie::{self, distance, group_exp, group_log, hat, vee, AlgebraVector, CovMatrix, GroupElement};
use crate::predictor::{h_connection_form, h_general, h_so3, integrate, PredictionState, VariantFlag};
use crate::sde::NoiseModel;

pub type BracketFn = fn(&AlgebraVector, &AlgebraVector) -> AlgebraVector;

const SEED: u64 = 0x5e1f_7e57;
const INSTANCES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub observed: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.observed <= self.tolerance
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed() { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {:<42} observed {:.3e}  tol {:.1e}", c.name, c.observed, c.tolerance)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

struct Sampler(ChaCha8Rng);

impl Sampler {
    fn new() -> Self {
        Self(ChaCha8Rng::seed_from_u64(SEED))
    }

    /// Uniform in [-1, 1).
    fn unit(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn vector(&mut self, scale: f64) -> AlgebraVector {
        AlgebraVector::new(self.unit() * scale, self.unit() * scale, self.unit() * scale)
    }

    fn rotation(&mut self) -> GroupElement {
        group_exp(&self.vector(2.0))
    }

    /// Random PSD matrix with the given trace.
    fn covariance(&mut self, trace: f64) -> CovMatrix {
        let m = Matrix3::from_fn(|_, _| self.unit());
        let s = m * m.transpose();
        CovMatrix(s * (trace / s.trace()))
    }
}

fn commutator(a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
    a * b - b * a
}

fn max_over(n: usize, mut f: impl FnMut() -> f64) -> f64 {
    (0..n).map(|_| f()).fold(0.0, f64::max)
}

/// Runs the suite with the library bracket.
pub fn run() -> SelftestReport {
    run_with(lie::bracket)
}

/// Runs the suite; the algebraic identity checks use `bracket`, so a broken
/// bracket can be injected to confirm the checks are sensitive.
pub fn run_with(bracket: BracketFn) -> SelftestReport {
    let mut rng = Sampler::new();
    let mut checks = Vec::new();
    let e = AlgebraVector::basis;

    let structure = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
        .iter()
        .map(|&(i, j, k)| (bracket(&e(i), &e(j)) - e(k) * FRAC_1_SQRT_2).norm())
        .fold(0.0, f64::max);
    checks.push(Check { name: "structure constants [G1,G2]=G3/sqrt2", observed: structure, tolerance: 1e-15 });

    let comm = max_over(INSTANCES, || {
        let (u, v) = (rng.vector(1.0), rng.vector(1.0));
        (hat(&bracket(&u, &v)) - commutator(&hat(&u), &hat(&v))).amax()
    });
    checks.push(Check { name: "bracket equals matrix commutator", observed: comm, tolerance: 1e-13 });

    let jacobi = max_over(INSTANCES, || {
        let (u, v, w) = (rng.vector(1.0), rng.vector(1.0), rng.vector(1.0));
        (bracket(&u, &bracket(&v, &w)) + bracket(&v, &bracket(&w, &u)) + bracket(&w, &bracket(&u, &v))).norm()
    });
    checks.push(Check { name: "Jacobi identity", observed: jacobi, tolerance: 1e-13 });

    let triple = max_over(INSTANCES, || {
        let nu = rng.vector(1.0);
        (0..3).fold(AlgebraVector::zero(), |acc, i| acc + bracket(&bracket(&bracket(&e(i), &nu), &nu), &e(i))).norm()
    });
    checks.push(Check { name: "sum_i [[[G_i,nu],nu],G_i] = 0", observed: triple, tolerance: 1e-12 });

    let spread = max_over(INSTANCES, || {
        let nu = rng.vector(1.0);
        let lhs = (0..3).fold(Matrix3::zeros(), |acc, i| {
            let w = bracket(&e(i), &nu);
            acc + w.outer(&w)
        });
        let n2 = nu.norm_squared();
        let rhs = (Matrix3::identity() - nu.outer(&nu) / n2) * (n2 / 2.0);
        (lhs - rhs).amax()
    });
    checks.push(Check { name: "sum_i [G_i,nu]^2 = |nu|^2/2 Id_perp", observed: spread, tolerance: 1e-12 });

    let roundtrip = max_over(INSTANCES, || {
        let mut c = rng.vector(4.0);
        let limit = SQRT_2 * (PI - 0.01);
        if c.norm() > limit {
            c = c * (limit / c.norm());
        }
        group_log(&group_exp(&c)).map(|back| (back - c).norm()).unwrap_or(f64::INFINITY)
    });
    checks.push(Check { name: "log(exp(c)) = c", observed: roundtrip, tolerance: 1e-10 });

    let invariance = max_over(INSTANCES, || {
        let (x, y, g) = (rng.rotation(), rng.rotation(), rng.rotation());
        let d = distance(&x, &y);
        (distance(&(g * x), &(g * y)) - d).abs().max((distance(&(x * g), &(y * g)) - d).abs())
    });
    checks.push(Check { name: "distance is bi-invariant", observed: invariance, tolerance: 1e-10 });

    let noise = NoiseModel::isotropic(0.1);
    let mut generic_gap = 0.0f64;
    let mut connection_gap = 0.0f64;
    for _ in 0..INSTANCES {
        let m = Matrix3::from_fn(|_, _| rng.unit());
        let offset = rng.vector(1.0);
        let drift = make_finite_difference_drift(move |g: &GroupElement| vee(&(m * g.matrix())) + offset, 1e-4)
            .expect("positive step");
        let st = PredictionState { mean: rng.rotation(), cov: rng.covariance(0.1), t: 0.0 };
        let so3 = h_so3(&st, &drift, &noise).expect("isotropic noise");
        generic_gap = generic_gap.max((h_general(&st, &drift, &noise) - so3).norm());
        connection_gap = connection_gap.max((h_connection_form(&st, &drift) - so3).norm());
    }
    checks.push(Check { name: "isotropic mean law equals generic law", observed: generic_gap, tolerance: 1e-14 });
    checks.push(Check { name: "connection form equals bracket form", observed: connection_gap, tolerance: 1e-12 });

    let sigma: f64 = 0.1;
    let t_end = 0.1;
    let zero = ConstantDrift(AlgebraVector::zero());
    let dirac = PredictionState::dirac(GroupElement::identity());
    let closed = |variant: VariantFlag, exact: f64| {
        integrate(&dirac, &zero, &noise, t_end, 100, variant)
            .map(|traj| {
                let got = traj.last().expect("terminal state").cov.0;
                (got - Matrix3::identity() * exact).norm() / (exact * 3f64.sqrt())
            })
            .unwrap_or(f64::INFINITY)
    };
    let s9 = 4.0 * sigma * sigma * ((t_end / 4.0).exp() - 1.0);
    let s7 = 12.0 * (1.0 - (-sigma * sigma * t_end / 12.0).exp());
    checks.push(Check {
        name: "closed form, isotropic curvature law",
        observed: closed(VariantFlag::PaperEq9, s9),
        tolerance: 1e-8,
    });
    checks.push(Check {
        name: "closed form, generic law",
        observed: closed(VariantFlag::GeneralEq7, s7),
        tolerance: 1e-8,
    });

    let conj = make_conjugation_drift(&super::default_generator()).expect("antisymmetric");
    let terminal =
        |variant| integrate(&dirac, &conj, &noise, t_end, 100, variant).map(|t| t.last().expect("terminal").cov);
    let gap = match (terminal(VariantFlag::GeneralEq7), terminal(VariantFlag::PaperEq9)) {
        (Ok(g), Ok(p)) => (g.0 - p.0).norm() / p.frobenius(),
        _ => f64::INFINITY,
    };
    checks.push(Check { name: "variant gap at T=0.1, sigma=0.1", observed: gap, tolerance: 2e-2 });

    let cancel = match integrate(&dirac, &conj, &noise, t_end, 100, VariantFlag::GeneralEq7) {
        Ok(traj) => traj
            .iter()
            .map(|s| {
                let trace = 0.1 * rng.unit().abs();
                let st = PredictionState { cov: rng.covariance(trace), ..*s };
                (h_general(&st, &conj, &noise) - conj.value(&st.mean)).norm()
            })
            .fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    };
    checks.push(Check { name: "conjugation drift: h = b(E)", observed: cancel, tolerance: 1e-13 });

    SelftestReport { checks }
}
