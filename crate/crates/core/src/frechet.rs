//! Empirical exponential barycenter (Fréchet mean) of an ensemble.
//!
//! Under the bi-invariant metric the Gauss-Newton step for
//! `g ↦ (1/N) Σ ρ²(g, X_j)` is the Karcher fixed-point update
//! `E ← E · exp((1/N) Σ log(E, X_j))`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{distance, group_exp, relative_log, AlgebraVector, CovMatrix, GroupElement};
use crate::sde::Ensemble;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct FrechetResult {
    pub mean: GroupElement,
    /// `ν_j = log(mean, X_j)`, in member order.
    pub residuals: Vec<AlgebraVector>,
    pub iterations: usize,
    pub final_step_norm: f64,
    /// Objective `(1/N) Σ |ν|²` after each residual evaluation.
    pub objective_history: Vec<f64>,
}

impl FrechetResult {
    pub fn residual_mean(&self) -> AlgebraVector {
        mean_vector(&self.residuals)
    }

    pub fn covariance(&self) -> CovMatrix {
        empirical_covariance(&self.residuals)
    }

    pub fn dump(&self) -> FrechetDump {
        FrechetDump {
            mean: self.mean.to_row_major(),
            residual_norm_mean: self.residual_mean().norm(),
            iterations: self.iterations,
            covariance: self.covariance().to_row_major(),
        }
    }
}

/// JSON form of a [`FrechetResult`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrechetDump {
    pub mean: [f64; 9],
    /// Norm of the mean residual (centering defect).
    pub residual_norm_mean: f64,
    pub iterations: usize,
    pub covariance: [f64; 9],
}

fn mean_vector(vs: &[AlgebraVector]) -> AlgebraVector {
    // sequential in member order so the result does not depend on scheduling
    let sum = vs.iter().fold(AlgebraVector::zero(), |acc, v| acc + *v);
    sum * (1.0 / vs.len() as f64)
}

fn residuals_at(members: &[GroupElement], g: &GroupElement) -> Result<Vec<AlgebraVector>> {
    members.par_iter().map(|x| relative_log(g, x)).collect()
}

/// Polar projection of the arithmetic mean of the member matrices.
pub fn initial_guess(members: &[GroupElement]) -> GroupElement {
    let sum = members.iter().fold(nalgebra::Matrix3::zeros(), |acc, g| acc + g.matrix());
    GroupElement::project(&(sum / members.len() as f64))
}

pub fn frechet_mean(ensemble: &Ensemble, tol: f64, max_iter: usize) -> Result<FrechetResult> {
    frechet_mean_of(&ensemble.members, tol, max_iter)
}

pub fn frechet_mean_of(members: &[GroupElement], tol: f64, max_iter: usize) -> Result<FrechetResult> {
    if members.is_empty() {
        return Err(Error::Empty("ensemble has no members"));
    }
    let mut mean = initial_guess(members);
    let mut history = Vec::new();
    let mut step_norm = f64::INFINITY;
    for iteration in 1..=max_iter {
        let residuals = residuals_at(members, &mean)?;
        history.push(residuals.iter().map(|v| v.norm_squared()).sum::<f64>() / residuals.len() as f64);
        let step = mean_vector(&residuals);
        step_norm = step.norm();
        if step_norm <= tol {
            return Ok(FrechetResult {
                mean,
                residuals,
                iterations: iteration,
                final_step_norm: step_norm,
                objective_history: history,
            });
        }
        mean = (mean * group_exp(&step)).repaired();
    }
    Err(Error::NoConvergence { iterations: max_iter, step_norm })
}

/// `(1/N) Σ ρ²(g, X_j)`.
pub fn variance_at(ensemble: &Ensemble, g: &GroupElement) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::Empty("ensemble has no members"));
    }
    let mut total = 0.0;
    for x in &ensemble.members {
        // same cut-locus guard as the log map
        relative_log(g, x)?;
        total += distance(g, x).powi(2);
    }
    Ok(total / ensemble.len() as f64)
}

/// `(1/N) Σ ν_j ν_j^T`.
pub fn empirical_covariance(residuals: &[AlgebraVector]) -> CovMatrix {
    if residuals.is_empty() {
        return CovMatrix::zero();
    }
    let sum = residuals.iter().fold(nalgebra::Matrix3::zeros(), |acc, v| acc + v.outer(v));
    CovMatrix(sum / residuals.len() as f64)
}
