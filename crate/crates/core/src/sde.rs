//! Ensembles of the Stratonovich SDE `∘dX = X (b(X) dt + ∘dW)` on SO(3),
//! stopped at the exit of a geodesic ball around the identity.
//!
//! Each step applies `x ← x · exp(b(x) dt + Σ σ_i ΔW_i)`. Brownian increments
//! come from a counter-based stream: the standard normal for
//! `(seed, path, step, component)` is computed from a fixed ChaCha8 word
//! position, so results do not depend on how paths are scheduled.

use std::io::{BufRead, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::lie::{ball_constants, distance, group_exp, AlgebraVector, GroupElement};

/// Default exit radius, below the regular-ball bound `pi * sqrt(2) / 2`.
pub const DEFAULT_BALL_RADIUS: f64 = 2.0;

/// Diffusion directions `σ_1, …, σ_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub sigmas: Vec<AlgebraVector>,
}

impl NoiseModel {
    pub fn new(sigmas: Vec<AlgebraVector>) -> Self {
        Self { sigmas }
    }

    pub fn none() -> Self {
        Self { sigmas: Vec::new() }
    }

    /// `(σ G_1, σ G_2, σ G_3)`.
    pub fn isotropic(sigma: f64) -> Self {
        Self { sigmas: (0..3).map(|i| AlgebraVector::basis(i) * sigma).collect() }
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    /// `Σ_i σ_i σ_i^T`.
    pub fn diffusion(&self) -> nalgebra::Matrix3<f64> {
        self.sigmas.iter().fold(nalgebra::Matrix3::zeros(), |acc, s| acc + s.outer(s))
    }

    /// Returns `σ` if the directions are `σ` times an orthonormal basis.
    /// An empty model counts as isotropic with `σ = 0`.
    pub fn isotropic_scale(&self) -> Option<f64> {
        if self.sigmas.is_empty() {
            return Some(0.0);
        }
        if self.sigmas.len() != 3 {
            return None;
        }
        let d = self.diffusion();
        let s2 = d.trace() / 3.0;
        if s2.is_nan() || s2 <= 0.0 {
            return None;
        }
        let defect = (d - nalgebra::Matrix3::identity() * s2).amax();
        (defect <= 1e-12 * s2).then(|| s2.sqrt())
    }

    /// `Σ_i σ_i ΔW_i`.
    pub fn combine(&self, dw: &[f64]) -> AlgebraVector {
        self.sigmas.iter().zip(dw).fold(AlgebraVector::zero(), |acc, (s, w)| acc + *s * *w)
    }
}

/// Time grid, seed and stopping radius of a simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathConfig {
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
    pub ball_radius: f64,
}

impl PathConfig {
    pub fn new(horizon: f64, steps: usize, seed: u64, ball_radius: f64) -> Result<Self> {
        let cfg = Self { horizon, steps, seed, ball_radius };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let r_max = ball_constants().max_radius;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if !(self.ball_radius > 0.0 && self.ball_radius <= r_max) {
            return Err(Error::InvalidConfig(format!("ball radius {} must lie in (0, {r_max}]", self.ball_radius)));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        self.horizon * step as f64 / self.steps as f64
    }
}

/// One path on the grid `k T / N`, frozen after its first exit.
#[derive(Clone, Debug, PartialEq)]
pub struct StoppedPath {
    pub states: Vec<GroupElement>,
    pub tau_step: Option<usize>,
}

impl StoppedPath {
    pub fn is_stopped_at(&self, step: usize) -> bool {
        self.tau_step.is_some_and(|tau| step >= tau)
    }
}

/// All paths at one grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub step: usize,
    pub t: f64,
    pub members: Vec<GroupElement>,
    /// `stopped[j]` is set when path `j` has already left the ball.
    pub stopped: Vec<bool>,
}

impl Ensemble {
    /// Ensemble without stopping metadata (all members live).
    pub fn from_members(members: Vec<GroupElement>) -> Self {
        let n = members.len();
        Self { step: 0, t: 0.0, members, stopped: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn stopped_count(&self) -> usize {
        self.stopped.iter().filter(|s| **s).count()
    }

    /// Left-translates every member by `g`.
    pub fn left_translated(&self, g: &GroupElement) -> Self {
        Self { members: self.members.iter().map(|x| g * x).collect(), ..self.clone() }
    }
}

/// Counter-based standard-normal stream.
#[derive(Clone, Copy, Debug)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Uniform in the open interval (0, 1) for the given key.
    pub fn uniform(&self, path: u64, index: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        rng.set_word_pos(2 * index as u128);
        let bits = rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normals for `(path, step, 0..m)` via the inverse CDF.
    pub fn normals(&self, path: u64, step: usize, m: usize) -> Vec<f64> {
        if m == 0 {
            return Vec::new();
        }
        let normal = Normal::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        rng.set_word_pos(2 * (step as u128) * (m as u128));
        (0..m)
            .map(|_| {
                let bits = rng.next_u64() >> 11;
                let u = (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
                normal.inverse_cdf(u)
            })
            .collect()
    }
}

/// Exponential Euler–Maruyama step `x · exp(b(x) dt + Σ σ_i dW_i)`.
pub fn step<D: DriftModel + ?Sized>(
    x: &GroupElement,
    drift: &D,
    noise: &NoiseModel,
    dt: f64,
    dw: &[f64],
) -> GroupElement {
    let increment = drift.value(x) * dt + noise.combine(dw);
    (x * &group_exp(&increment)).repaired()
}

pub fn simulate_path<D: DriftModel + ?Sized>(
    config: &PathConfig,
    drift: &D,
    noise: &NoiseModel,
    x0: &GroupElement,
) -> StoppedPath {
    simulate_path_with_id(config, drift, noise, x0, 0)
}

/// Simulates path number `path_id` of the stream keyed by `config.seed`.
pub fn simulate_path_with_id<D: DriftModel + ?Sized>(
    config: &PathConfig,
    drift: &D,
    noise: &NoiseModel,
    x0: &GroupElement,
    path_id: u64,
) -> StoppedPath {
    let stream = NoiseStream::new(config.seed);
    let dt = config.dt();
    let sqrt_dt = dt.sqrt();
    let identity = GroupElement::identity();
    let mut states = Vec::with_capacity(config.steps + 1);
    states.push(*x0);
    let mut tau_step = None;
    let mut x = *x0;
    for k in 0..config.steps {
        if tau_step.is_none() {
            let dw: Vec<f64> = stream.normals(path_id, k, noise.dim()).into_iter().map(|z| z * sqrt_dt).collect();
            x = step(&x, drift, noise, dt, &dw);
            if distance(&identity, &x) >= config.ball_radius {
                tau_step = Some(k + 1);
            }
        }
        states.push(x);
    }
    StoppedPath { states, tau_step }
}

/// Simulates `n_paths` paths in parallel; path `j` uses stream id `j`.
pub fn simulate_paths<D: DriftModel + ?Sized>(
    config: &PathConfig,
    drift: &D,
    noise: &NoiseModel,
    x0: &GroupElement,
    n_paths: usize,
) -> Result<Vec<StoppedPath>> {
    config.validate()?;
    if n_paths == 0 {
        return Err(Error::Empty("n_paths must be at least 1"));
    }
    Ok((0..n_paths as u64).into_par_iter().map(|id| simulate_path_with_id(config, drift, noise, x0, id)).collect())
}

/// Transposes paths into one [`Ensemble`] per grid time.
pub fn slice_paths(config: &PathConfig, paths: &[StoppedPath]) -> Vec<Ensemble> {
    (0..=config.steps)
        .map(|k| Ensemble {
            step: k,
            t: config.time(k),
            members: paths.iter().map(|p| p.states[k]).collect(),
            stopped: paths.iter().map(|p| p.is_stopped_at(k)).collect(),
        })
        .collect()
}

pub fn simulate_ensemble<D: DriftModel + ?Sized>(
    config: &PathConfig,
    drift: &D,
    noise: &NoiseModel,
    x0: &GroupElement,
    n_paths: usize,
) -> Result<Vec<Ensemble>> {
    let paths = simulate_paths(config, drift, noise, x0, n_paths)?;
    Ok(slice_paths(config, &paths))
}

pub const ENSEMBLE_CSV_HEADER: &str = "path_id,step,t,m00,m01,m02,m10,m11,m12,m20,m21,m22,stopped";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_ensemble_csv<W: Write>(mut w: W, ensemble: &Ensemble) -> Result<()> {
    writeln!(w, "{ENSEMBLE_CSV_HEADER}")?;
    for (j, (g, stopped)) in ensemble.members.iter().zip(&ensemble.stopped).enumerate() {
        write!(w, "{j},{},{}", ensemble.step, fmt_f64(ensemble.t))?;
        for v in g.to_row_major() {
            write!(w, ",{}", fmt_f64(v))?;
        }
        writeln!(w, ",{}", u8::from(*stopped))?;
    }
    Ok(())
}

pub fn read_ensemble_csv<R: BufRead>(r: R) -> Result<Ensemble> {
    let bad = |line: usize, what: &str| Error::InvalidConfig(format!("ensemble csv line {line}: {what}"));
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != ENSEMBLE_CSV_HEADER {
        return Err(bad(1, "missing or unexpected header"));
    }
    let mut ensemble = Ensemble { step: 0, t: 0.0, members: Vec::new(), stopped: Vec::new() };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(bad(i + 2, "expected 13 fields"));
        }
        ensemble.step = fields[1].parse().map_err(|_| bad(i + 2, "step"))?;
        ensemble.t = fields[2].parse().map_err(|_| bad(i + 2, "t"))?;
        let mut m = [0.0; 9];
        for (slot, f) in m.iter_mut().zip(&fields[3..12]) {
            *slot = f.parse().map_err(|_| bad(i + 2, "matrix entry"))?;
        }
        ensemble.members.push(GroupElement::from_row_major(&m)?);
        ensemble.stopped.push(fields[12] == "1");
    }
    if ensemble.members.is_empty() {
        return Err(Error::Empty("ensemble csv has no rows"));
    }
    Ok(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{make_conjugation_drift, ConstantDrift};
    use crate::lie::{hat_std, relative_log};
    use nalgebra::{Matrix3, Vector3};

    fn zero_drift() -> ConstantDrift {
        ConstantDrift(AlgebraVector::zero())
    }

    #[test]
    fn step_without_motion_is_identity_map() {
        let x = group_exp(&AlgebraVector::new(0.3, 0.1, -0.2));
        let y = step(&x, &zero_drift(), &NoiseModel::none(), 0.01, &[]);
        assert_eq!(x, y);
    }

    #[test]
    fn step_with_constant_drift_is_exponential_flow() {
        let b0 = AlgebraVector::new(0.5, -1.0, 0.25);
        let y = step(&GroupElement::identity(), &ConstantDrift(b0), &NoiseModel::none(), 0.01, &[]);
        assert!(distance(&y, &group_exp(&(b0 * 0.01))) < 1e-15);
    }

    #[test]
    fn single_step_variance_matches_diffusion_rate() {
        let noise = NoiseModel::isotropic(0.1);
        let stream = NoiseStream::new(7);
        let dt: f64 = 1e-3;
        let n = 10_000;
        let mean_sq: f64 = (0..n)
            .map(|k| {
                let dw: Vec<f64> = stream.normals(0, k, 3).iter().map(|z| z * dt.sqrt()).collect();
                let x1 = step(&GroupElement::identity(), &zero_drift(), &noise, dt, &dw);
                distance(&GroupElement::identity(), &x1).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let expected = 3.0 * 0.01 * dt;
        assert!((mean_sq / expected - 1.0).abs() < 0.05, "{mean_sq} vs {expected}");
    }

    #[test]
    fn noise_stream_is_keyed() {
        let s = NoiseStream::new(42);
        let a = s.normals(3, 17, 3);
        let b = s.normals(3, 17, 3);
        assert_eq!(a, b);
        assert_ne!(a, s.normals(4, 17, 3));
        assert_ne!(a, s.normals(3, 18, 3));
        // a single component can be recovered from its own key
        let u = s.uniform(3, 17 * 3 + 1);
        assert_eq!(Normal::standard().inverse_cdf(u), a[1]);
    }

    #[test]
    fn trivial_path() {
        let cfg = PathConfig::new(1.0, 1, 0, DEFAULT_BALL_RADIUS).unwrap();
        let x0 = group_exp(&AlgebraVector::new(0.1, 0.0, 0.0));
        let p = simulate_path(&cfg, &zero_drift(), &NoiseModel::none(), &x0);
        assert_eq!(p.states, vec![x0, x0]);
        assert_eq!(p.tau_step, None);
    }

    #[test]
    fn paths_are_reproducible() {
        let cfg = PathConfig::new(0.1, 100, 99, DEFAULT_BALL_RADIUS).unwrap();
        let noise = NoiseModel::isotropic(0.1);
        let a = simulate_path(&cfg, &zero_drift(), &noise, &GroupElement::identity());
        let b = simulate_path(&cfg, &zero_drift(), &noise, &GroupElement::identity());
        assert_eq!(a, b);
    }

    #[test]
    fn path_freezes_after_exit() {
        let cfg = PathConfig::new(1.0, 50, 1, 0.5).unwrap();
        let drift = ConstantDrift(AlgebraVector::new(2.0, 0.0, 0.0));
        let p = simulate_path(&cfg, &drift, &NoiseModel::none(), &GroupElement::identity());
        let tau = p.tau_step.expect("path must leave the small ball");
        assert!(distance(&GroupElement::identity(), &p.states[tau]) >= 0.5);
        assert!(distance(&GroupElement::identity(), &p.states[tau - 1]) < 0.5);
        assert!(p.states[tau..].iter().all(|s| *s == p.states[tau]));
    }

    #[test]
    fn config_validation() {
        assert!(PathConfig::new(0.0, 10, 0, 1.0).is_err());
        assert!(PathConfig::new(1.0, 0, 0, 1.0).is_err());
        assert!(PathConfig::new(1.0, 10, 0, 2.3).is_err());
        assert!(PathConfig::new(1.0, 10, 0, ball_constants().max_radius).is_ok());
    }

    #[test]
    fn ensemble_of_one_is_the_path() {
        let cfg = PathConfig::new(0.1, 20, 5, DEFAULT_BALL_RADIUS).unwrap();
        let noise = NoiseModel::isotropic(0.1);
        let p = simulate_path(&cfg, &zero_drift(), &noise, &GroupElement::identity());
        let ens = simulate_ensemble(&cfg, &zero_drift(), &noise, &GroupElement::identity(), 1).unwrap();
        assert_eq!(ens.len(), 21);
        for (k, e) in ens.iter().enumerate() {
            assert_eq!(e.members, vec![p.states[k]]);
        }
        assert!(simulate_ensemble(&cfg, &zero_drift(), &noise, &GroupElement::identity(), 0).is_err());
    }

    #[test]
    fn zero_noise_ensemble_is_deterministic_flow() {
        let a = hat_std(&Vector3::new(0.8, -0.4, 0.5));
        let drift = make_conjugation_drift(&a).unwrap();
        let cfg = PathConfig::new(0.1, 100, 5, DEFAULT_BALL_RADIUS).unwrap();
        let ens = simulate_ensemble(&cfg, &drift, &NoiseModel::none(), &GroupElement::identity(), 8).unwrap();
        let last = ens.last().unwrap();
        let exact = GroupElement::from_matrix_unchecked((a * 0.1).exp());
        for m in &last.members {
            assert_eq!(*m, last.members[0]);
            assert!(distance(m, &exact) < 1e-6);
        }
    }

    #[test]
    fn zero_noise_matches_finer_reference() {
        let a = hat_std(&Vector3::new(0.8, -0.4, 0.5));
        let drift = make_conjugation_drift(&a).unwrap();
        let x0 = group_exp(&AlgebraVector::new(0.2, 0.4, -0.1));
        let coarse = PathConfig::new(0.1, 100, 0, DEFAULT_BALL_RADIUS).unwrap();
        let fine = PathConfig::new(0.1, 1000, 0, DEFAULT_BALL_RADIUS).unwrap();
        let pc = simulate_path(&coarse, &drift, &NoiseModel::none(), &x0);
        let pf = simulate_path(&fine, &drift, &NoiseModel::none(), &x0);
        assert!(distance(pc.states.last().unwrap(), pf.states.last().unwrap()) < 1e-6);
    }

    #[test]
    fn desk_scale_paths_never_stop_and_stay_orthogonal() {
        let cfg = PathConfig::new(0.1, 100, 42, DEFAULT_BALL_RADIUS).unwrap();
        let a = hat_std(&Vector3::new(0.8, -0.4, 0.5));
        let drift = make_conjugation_drift(&a).unwrap();
        let ens = simulate_ensemble(&cfg, &drift, &NoiseModel::isotropic(0.1), &GroupElement::identity(), 500).unwrap();
        assert_eq!(ens.last().unwrap().stopped_count(), 0);
        for e in &ens {
            assert!(e.members.iter().all(|g| g.orthogonality_defect() <= 1e-9));
        }
    }

    #[test]
    fn weak_consistency_constant_drift() {
        let b0 = AlgebraVector::new(0.6, -0.3, 0.9);
        let cfg = PathConfig::new(0.1, 50, 3, DEFAULT_BALL_RADIUS).unwrap();
        let sigma = 0.1;
        let n = 2000;
        let ens =
            simulate_ensemble(&cfg, &ConstantDrift(b0), &NoiseModel::isotropic(sigma), &GroupElement::identity(), n)
                .unwrap();
        let target = group_exp(&(b0 * 0.1));
        let logs: Vec<AlgebraVector> =
            ens.last().unwrap().members.iter().map(|x| relative_log(&target, x).unwrap()).collect();
        let mean = logs.iter().fold(AlgebraVector::zero(), |a, v| a + *v) * (1.0 / n as f64);
        // per-coordinate standard error sigma * sqrt(T / n); 3-sigma band plus O(T/N) bias
        let band = 3.0 * sigma * (0.1f64 / n as f64).sqrt() + 1e-4;
        for k in 0..3 {
            assert!(mean.0[k].abs() < band, "coordinate {k}: {}", mean.0[k]);
        }
    }

    #[test]
    fn isotropy_detection() {
        assert_eq!(NoiseModel::isotropic(0.1).isotropic_scale(), Some(0.1));
        assert_eq!(NoiseModel::none().isotropic_scale(), Some(0.0));
        let rotated: Vec<AlgebraVector> = (0..3)
            .map(|i| {
                AlgebraVector(group_exp(&AlgebraVector::new(0.3, 0.2, 0.1)).matrix() * AlgebraVector::basis(i).0 * 0.2)
            })
            .collect();
        let s = NoiseModel::new(rotated).isotropic_scale().unwrap();
        assert!((s - 0.2).abs() < 1e-14);
        let skewed = NoiseModel::new(vec![
            AlgebraVector::basis(0) * 0.1,
            AlgebraVector::basis(1) * 0.1,
            AlgebraVector::basis(2) * 0.2,
        ]);
        assert_eq!(skewed.isotropic_scale(), None);
        assert_eq!(NoiseModel::isotropic(0.1).diffusion(), Matrix3::identity() * (0.1f64 * 0.1));
    }

    #[test]
    fn csv_roundtrip() {
        let cfg = PathConfig::new(0.1, 4, 11, DEFAULT_BALL_RADIUS).unwrap();
        let ens =
            simulate_ensemble(&cfg, &zero_drift(), &NoiseModel::isotropic(0.1), &GroupElement::identity(), 3).unwrap();
        let mut buf = Vec::new();
        write_ensemble_csv(&mut buf, &ens[4]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(ENSEMBLE_CSV_HEADER));
        let back = read_ensemble_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ens[4]);
    }
}
