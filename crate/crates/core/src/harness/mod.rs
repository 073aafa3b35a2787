//! End-to-end runs: simulate an ensemble, predict with the ODE system, and
//! compare the two at the terminal time.

mod figure;
pub mod selftest;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drift::{make_conjugation_drift, ConjugationDrift};
use crate::error::{Error, Result};
use crate::frechet::{frechet_mean, FrechetDump, FrechetResult, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::lie::{ball_constants, distance, hat_std, CovMatrix, GroupElement};
use crate::predictor::{integrate_with, write_trajectory_csv, IntegrateOptions, PredictionState, VariantFlag};
use crate::sde::{
    read_ensemble_csv, simulate_paths, slice_paths, write_ensemble_csv, Ensemble, NoiseModel, PathConfig,
    DEFAULT_BALL_RADIUS,
};

pub use figure::render_svg;

/// Minimum number of predictor steps regardless of the simulation grid.
pub const MIN_PREDICT_STEPS: usize = 100;

/// Default drift generator, `hat_std(0.8, -0.4, 0.5)` (about 1.02 rad/s).
pub fn default_generator() -> Matrix3<f64> {
    hat_std(&Vector3::new(0.8, -0.4, 0.5))
}

fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = m[(r, c)];
        }
    }
    out
}

/// Experiment configuration; the JSON keys are `A, sigma, T, N, n_mc, seed, R, variant`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Antisymmetric drift generator, row-major.
    #[serde(rename = "A")]
    pub a: [f64; 9],
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub n_mc: usize,
    pub seed: u64,
    #[serde(rename = "R")]
    pub ball_radius: f64,
    pub variant: VariantFlag,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a: row_major(&default_generator()),
            sigma: 0.1,
            horizon: 0.1,
            steps: 100,
            n_mc: 500,
            seed: 42,
            ball_radius: DEFAULT_BALL_RADIUS,
            variant: VariantFlag::GeneralEq7,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn generator(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.a)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.a.iter().any(|v| !v.is_finite()) {
            return invalid("A has non-finite entries".into());
        }
        let a = self.generator();
        let defect = (a + a.transpose()).amax();
        if defect > 1e-12 {
            return invalid(format!("A must be antisymmetric (defect {defect:e})"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return invalid(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if self.n_mc == 0 {
            return invalid("n_mc must be at least 1".into());
        }
        self.path_config()?;
        if self.variant == VariantFlag::PaperEq9 && self.noise().isotropic_scale().is_none() {
            return Err(Error::NonIsotropicNoise);
        }
        Ok(())
    }

    pub fn path_config(&self) -> Result<PathConfig> {
        PathConfig::new(self.horizon, self.steps, self.seed, self.ball_radius)
    }

    pub fn drift(&self) -> Result<ConjugationDrift> {
        make_conjugation_drift(&self.generator())
    }

    pub fn noise(&self) -> NoiseModel {
        if self.sigma == 0.0 {
            NoiseModel::none()
        } else {
            NoiseModel::isotropic(self.sigma)
        }
    }

    /// Predictor steps: at least [`MIN_PREDICT_STEPS`], and a multiple of `N`
    /// so every simulation slice has a matching prediction.
    pub fn predict_steps(&self) -> usize {
        let per_slice = MIN_PREDICT_STEPS.max(self.steps).div_ceil(self.steps);
        self.steps * per_slice
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Clone, Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a RunConfig,
    config_hash: String,
    drift: &'static str,
    noise: &'static str,
    predict_steps: usize,
    max_ball_radius: f64,
    version: &'static str,
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let manifest = Manifest {
        command,
        config: cfg,
        config_hash: cfg.hash(),
        drift: "conjugation b(X) = X^T A X",
        noise: "isotropic sigma * (G1, G2, G3), G_i = E_i / sqrt(2)",
        predict_steps: cfg.predict_steps(),
        max_ball_radius: ball_constants().max_radius,
        version: env!("CARGO_PKG_VERSION"),
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn ensemble_file(out: &Path, step: usize) -> PathBuf {
    out.join(format!("ensemble_{step}.csv"))
}

fn write_ensemble(out: &Path, ensemble: &Ensemble) -> Result<()> {
    let mut w = BufWriter::new(File::create(ensemble_file(out, ensemble.step))?);
    write_ensemble_csv(&mut w, ensemble)?;
    w.flush()?;
    Ok(())
}

fn simulate_slices(cfg: &RunConfig) -> Result<Vec<Ensemble>> {
    let pc = cfg.path_config()?;
    let paths = simulate_paths(&pc, &cfg.drift()?, &cfg.noise(), &GroupElement::identity(), cfg.n_mc)?;
    Ok(slice_paths(&pc, &paths))
}

fn run_prediction(cfg: &RunConfig) -> Result<Vec<PredictionState>> {
    let opts = IntegrateOptions {
        horizon: cfg.horizon,
        steps: cfg.predict_steps(),
        variant: cfg.variant,
        ball_radius: cfg.ball_radius,
    };
    integrate_with(&PredictionState::dirac(GroupElement::identity()), &cfg.drift()?, &cfg.noise(), &opts)
}

/// Summary of a `simulate` run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub slices: usize,
    pub paths: usize,
    pub stopped_paths: usize,
}

/// Writes `manifest.json` and one `ensemble_<step>.csv` per grid time.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    write_manifest(out, "simulate", cfg)?;
    let slices = simulate_slices(cfg)?;
    for e in &slices {
        write_ensemble(out, e)?;
    }
    let last = slices.last().expect("at least two slices");
    Ok(SimulateSummary { slices: slices.len(), paths: last.len(), stopped_paths: last.stopped_count() })
}

/// Writes `manifest.json` and `prediction.csv`.
pub fn cmd_predict(cfg: &RunConfig, out: &Path) -> Result<Vec<PredictionState>> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    write_manifest(out, "predict", cfg)?;
    let traj = run_prediction(cfg)?;
    let mut w = BufWriter::new(File::create(out.join("prediction.csv"))?);
    write_trajectory_csv(&mut w, &traj)?;
    w.flush()?;
    Ok(traj)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub simulate: f64,
    pub frechet: f64,
    pub predict: f64,
}

/// Agreement at one grid time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceComparison {
    pub step: usize,
    pub t: f64,
    pub mean_distance: f64,
    pub cov_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Distance between the predicted and the Monte Carlo mean at `T`.
    pub mean_distance: f64,
    /// `|Σ_pred − Σ_emp|_F / |Σ_emp|_F` (absolute when `Σ_emp = 0`).
    pub cov_rel_error: f64,
    pub stopped_paths: usize,
    /// Norm of the mean Monte Carlo residual at the returned mean.
    pub residual_centering: f64,
    pub frechet_iterations: usize,
    pub variant: VariantFlag,
    pub n_mc: usize,
    pub seed: u64,
    pub config_hash: String,
    pub mean_ode: [f64; 9],
    pub mean_mc: [f64; 9],
    pub cov_pred: [f64; 9],
    pub cov_emp: [f64; 9],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<Vec<SliceComparison>>,
    pub timings: Timings,
}

/// Relative Frobenius error of `pred` against `emp`.
pub fn cov_rel_error(pred: &CovMatrix, emp: &CovMatrix) -> f64 {
    let diff = (pred.0 - emp.0).norm();
    let scale = emp.frobenius();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn compare_slice(pred: &PredictionState, mc: &FrechetResult) -> (f64, f64) {
    (distance(&pred.mean, &mc.mean), cov_rel_error(&pred.cov, &mc.covariance()))
}

/// Runs simulation, the Fréchet oracle and the predictor; writes
/// `manifest.json`, `prediction.csv`, the terminal `ensemble_<N>.csv`
/// (every slice with `all_slices`), `frechet.json` and `report.json`.
pub fn cmd_compare(cfg: &RunConfig, out: &Path, all_slices: bool) -> Result<ComparisonReport> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    write_manifest(out, "compare", cfg)?;

    let clock = Instant::now();
    let slices = simulate_slices(cfg)?;
    let t_sim = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let terminal = slices.last().expect("terminal slice");
    let mc = frechet_mean(terminal, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let per_slice = if all_slices {
        Some(slices.iter().map(|e| frechet_mean(e, DEFAULT_TOL, DEFAULT_MAX_ITER)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let t_frechet = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let traj = run_prediction(cfg)?;
    let t_pred = clock.elapsed().as_secs_f64();

    let stride = cfg.predict_steps() / cfg.steps;
    let pred_t = traj.last().expect("terminal prediction");
    let (mean_distance, cov_err) = compare_slice(pred_t, &mc);

    let slices_report = per_slice.as_ref().map(|results| {
        results
            .iter()
            .zip(&slices)
            .map(|(r, e)| {
                let (d, c) = compare_slice(&traj[e.step * stride], r);
                SliceComparison { step: e.step, t: e.t, mean_distance: d, cov_rel_error: c }
            })
            .collect()
    });

    if all_slices {
        for e in &slices {
            write_ensemble(out, e)?;
        }
    } else {
        write_ensemble(out, terminal)?;
    }
    let mut w = BufWriter::new(File::create(out.join("prediction.csv"))?);
    write_trajectory_csv(&mut w, &traj)?;
    w.flush()?;
    let dump: FrechetDump = mc.dump();
    write_json(&out.join("frechet.json"), &dump)?;

    let report = ComparisonReport {
        mean_distance,
        cov_rel_error: cov_err,
        stopped_paths: terminal.stopped_count(),
        residual_centering: mc.residual_mean().norm(),
        frechet_iterations: mc.iterations,
        variant: cfg.variant,
        n_mc: cfg.n_mc,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        mean_ode: pred_t.mean.to_row_major(),
        mean_mc: mc.mean.to_row_major(),
        cov_pred: pred_t.cov.to_row_major(),
        cov_emp: mc.covariance().to_row_major(),
        slices: slices_report,
        timings: Timings { simulate: t_sim, frechet: t_frechet, predict: t_pred },
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Renders `figure.svg` from the outputs of [`cmd_compare`].
pub fn cmd_figure(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let report: ComparisonReport = serde_json::from_reader(BufReader::new(File::open(out.join("report.json"))?))?;
    let ensemble = read_ensemble_csv(BufReader::new(File::open(ensemble_file(out, cfg.steps))?))?;
    let mean_ode = GroupElement::from_row_major(&report.mean_ode)?;
    let mean_mc = GroupElement::from_row_major(&report.mean_mc)?;
    let svg = render_svg(&ensemble.members, &mean_ode, &mean_mc, cfg, &report.config_hash);
    let path = out.join("figure.svg");
    fs::write(&path, svg)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_mirrors_experiment() {
        let cfg = RunConfig::default();
        assert_eq!((cfg.sigma, cfg.horizon, cfg.steps, cfg.n_mc, cfg.seed), (0.1, 0.1, 100, 500, 42));
        assert_eq!(cfg.ball_radius, 2.0);
        assert_eq!(cfg.variant, VariantFlag::GeneralEq7);
        cfg.validate().unwrap();
        assert_eq!(cfg.predict_steps(), 100);
    }

    #[test]
    fn config_json_keys() {
        let cfg = RunConfig::from_json(r#"{"sigma": 0.2, "T": 0.5, "N": 30, "variant": "paper_eq9"}"#).unwrap();
        assert_eq!(cfg.sigma, 0.2);
        assert_eq!(cfg.horizon, 0.5);
        assert_eq!(cfg.steps, 30);
        assert_eq!(cfg.variant, VariantFlag::PaperEq9);
        assert_eq!(cfg.predict_steps(), 120);
        let text = serde_json::to_string(&cfg).unwrap();
        for key in ["\"A\"", "\"sigma\"", "\"T\"", "\"N\"", "\"n_mc\"", "\"seed\"", "\"R\"", "\"variant\""] {
            assert!(text.contains(key), "{key}");
        }
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(matches!(RunConfig::from_json(r#"{"sigma": 0.1, "bogus": 1}"#), Err(Error::InvalidConfig(_))));
        assert!(RunConfig::from_json(r#"{"A": [1,0,0, 0,0,0, 0,0,0]}"#).is_err());
        assert!(RunConfig::from_json(r#"{"R": 3.0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"N": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"n_mc": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"sigma": -0.1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"T": 0}"#).is_err());
        assert!(RunConfig::from_json("not json").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 7, ..RunConfig::default() };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn cov_error_handles_zero_reference() {
        let z = CovMatrix::zero();
        assert_eq!(cov_rel_error(&z, &z), 0.0);
        let p = CovMatrix::scaled_identity(1.0);
        assert!((cov_rel_error(&p, &CovMatrix::scaled_identity(2.0)) - 0.5).abs() < 1e-15);
    }
}
