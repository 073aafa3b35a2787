use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use so3_frechet_ffi::*;

const GENERATOR: [f64; 9] = [0.0, -0.5, -0.4, 0.5, 0.0, -0.8, 0.4, 0.8, 0.0];

fn last_error() -> String {
    let p = so3_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn exp_log_and_distance_roundtrip() {
    let c = [0.4, -1.1, 0.7];
    let mut g = [0.0; 9];
    let mut back = [0.0; 3];
    let mut d = 0.0;
    unsafe {
        assert_eq!(so3_exp(c.as_ptr(), g.as_mut_ptr()), So3Status::Ok);
        assert_eq!(so3_log(g.as_ptr(), back.as_mut_ptr()), So3Status::Ok);
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(so3_distance(id.as_ptr(), g.as_ptr(), &mut d), So3Status::Ok);
    }
    assert!(so3_last_error_message().is_null());
    for (x, y) in back.iter().zip(&c) {
        assert!((x - y).abs() < 1e-12);
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((d - norm).abs() < 1e-12);
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = [0.0; 9];
    let half = [1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0];
    let not_rotation = [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let symmetric = [0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    unsafe {
        assert_eq!(so3_log(half.as_ptr(), out.as_mut_ptr()), So3Status::AngleNearPi);
        assert!(last_error().contains("pi"));
        assert_eq!(so3_log(not_rotation.as_ptr(), out.as_mut_ptr()), So3Status::NotARotation);
        assert_eq!(so3_exp(ptr::null(), out.as_mut_ptr()), So3Status::NullPointer);
        assert_eq!(
            so3_frechet_mean(out.as_ptr(), 0, 1e-12, 100, out.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()),
            So3Status::Empty
        );
        let mut traj = ptr::null_mut();
        assert_eq!(
            so3_trajectory_new(symmetric.as_ptr(), 0.1, 0.1, 10, So3Variant::General, &mut traj),
            So3Status::InvalidArgument
        );
        assert!(traj.is_null());
        assert_eq!(
            so3_trajectory_new(GENERATOR.as_ptr(), -1.0, 0.1, 10, So3Variant::General, &mut traj),
            So3Status::InvalidArgument
        );
        let mut ens = ptr::null_mut();
        assert_eq!(so3_ensemble_simulate(GENERATOR.as_ptr(), 0.1, 0.1, 10, 1, 0, 2.0, &mut ens), So3Status::Empty);
        assert_eq!(
            so3_ensemble_simulate(GENERATOR.as_ptr(), 0.1, 0.1, 10, 1, 5, 3.0, &mut ens),
            So3Status::InvalidArgument
        );
        assert_eq!(so3_trajectory_len(ptr::null()), 0);
        so3_trajectory_free(ptr::null_mut());
        so3_ensemble_free(ptr::null_mut());
    }
}

#[test]
fn frechet_mean_of_packed_rotations() {
    let mut packed = Vec::new();
    for c in [[0.1, 0.0, 0.0], [-0.1, 0.0, 0.0], [0.0, 0.2, 0.0], [0.0, -0.2, 0.0]] {
        let mut g = [0.0; 9];
        unsafe { so3_exp(c.as_ptr(), g.as_mut_ptr()) };
        packed.extend_from_slice(&g);
    }
    let mut mean = [0.0; 9];
    let mut cov = [0.0; 9];
    let mut iterations = 0usize;
    let status = unsafe {
        so3_frechet_mean(packed.as_ptr(), 4, 1e-12, 100, mean.as_mut_ptr(), cov.as_mut_ptr(), &mut iterations)
    };
    assert_eq!(status, So3Status::Ok);
    let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut d = 0.0;
    unsafe { so3_distance(id.as_ptr(), mean.as_ptr(), &mut d) };
    assert!(d < 1e-12);
    assert!((cov[0] - 0.005).abs() < 1e-12);
    assert!((cov[4] - 0.02).abs() < 1e-12);
    assert!(iterations >= 1);
}

#[test]
fn handles_agree_with_the_library() {
    unsafe {
        let mut traj = ptr::null_mut();
        assert_eq!(
            so3_trajectory_new(GENERATOR.as_ptr(), 0.1, 0.1, 100, So3Variant::IsotropicCurvature, &mut traj),
            So3Status::Ok
        );
        assert_eq!(so3_trajectory_len(traj), 101);
        let (mut t, mut mean, mut cov) = (0.0, [0.0; 9], [0.0; 9]);
        assert_eq!(so3_trajectory_state(traj, 100, &mut t, mean.as_mut_ptr(), cov.as_mut_ptr()), So3Status::Ok);
        assert!((t - 0.1).abs() < 1e-15);
        assert_eq!(so3_trajectory_state(traj, 101, &mut t, mean.as_mut_ptr(), cov.as_mut_ptr()), So3Status::OutOfRange);
        so3_trajectory_free(traj);

        let mut ens = ptr::null_mut();
        assert_eq!(so3_ensemble_simulate(GENERATOR.as_ptr(), 0.1, 0.1, 100, 42, 500, 2.0, &mut ens), So3Status::Ok);
        assert_eq!(so3_ensemble_len(ens), 500);
        assert_eq!(so3_ensemble_stopped_count(ens), 0);
        let mut member = [0.0; 9];
        assert_eq!(so3_ensemble_member(ens, 499, member.as_mut_ptr()), So3Status::Ok);
        assert_eq!(so3_ensemble_member(ens, 500, member.as_mut_ptr()), So3Status::OutOfRange);
        let mut mc = [0.0; 9];
        let mut mc_cov = [0.0; 9];
        assert_eq!(
            so3_ensemble_frechet_mean(ens, 1e-12, 100, mc.as_mut_ptr(), mc_cov.as_mut_ptr(), ptr::null_mut()),
            So3Status::Ok
        );
        so3_ensemble_free(ens);

        let mut d = 0.0;
        so3_distance(mean.as_ptr(), mc.as_ptr(), &mut d);
        assert!(d < 1e-2, "{d}");
        let trace_pred = cov[0] + cov[4] + cov[8];
        let trace_emp = mc_cov[0] + mc_cov[4] + mc_cov[8];
        assert!((trace_pred - trace_emp).abs() / trace_emp < 0.2);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(so3_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(header_dir().join("so3_frechet.h")).unwrap();
    for name in [
        "so3_version",
        "so3_last_error_message",
        "so3_exp",
        "so3_log",
        "so3_distance",
        "so3_frechet_mean",
        "so3_trajectory_new",
        "so3_trajectory_len",
        "so3_trajectory_state",
        "so3_trajectory_free",
        "so3_ensemble_simulate",
        "so3_ensemble_len",
        "so3_ensemble_stopped_count",
        "so3_ensemble_member",
        "so3_ensemble_frechet_mean",
        "so3_ensemble_free",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name}");
    }
    assert!(header.contains("typedef struct So3Trajectory So3Trajectory;"));
    assert!(header.contains("SO3_STATUS_OK = 0"));
}

/// Compiles the C smoke program against the generated header and the static
/// library, then runs it.
#[test]
fn c_program_links_and_runs() {
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libso3_frechet_ffi.a");
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let source = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let build = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-o"])
        .arg(&exe)
        .arg(&source)
        .arg("-I")
        .arg(header_dir())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}{}", String::from_utf8_lossy(&run.stdout), String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
