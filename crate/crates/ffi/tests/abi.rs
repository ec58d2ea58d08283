use std::ffi::{CStr, CString};
use std::ptr;

use bdspde_ffi::*;

const CONFIG: &str = "\
[model]
a1 = 2
a2 = 1
b1 = 1
b2 = 1
c1 = 1
c2 = 1
m1 = 1
m2 = 2
m3 = 1
d1 = 0.1
d2 = 0.1

[noise]
family = single
prey_variance = 0.1
predator_variance = 0.1

[initial]
u = 1
v = 1

[solver]
dt = 1e-2
horizon = 1
grid_size = 16
record_stride = 10

[ensemble]
size = 4
seed = 3
";

fn last_error() -> String {
    let p = bds_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> *mut BdsExperiment {
    let c = CString::new(text).unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { bds_experiment_parse(c.as_ptr(), &mut exp) }, BdsStatus::Ok);
    exp
}

#[test]
fn thresholds_through_the_abi() {
    let exp = parse(CONFIG);
    let mut t = BdsThresholds {
        extinction_margin: 0.0,
        h0: 0.0,
        r0: 0.0,
        delta: 0.0,
        delta_hat: 0.0,
        verdict: BdsVerdict::Indeterminate,
    };
    assert_eq!(unsafe { bds_thresholds(exp, &mut t) }, BdsStatus::Ok);
    assert_eq!(t.verdict, BdsVerdict::ExtinctV);
    assert!((t.extinction_margin - 0.5).abs() < 1e-15);
    unsafe { bds_experiment_free(exp) };
}

#[test]
fn config_errors_carry_messages() {
    let bad = CString::new(CONFIG.replace("m1 = 1", "m1 = 0")).unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { bds_experiment_parse(bad.as_ptr(), &mut exp) }, BdsStatus::Config);
    assert!(exp.is_null());
    let msg = last_error();
    assert!(msg.contains("model.m1") && msg.contains("positive"), "{msg}");

    assert_eq!(unsafe { bds_experiment_parse(ptr::null(), &mut exp) }, BdsStatus::NullPointer);
    let missing = CString::new("/nonexistent/file.ini").unwrap();
    assert_eq!(unsafe { bds_experiment_load(missing.as_ptr(), &mut exp) }, BdsStatus::Io);
}

#[test]
fn ensemble_round_trip_and_csv() {
    let exp = parse(CONFIG);
    assert_eq!(unsafe { bds_experiment_set_ensemble_size(exp, 0) }, BdsStatus::InvalidArgument);
    assert_eq!(unsafe { bds_experiment_set_ensemble_size(exp, 3) }, BdsStatus::Ok);
    assert_eq!(unsafe { bds_experiment_set_seed(exp, 9) }, BdsStatus::Ok);
    let mut ens = ptr::null_mut();
    assert_eq!(unsafe { bds_run_ensemble(exp, 2, &mut ens) }, BdsStatus::Ok);
    let n = unsafe { bds_ensemble_len(ens) };
    assert_eq!(n, 11);
    assert_eq!(unsafe { bds_ensemble_trajectories(ens) }, 3);
    let mut times = vec![0.0; n];
    assert_eq!(unsafe { bds_ensemble_times(ens, times.as_mut_ptr(), n) }, BdsStatus::Ok);
    assert!((times[n - 1] - 1.0).abs() < 1e-12);
    let (mut mean, mut se) = (vec![0.0; n], vec![0.0; n]);
    let status = unsafe { bds_ensemble_series(ens, BdsSeries::IntV, mean.as_mut_ptr(), se.as_mut_ptr(), n) };
    assert_eq!(status, BdsStatus::Ok);
    assert!((mean[0] - 1.0).abs() < 1e-12);
    assert!(se.iter().all(|s| *s >= 0.0));
    let status = unsafe { bds_ensemble_series(ens, BdsSeries::IntU, mean.as_mut_ptr(), ptr::null_mut(), n - 1) };
    assert_eq!(status, BdsStatus::InvalidArgument);
    assert!(unsafe { bds_ensemble_max_relative_clip(ens) } < 1e-3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.csv");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { bds_ensemble_write_csv(ens, cpath.as_ptr()) }, BdsStatus::Ok);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("#ensemble.seed=9\n"));
    assert!(text.contains("#n_traj=3\n"));

    unsafe {
        bds_ensemble_free(ens);
        bds_experiment_free(exp);
        bds_ensemble_free(ptr::null_mut());
        bds_experiment_free(ptr::null_mut());
    }
    assert_eq!(unsafe { bds_ensemble_len(ptr::null()) }, 0);
}

#[test]
fn semigroup_through_the_abi() {
    let m = 32;
    let x: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
    let f: Vec<f64> = x.iter().map(|x| 2f64.sqrt() * (std::f64::consts::PI * x).cos()).collect();
    let mut g = vec![0.0; m];
    assert_eq!(unsafe { bds_apply_semigroup(f.as_ptr(), g.as_mut_ptr(), m, 0.5, 0.2) }, BdsStatus::Ok);
    let decay = (-0.5 * std::f64::consts::PI.powi(2) * 0.2).exp();
    for (a, b) in g.iter().zip(&f) {
        assert!((a - decay * b).abs() < 1e-12);
    }
    assert_eq!(unsafe { bds_apply_semigroup(f.as_ptr(), g.as_mut_ptr(), 1, 0.5, 0.2) }, BdsStatus::InvalidArgument);
    assert_eq!(unsafe { bds_apply_semigroup(f.as_ptr(), g.as_mut_ptr(), m, 0.5, -1.0) }, BdsStatus::InvalidArgument);
    assert_eq!(unsafe { bds_apply_semigroup(ptr::null(), g.as_mut_ptr(), m, 0.5, 0.2) }, BdsStatus::NullPointer);
}

#[test]
fn header_declares_the_abi() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/bdspde.h")).unwrap();
    for name in [
        "bds_last_error",
        "bds_experiment_parse",
        "bds_run_ensemble",
        "bds_ensemble_series",
        "bds_apply_semigroup",
        "bds_validate",
        "typedef struct BdsExperiment BdsExperiment",
        "BDS_STATUS_BLOW_UP = 5",
    ] {
        assert!(header.contains(name), "{name}");
    }
    let v = unsafe { CStr::from_ptr(bds_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
