use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bdspde"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bdspde")
}

fn short_config(dir: &Path, extra: &str) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("extinction.ini"))
        .unwrap()
        .replace("horizon = 50", "horizon = 0.5")
        .replace("record_stride = 100", "record_stride = 50")
        + extra;
    let path = dir.join("short.ini");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn thresholds_report() {
    let out = run(&["thresholds", "--config", configs().join("extinction.ini").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("extinction_margin=0.5\n"), "{text}");
    assert!(text.contains("verdict=ExtinctV\n"));

    let out = run(&["thresholds", "--config", configs().join("permanence.ini").to_str().unwrap()]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("verdict=PermanentUV\n"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ini");
    let text = std::fs::read_to_string(configs().join("extinction.ini")).unwrap().replace("m1 = 1", "m1 = 0");
    std::fs::write(&bad, text).unwrap();
    let out = run(&["ensemble", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("model.m1") && err.contains("line 9"), "{err}");

    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--config", "/no/such/file.ini"]).status.code(), Some(1));
    assert_eq!(run(&["ensemble", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn ensemble_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b/b.csv");
    for (path, threads) in [(&a, "1"), (&b, "2")] {
        let out = run(&[
            "ensemble", "--config", cfg.to_str().unwrap(), "--traj", "5", "--seed", "17",
            "--threads", threads, "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.contains("#n_traj=5\n") && text.contains("#ensemble.seed=17\n"));
    assert!(text.contains("#verdict=ExtinctV\n"));

    let c = dir.path().join("c.csv");
    run(&["ensemble", "--config", cfg.to_str().unwrap(), "--traj", "5", "--seed", "18", "--out", c.to_str().unwrap()]);
    assert_ne!(std::fs::read(&c).unwrap(), std::fs::read(&a).unwrap());
}

#[test]
fn simulate_writes_trajectory_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "time,intU,intV,intU2,intV2,intInvU,minU,minV");
    assert_eq!(rows.len(), 1 + 11);
}

#[test]
fn blow_up_exits_two_and_leaves_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("extinction.ini"))
        .unwrap()
        .replace("prey_variance = 0.1", "prey_variance = 1e6")
        .replace("grid_size = 64", "grid_size = 64\npositivity = reject\nreject_tolerance = 0");
    let cfg = dir.path().join("wild.ini");
    std::fs::write(&cfg, text).unwrap();
    let csv = dir.path().join("wild.csv");
    let out = run(&["ensemble", "--config", cfg.to_str().unwrap(), "--traj", "2", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("#status=error\n"));
}

#[test]
fn validate_passes_with_small_ensemble() {
    let out = run(&["validate", "--traj", "10"]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{table}");
    assert!(table.ends_with("overall: PASS\n"));
    assert_eq!(table.lines().filter(|l| l.contains("  PASS  ")).count(), 6);
}
