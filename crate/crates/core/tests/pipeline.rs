use std::path::Path;

use bdspde::analysis::{Series, Verdict};
use bdspde::config::{parse_config, ExperimentConfig, NoiseFamily};
use bdspde::harness::{ensemble_csv, run_ensemble, CSV_COLUMNS};

fn shipped(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

fn shortened(mut cfg: ExperimentConfig, horizon: f64) -> ExperimentConfig {
    cfg.horizon = horizon;
    cfg.record_stride = 10;
    cfg
}

#[test]
fn shipped_configs_classify_as_documented() {
    let ext = shipped("extinction.ini");
    let per = shipped("permanence.ini");
    let r = bdspde::analysis::classify(&ext.coefficient_set().unwrap(), &ext.noise_spec().unwrap());
    assert_eq!(r.verdict, Verdict::ExtinctV);
    assert!((r.extinction_margin - 0.5).abs() < 1e-15);
    let r = bdspde::analysis::classify(&per.coefficient_set().unwrap(), &per.noise_spec().unwrap());
    assert_eq!(r.verdict, Verdict::PermanentUV);
    assert!((r.h0 - 2.925).abs() < 1e-12);
    assert!(r.r0 > 0.0 && r.delta_hat > 0.0);
    for cfg in [ext, per] {
        assert_eq!(parse_config(&cfg.to_ini()).unwrap(), cfg);
    }
}

#[test]
fn deterministic_ensemble_has_zero_spread() {
    let mut cfg = shortened(shipped("permanence.ini"), 0.2);
    cfg.noise = NoiseFamily::Zero;
    let out = run_ensemble(&cfg).unwrap();
    assert_eq!(out.stats.n_traj, 200);
    for s in Series::ALL {
        assert!(out.stats.std_err_of(s).iter().all(|&e| e == 0.0), "{}", s.name());
    }
}

#[test]
fn csv_round_trips_numbers() {
    let mut cfg = shortened(shipped("extinction.ini"), 0.5);
    cfg.ensemble_size = 8;
    let out = run_ensemble(&cfg).unwrap();
    let csv = ensemble_csv(&cfg, &out);
    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some(CSV_COLUMNS));
    for (j, row) in lines.enumerate() {
        let vals: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(vals[0], out.stats.times[j]);
        assert_eq!(vals[1], out.stats.mean_of(Series::IntU)[j]);
        assert_eq!(vals[10], out.stats.std_err_of(Series::IntInvU)[j]);
    }
    let header: Vec<&str> = csv.lines().take_while(|l| l.starts_with('#')).collect();
    let from_header = header
        .iter()
        .filter_map(|l| l[1..].split_once('='))
        .filter(|(k, _)| k.contains('.'))
        .fold(String::new(), |mut acc, (k, v)| {
            let (sec, key) = k.split_once('.').unwrap();
            if !acc.contains(&format!("[{sec}]")) {
                acc.push_str(&format!("[{sec}]\n"));
            }
            acc.push_str(&format!("{key} = {v}\n"));
            acc
        });
    assert_eq!(parse_config(&from_header).unwrap(), cfg);
}
