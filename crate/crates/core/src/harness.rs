//! Experiment orchestration: ensembles, CSV artifacts and the validation suite.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{classify, ensemble_reduce, EnsembleStats, Series, ThresholdReport};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result, Species};
use crate::model::{CoefficientSet, ConstantCoefficients};
use crate::noise::{philox4x32, NoiseSpec, NoiseStream};
use crate::oracle::{integrate_ode, PointState};
use crate::solver::{l2_gap_squared, Simulator, SolverConfig, TrajectoryRecord};
use crate::spectral::{basis_function, eigenvalue, ScalarField, Spectral};

pub const CSV_COLUMNS: &str =
    "time,mean_intU,se_intU,mean_intV,se_intV,mean_intU2,se_intU2,mean_intV2,se_intV2,mean_intInvU,se_intInvU";

pub const TRAJECTORY_COLUMNS: &str = "time,intU,intV,intU2,intV2,intInvU,minU,minV";

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Simulates trajectories `0..cfg.ensemble_size`, returned in index order.
pub fn simulate_ensemble(cfg: &ExperimentConfig) -> Result<Vec<TrajectoryRecord>> {
    let sim = Simulator::new(cfg.coefficient_set()?, cfg.solver_config()?)?;
    let init = cfg.initial_state()?;
    let n = u32::try_from(cfg.ensemble_size).map_err(|_| Error::Precondition("ensemble too large".into()))?;
    (0..n)
        .into_par_iter()
        .map(|id| sim.simulate(&init.u, &init.v, id, cfg.seed))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutcome {
    pub stats: EnsembleStats,
    pub report: ThresholdReport,
    /// Largest per-trajectory clipped mass relative to peak mass.
    pub max_relative_clip: f64,
    /// Smallest value of any recorded observable over all trajectories.
    pub min_observable: f64,
}

pub fn summarize(cfg: &ExperimentConfig, records: &[TrajectoryRecord]) -> Result<EnsembleOutcome> {
    let stats = ensemble_reduce(records)?;
    let report = classify(&cfg.coefficient_set()?, &cfg.noise_spec()?);
    let max_relative_clip = records.iter().map(|r| r.relative_clip_mass()).fold(0.0, f64::max);
    let min_observable = records
        .iter()
        .flat_map(|r| [&r.int_u, &r.int_v, &r.int_u2, &r.int_v2, &r.int_inv_u, &r.min_u, &r.min_v])
        .flat_map(|s| s.iter().copied())
        .fold(f64::INFINITY, f64::min);
    Ok(EnsembleOutcome {
        stats,
        report,
        max_relative_clip,
        min_observable,
    })
}

pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleOutcome> {
    summarize(cfg, &simulate_ensemble(cfg)?)
}

/// Config entries for CSV metadata; the output path is excluded so a rerun
/// to another file is byte-identical.
fn metadata(cfg: &ExperimentConfig) -> impl Iterator<Item = (String, String)> {
    cfg.entries().into_iter().filter(|(k, _)| k != "ensemble.output")
}

fn report_entries(r: &ThresholdReport) -> Vec<(&'static str, String)> {
    vec![
        ("extinction_margin", format!("{:?}", r.extinction_margin)),
        ("H0", format!("{:?}", r.h0)),
        ("R0", format!("{:?}", r.r0)),
        ("delta", format!("{:?}", r.delta)),
        ("delta_hat", format!("{:?}", r.delta_hat)),
        ("verdict", r.verdict.to_string()),
        ("fired_condition", r.fired_condition.clone()),
    ]
}

pub fn report_text(r: &ThresholdReport) -> String {
    report_entries(r).into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn ensemble_csv(cfg: &ExperimentConfig, out: &EnsembleOutcome) -> String {
    let mut s = String::new();
    s.push_str("#status=ok\n");
    for (k, v) in metadata(cfg) {
        let _ = writeln!(s, "#{k}={v}");
    }
    let _ = writeln!(s, "#n_traj={}", out.stats.n_traj);
    for (k, v) in report_entries(&out.report) {
        let _ = writeln!(s, "#{k}={v}");
    }
    let _ = writeln!(s, "#max_relative_clip_mass={:?}", out.max_relative_clip);
    s.push_str(CSV_COLUMNS);
    s.push('\n');
    let st = &out.stats;
    for (j, t) in st.times.iter().enumerate() {
        let _ = write!(s, "{t:?}");
        for series in Series::ALL {
            let _ = write!(s, ",{:?},{:?}", st.mean_of(series)[j], st.std_err_of(series)[j]);
        }
        s.push('\n');
    }
    s
}

pub fn error_csv(cfg: &ExperimentConfig, err: &Error) -> String {
    let mut s = String::from("#status=error\n");
    let _ = writeln!(s, "#error={}", err.to_string().replace('\n', " "));
    for (k, v) in metadata(cfg) {
        let _ = writeln!(s, "#{k}={v}");
    }
    s
}

pub fn trajectory_csv(cfg: &ExperimentConfig, trajectory_id: u32, r: &TrajectoryRecord) -> String {
    let mut s = String::new();
    for (k, v) in metadata(cfg) {
        let _ = writeln!(s, "#{k}={v}");
    }
    let _ = writeln!(s, "#trajectory={trajectory_id}");
    let _ = writeln!(s, "#clip_mass={:?}", r.clip_mass);
    let _ = writeln!(s, "#relative_clip_mass={:?}", r.relative_clip_mass());
    s.push_str(TRAJECTORY_COLUMNS);
    s.push('\n');
    for j in 0..r.len() {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.times[j], r.int_u[j], r.int_v[j], r.int_u2[j], r.int_v2[j], r.int_inv_u[j], r.min_u[j], r.min_v[j]
        );
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs the ensemble and writes its CSV to `path`. On failure the partial
/// results are dropped and an error report is written in their place.
pub fn write_ensemble(cfg: &ExperimentConfig, path: &Path) -> Result<EnsembleOutcome> {
    match run_ensemble(cfg) {
        Ok(out) => {
            write_file(path, &ensemble_csv(cfg, &out))?;
            Ok(out)
        }
        Err(e) => {
            write_file(path, &error_csv(cfg, &e))?;
            Err(e)
        }
    }
}

pub fn write_trajectory(cfg: &ExperimentConfig, trajectory_id: u32, path: &Path) -> Result<TrajectoryRecord> {
    let sim = Simulator::new(cfg.coefficient_set()?, cfg.solver_config()?)?;
    let init = cfg.initial_state()?;
    let rec = sim.simulate(&init.u, &init.v, trajectory_id, cfg.seed)?;
    write_file(path, &trajectory_csv(cfg, trajectory_id, &rec))?;
    Ok(rec)
}

/// Mean and standard error of the end-time `|Z_{2N} - Z_N|²` gap over
/// `trajectories` coupled pairs.
pub fn galerkin_gap(
    sim: &Simulator,
    init: (&[f64], &[f64]),
    coarse_modes: usize,
    trajectories: u32,
    seed: u64,
) -> Result<(f64, f64)> {
    let fine_spec = sim.config().noise.truncated(2 * coarse_modes);
    let pair_sim = Simulator::with_spectral(
        Arc::new(sim.spectral().clone()),
        Arc::new(sim.coefficients().clone()),
        SolverConfig {
            noise: fine_spec,
            ..sim.config().clone()
        },
    )?;
    let gaps: Vec<f64> = (0..trajectories)
        .into_par_iter()
        .map(|id| {
            let (fine, coarse) = pair_sim.simulate_galerkin_pair(init.0, init.1, id, seed, coarse_modes)?;
            Ok(l2_gap_squared(sim.spectral(), &fine.final_state, &coarse.final_state))
        })
        .collect::<Result<_>>()?;
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

pub type SemigroupFn = dyn Fn(&Spectral, &[f64], f64, f64) -> Result<ScalarField> + Sync;

pub struct ValidationOptions {
    /// Scales the statistical checks; 200 is the reference size.
    pub ensemble_size: usize,
    pub seed: u64,
    /// Semigroup under test; swapped out by mutation tests.
    pub semigroup: Box<SemigroupFn>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            ensemble_size: 200,
            seed: 20240611,
            semigroup: Box::new(|sp, f, d, t| sp.apply_semigroup(f, d, t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<width$}  {}  {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            );
        }
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

fn check(name: &'static str, r: Result<(bool, String)>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Uniform draws in `[0, 1)` from the counter generator.
fn uniforms(seed: u64, stream: u32, n: usize) -> Vec<f64> {
    let key = [seed as u32, (seed >> 32) as u32];
    (0..n.div_ceil(4) as u32)
        .flat_map(|i| philox4x32([i, stream, 0x5eed, 0], key))
        .take(n)
        .map(|x| x as f64 / 4294967296.0)
        .collect()
}

fn semigroup_check(opts: &ValidationOptions) -> Result<(bool, String)> {
    let sp = Spectral::new(64)?;
    let mut worst: f64 = 0.0;
    for k in [0usize, 1, 2, 5, 20] {
        let e = sp.grid().sample(|x| basis_function(k, x));
        for d in [0.1, 1.0] {
            for t in [0.01, 1.0] {
                let got = (opts.semigroup)(&sp, &e, d, t)?;
                let decay = (-d * eigenvalue(k) * t).exp();
                let err = got.iter().zip(e.iter()).map(|(g, x)| (g - decay * x).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
            }
        }
    }
    Ok((worst < 1e-12, format!("max error {worst:.2e} (tol 1e-12)")))
}

fn mass_check(opts: &ValidationOptions) -> Result<(bool, String)> {
    let sp = Spectral::new(64)?;
    let mut worst: f64 = 0.0;
    for i in 0..100u32 {
        let f: Vec<f64> = uniforms(opts.seed, i, 64).into_iter().map(|u| 4.0 * u - 1.0).collect();
        let g = (opts.semigroup)(&sp, &f, 0.3, 0.05 + 0.01 * i as f64)?;
        worst = worst.max((sp.integrate(&g) - sp.integrate(&f)).abs());
    }
    Ok((worst < 1e-12, format!("max mass drift {worst:.2e} over 100 fields (tol 1e-12)")))
}

fn noise_variance_check(opts: &ValidationOptions) -> Result<(bool, String)> {
    let sp = Spectral::new(16)?;
    let (sigma2, dt) = (0.25, 1e-2);
    let stream = NoiseStream::new(opts.seed, 0, Arc::new(NoiseSpec::single_mode(sigma2, 0.0)?));
    let n = opts.ensemble_size.max(2) * 500;
    let xs: Vec<f64> = (0..n as u64)
        .map(|k| stream.sample_increment(&sp, k, dt, Species::Prey).map(|f| f[0]))
        .collect::<Result<_>>()?;
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let expected = sigma2 * dt;
    let se = expected * (2.0 / (n as f64 - 1.0)).sqrt();
    let z = (var - expected) / se;
    Ok((
        z.abs() < 4.0,
        format!("variance {var:.5e} vs {expected:.1e}, {n} samples, 4 SE band ±{:.2e}", 4.0 * se),
    ))
}

fn noise_covariance_check(opts: &ValidationOptions) -> Result<(bool, String)> {
    let sp = Spectral::new(16)?;
    let dt = 1e-2;
    let lambdas = vec![0.2, 0.1, 0.05];
    let spec = NoiseSpec::new(lambdas.clone(), vec![0.0])?;
    let stream = NoiseStream::new(opts.seed, 1, Arc::new(spec));
    let (i, j) = (1usize, 9usize);
    let x = sp.grid().points();
    let expected: f64 = lambdas
        .iter()
        .enumerate()
        .map(|(k, l)| l * dt * basis_function(k, x[i]) * basis_function(k, x[j]))
        .sum();
    let n = opts.ensemble_size.max(2) * 500;
    let prods: Vec<f64> = (0..n as u64)
        .map(|k| stream.sample_increment(&sp, k, dt, Species::Prey).map(|f| f[i] * f[j]))
        .collect::<Result<_>>()?;
    let mean = prods.iter().sum::<f64>() / n as f64;
    let sd = (prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let se = sd / (n as f64).sqrt();
    Ok((
        (mean - expected).abs() < 4.0 * se,
        format!("covariance {mean:.4e} vs {expected:.4e}, 4 SE band ±{:.2e}", 4.0 * se),
    ))
}

/// Constants shared by the oracle and Galerkin checks.
pub fn reference_constants() -> ConstantCoefficients {
    ConstantCoefficients {
        a1: 4.0,
        a2: 0.1,
        b1: 1.0,
        b2: 1.0,
        c1: 1.0,
        c2: 4.0,
        m1: 1.0,
        m2: 1.0,
        m3: 1.0,
        d1: 0.1,
        d2: 0.1,
    }
}

/// Sup distance over recorded times between a zero-noise, spatially constant
/// run and the ODE oracle.
pub fn oracle_gap(k: &ConstantCoefficients, init: PointState, dt: f64, horizon: f64, stride: usize) -> Result<f64> {
    let m = 8;
    let cfg = SolverConfig {
        dt,
        horizon,
        record_stride: stride,
        grid_size: m,
        ..SolverConfig::default()
    };
    let sim = Simulator::new(CoefficientSet::constant(m, k)?, cfg.clone())?;
    let rec = sim.simulate(&vec![init.u; m], &vec![init.v; m], 0, 0)?;
    let outputs = cfg.steps() as usize / stride;
    if outputs * stride != cfg.steps() as usize {
        return Err(Error::Precondition("stride must divide the step count".into()));
    }
    let sol = integrate_ode(k, init, horizon, outputs, 1e-9)?;
    Ok(rec
        .int_u
        .iter()
        .zip(&rec.int_v)
        .zip(&sol.states)
        .map(|((u, v), s)| (u - s.u).abs().max((v - s.v).abs()))
        .fold(0.0, f64::max))
}

fn oracle_check() -> Result<(bool, String)> {
    let gap = oracle_gap(&reference_constants(), PointState { u: 0.5, v: 0.5 }, 1e-4, 10.0, 100)?;
    Ok((gap < 1e-4, format!("sup gap {gap:.2e} (tol 1e-4, dt 1e-4, T 10)")))
}

fn galerkin_check(opts: &ValidationOptions) -> Result<(bool, String)> {
    let m = 64;
    let cfg = SolverConfig {
        dt: 2e-3,
        horizon: 1.0,
        record_stride: 500,
        grid_size: m,
        noise: NoiseSpec::geometric(0.1, 0.1, 0.5, m)?,
        ..SolverConfig::default()
    };
    let sim = Simulator::new(CoefficientSet::constant(m, &reference_constants())?, cfg)?;
    let g = sim.spectral().grid();
    let u0 = g.sample(|x| 1.0 + 0.5 * (std::f64::consts::PI * x).cos());
    let v0 = g.sample(|x| 0.5 + 0.25 * (3.0 * std::f64::consts::PI * x).cos());
    let n = (opts.ensemble_size / 4).max(2) as u32;
    let gaps = [8usize, 16, 32]
        .iter()
        .map(|&level| galerkin_gap(&sim, (&u0, &v0), level, n, opts.seed))
        .collect::<Result<Vec<_>>>()?;
    let ok = gaps.windows(2).all(|w| w[1].0 <= w[0].0 + w[0].1);
    let detail = gaps
        .iter()
        .zip([8, 16, 32])
        .map(|((m, se), l)| format!("N={l}: {m:.2e}±{se:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((ok, format!("{detail} ({n} pairs)")))
}

/// Runs the invariant suite. Failures are reported in the table, never thrown.
pub fn run_validation(opts: &ValidationOptions) -> ValidationReport {
    ValidationReport {
        checks: vec![
            check("semigroup exactness", semigroup_check(opts)),
            check("semigroup mass", mass_check(opts)),
            check("noise variance", noise_variance_check(opts)),
            check("noise covariance", noise_covariance_check(opts)),
            check("oracle agreement", oracle_check()),
            check("galerkin convergence", galerkin_check(opts)),
        ],
    }
}
