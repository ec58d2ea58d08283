//! Norms, extinction/permanence thresholds and ensemble statistics.
//!
//! Suprema and infima over the domain are taken over grid points. With the
//! uniform midpoint weights every integral is a grid mean.

use std::fmt;

use crate::error::{Error, Result, Species};
use crate::model::{Coefficient, CoefficientSet};
use crate::noise::NoiseSpec;
use crate::solver::TrajectoryRecord;

const DELTA_MAX: f64 = 10.0;
const DELTA_TOL: f64 = 1e-10;

pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn inf_norm(f: &[f64]) -> f64 {
    f.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `(∫ f^p)^{1/p}` for nonnegative `f`.
pub fn lp_norm(f: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p-norm needs p >= 1, got {p}")));
    }
    if let Some(x) = f.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("p-norm needs a nonnegative field, found {x}")));
    }
    let mean = f.iter().map(|x| x.powf(p)).sum::<f64>() / f.len() as f64;
    Ok(mean.powf(1.0 / p))
}

fn ratio(num: &[f64], den: &[f64]) -> Vec<f64> {
    num.iter().zip(den).map(|(a, b)| a / b).collect()
}

/// `inf (a2 - c2/m2)`; positive means the predator dies out.
pub fn extinction_margin(coeffs: &CoefficientSet) -> f64 {
    let a2 = coeffs.field(Coefficient::A2);
    let c2 = coeffs.field(Coefficient::C2);
    let m2 = coeffs.field(Coefficient::M2);
    inf_norm(&a2.iter().zip(ratio(c2, m2)).map(|(a, r)| a - r).collect::<Vec<_>>())
}

/// Prey persistence level: `inf (a1 - c1/m3) - 3 λ1 C0² / 2` with `λ1` the
/// prey noise trace.
pub fn compute_h0(coeffs: &CoefficientSet, spec: &NoiseSpec) -> f64 {
    let a1 = coeffs.field(Coefficient::A1);
    let c1 = coeffs.field(Coefficient::C1);
    let m3 = coeffs.field(Coefficient::M3);
    let base = inf_norm(&a1.iter().zip(ratio(c1, m3)).map(|(a, r)| a - r).collect::<Vec<_>>());
    let c0 = spec.basis_bound();
    base - 1.5 * spec.trace(Species::Prey) * c0 * c0
}

/// Norms entering the predator threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PredatorTerms {
    a2_l1: f64,
    lambda2: f64,
    m2_over_c2_sup: f64,
    /// `|b1|_1 |m1/c2|^* / H0`
    sup_branch: f64,
    /// `|b1|_1^{1/2} (|b1|^*)^{1/2} |m1/c2|_2 / H0`
    l2_branch: f64,
}

impl PredatorTerms {
    fn new(coeffs: &CoefficientSet, spec: &NoiseSpec, h0: f64) -> Result<Self> {
        if !(h0 > 0.0) {
            return Err(Error::Precondition(format!("prey persistence level must be positive, got {h0}")));
        }
        let b1 = coeffs.field(Coefficient::B1);
        let c2 = coeffs.field(Coefficient::C2);
        let m1_c2 = ratio(coeffs.field(Coefficient::M1), c2);
        let b1_l1 = lp_norm(b1, 1.0)?;
        Ok(PredatorTerms {
            a2_l1: lp_norm(coeffs.field(Coefficient::A2), 1.0)?,
            lambda2: spec.trace(Species::Predator),
            m2_over_c2_sup: sup_norm(&ratio(coeffs.field(Coefficient::M2), c2)),
            sup_branch: b1_l1 * sup_norm(&m1_c2) / h0,
            l2_branch: (b1_l1 * sup_norm(b1)).sqrt() * lp_norm(&m1_c2, 2.0)? / h0,
        })
    }

    /// Left side of the δ inequality; `delta = 0` gives the threshold itself.
    fn value(&self, delta: f64) -> f64 {
        let branch = (self.sup_branch + delta).min(self.l2_branch + delta);
        -self.a2_l1 - self.lambda2 / 2.0 - delta + 1.0 / (self.m2_over_c2_sup + branch + delta)
    }
}

/// Predator persistence threshold; requires `h0 > 0`.
pub fn compute_r0(coeffs: &CoefficientSet, spec: &NoiseSpec, h0: f64) -> Result<f64> {
    Ok(PredatorTerms::new(coeffs, spec, h0)?.value(0.0))
}

/// Largest `δ ∈ (0, 10]` keeping the perturbed threshold at least `r0/2`,
/// and the resulting floor `δ̂` for the predator's second moment.
pub fn find_delta(coeffs: &CoefficientSet, spec: &NoiseSpec, h0: f64, r0: f64) -> Result<(f64, f64)> {
    if !(r0 > 0.0) {
        return Err(Error::Precondition(format!("predator threshold must be positive, got {r0}")));
    }
    let terms = PredatorTerms::new(coeffs, spec, h0)?;
    let ok = |d: f64| terms.value(d) >= r0 / 2.0;
    let delta = if ok(DELTA_MAX) {
        DELTA_MAX
    } else {
        let (mut lo, mut hi) = (0.0, DELTA_MAX);
        while hi - lo > DELTA_TOL {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if !(delta > 0.0) || !ok(delta) {
        return Err(Error::Precondition("no admissible delta in (0, 10]".into()));
    }
    Ok((delta, delta_hat(coeffs, h0, delta)?))
}

/// `min{δ²/(4|b2|_2²), H0²δ²/(4 (|m3/c2|^*)² (|b1|^*)²)}`.
pub fn delta_hat(coeffs: &CoefficientSet, h0: f64, delta: f64) -> Result<f64> {
    let b2_l2 = lp_norm(coeffs.field(Coefficient::B2), 2.0)?;
    let m3_c2 = sup_norm(&ratio(coeffs.field(Coefficient::M3), coeffs.field(Coefficient::C2)));
    let b1_sup = sup_norm(coeffs.field(Coefficient::B1));
    Ok(delta_hat_from_norms(delta, b2_l2, h0, m3_c2, b1_sup))
}

fn delta_hat_from_norms(delta: f64, b2_l2: f64, h0: f64, m3_c2_sup: f64, b1_sup: f64) -> f64 {
    let d2 = delta * delta;
    (d2 / (4.0 * b2_l2 * b2_l2)).min(h0 * h0 * d2 / (4.0 * (m3_c2_sup * b1_sup).powi(2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ExtinctV,
    PermanentUV,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ExtinctV => "ExtinctV",
            Verdict::PermanentUV => "PermanentUV",
            Verdict::Indeterminate => "Indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub extinction_margin: f64,
    pub h0: f64,
    /// `NaN` when `h0 <= 0` (the threshold is undefined there).
    pub r0: f64,
    pub delta: f64,
    pub delta_hat: f64,
    pub verdict: Verdict,
    pub fired_condition: String,
}

/// Checks the extinction condition, then the permanence condition. Neither
/// is necessary, so failing both gives [`Verdict::Indeterminate`].
pub fn classify(coeffs: &CoefficientSet, spec: &NoiseSpec) -> ThresholdReport {
    let margin = extinction_margin(coeffs);
    let h0 = compute_h0(coeffs, spec);
    let r0 = compute_r0(coeffs, spec, h0).unwrap_or(f64::NAN);
    let (delta, delta_hat) = find_delta(coeffs, spec, h0, r0).unwrap_or((0.0, 0.0));
    let (verdict, fired) = if margin > 0.0 {
        (Verdict::ExtinctV, "predator extinction: inf(a2 - c2/m2) > 0")
    } else if h0 > 0.0 && r0 > 0.0 && delta_hat > 0.0 {
        (Verdict::PermanentUV, "permanence: H0 > 0 and R0 > 0")
    } else {
        (Verdict::Indeterminate, "no sufficient condition holds")
    };
    ThresholdReport {
        extinction_margin: margin,
        h0,
        r0,
        delta,
        delta_hat,
        verdict,
        fired_condition: fired.to_string(),
    }
}

/// Observable series of a trajectory record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    IntU,
    IntV,
    IntU2,
    IntV2,
    IntInvU,
}

impl Series {
    pub const ALL: [Series; 5] = [Series::IntU, Series::IntV, Series::IntU2, Series::IntV2, Series::IntInvU];

    pub fn name(self) -> &'static str {
        match self {
            Series::IntU => "intU",
            Series::IntV => "intV",
            Series::IntU2 => "intU2",
            Series::IntV2 => "intV2",
            Series::IntInvU => "intInvU",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Series::ALL.into_iter().find(|x| x.name() == s)
    }

    fn of(self, r: &TrajectoryRecord) -> &[f64] {
        match self {
            Series::IntU => &r.int_u,
            Series::IntV => &r.int_v,
            Series::IntU2 => &r.int_u2,
            Series::IntV2 => &r.int_v2,
            Series::IntInvU => &r.int_inv_u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub n_traj: usize,
    /// Indexed by [`Series`] order.
    pub mean: [Vec<f64>; 5],
    pub std_err: [Vec<f64>; 5],
}

impl EnsembleStats {
    pub fn mean_of(&self, s: Series) -> &[f64] {
        &self.mean[s as usize]
    }

    pub fn std_err_of(&self, s: Series) -> &[f64] {
        &self.std_err[s as usize]
    }

    /// Indices of recorded times inside `[t_a, t_b]`.
    pub fn window(&self, t_a: f64, t_b: f64) -> impl Iterator<Item = usize> + '_ {
        let eps = 1e-9 * t_b.abs().max(1.0);
        self.times
            .iter()
            .enumerate()
            .filter(move |(_, t)| **t >= t_a - eps && **t <= t_b + eps)
            .map(|(i, _)| i)
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mut it = values.clone();
    if let Some(first) = it.next() {
        if it.all(|x| x == first) {
            return (first, if first.is_finite() { 0.0 } else { f64::INFINITY });
        }
    }
    let mean = values.clone().sum::<f64>() / nf;
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Pointwise means and standard errors, accumulated in record order.
pub fn ensemble_reduce(records: &[TrajectoryRecord]) -> Result<EnsembleStats> {
    let first = records
        .first()
        .ok_or_else(|| Error::Shape("ensemble needs at least one record".into()))?;
    let times = first.times.clone();
    for (i, r) in records.iter().enumerate() {
        if r.times != times {
            return Err(Error::Shape(format!("record {i} has a different time grid")));
        }
    }
    let n = records.len();
    let mut stats = EnsembleStats {
        times,
        n_traj: n,
        ..EnsembleStats::default()
    };
    for s in Series::ALL {
        let (m, e): (Vec<f64>, Vec<f64>) = (0..stats.times.len())
            .map(|j| mean_and_se(records.iter().map(move |r| s.of(r)[j]), n))
            .unzip();
        stats.mean[s as usize] = m;
        stats.std_err[s as usize] = e;
    }
    Ok(stats)
}

/// Least-squares slope of `ln(series)` against time over `[t_a, t_b]`.
pub fn fit_decay_rate(stats: &EnsembleStats, series: Series, window: (f64, f64)) -> Result<f64> {
    let (t_a, t_b) = window;
    let y = stats.mean_of(series);
    let idx: Vec<usize> = stats.window(t_a, t_b).collect();
    if idx.len() < 2 {
        return Err(Error::Fit(format!("fewer than two samples in [{t_a}, {t_b}]")));
    }
    let mut pts = Vec::with_capacity(idx.len());
    for i in idx {
        if !(y[i] > 0.0) || !y[i].is_finite() {
            return Err(Error::Fit(format!(
                "{} is not positive at t = {} ({})",
                series.name(),
                stats.times[i],
                y[i]
            )));
        }
        pts.push((stats.times[i], y[i].ln()));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, l)| (t - tm) * (l - ym)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tm) * (t - tm)).sum();
    Ok(sxy / sxx)
}
