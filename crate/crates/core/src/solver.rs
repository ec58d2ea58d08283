//! Time stepping of the mild formulation
//!
//! ```text
//! Z(t) = e^{tA} Z0 + ∫ e^{(t-s)A} F(Z(s)) ds + ∫ e^{(t-s)A} Z(s) dW(s)
//! ```
//!
//! Two exponential schemes are provided; both take the stochastic convolution
//! in Itô form with the multiplication-operator noise `Z ∘ ΔW` evaluated at the
//! left point.
//!
//! * [`Scheme::ExponentialEuler`]: `Z⁺ = S(dt)[Z + dt F(Z) + Z ∘ ΔW]`.
//! * [`Scheme::ExponentialHeun`] (default): the same predictor `Z*`, then the
//!   drift integral by the trapezoid rule,
//!   `Z⁺ = S(dt)[Z + Z ∘ ΔW + dt/2 F(Z)] + dt/2 F(Z*)`.
//!
//! Each step ends with the positivity policy. Clipping records the removed
//! mass so runs can be audited against the nonnegativity the continuum
//! problem guarantees.

use std::sync::Arc;

use crate::error::{Error, Result, Species};
use crate::model::{CoefficientSet, StatePair};
use crate::noise::{NoiseSpec, NoiseStream};
use crate::spectral::{ScalarField, Spectral};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositivityPolicy {
    /// Negative values are set to zero; removed mass is accumulated.
    Clip,
    /// Values below `-tolerance` abort the run.
    Reject { tolerance: f64 },
}

impl PositivityPolicy {
    pub const DEFAULT_REJECT_TOLERANCE: f64 = 1e-8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    ExponentialEuler,
    #[default]
    ExponentialHeun,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExponentialEuler => "exp-euler",
            Scheme::ExponentialHeun => "exp-heun",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "exp-euler" => Some(Scheme::ExponentialEuler),
            "exp-heun" => Some(Scheme::ExponentialHeun),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub horizon: f64,
    pub record_stride: usize,
    /// `None` disables the radial truncation of the reaction.
    pub truncation_radius: Option<f64>,
    pub positivity: PositivityPolicy,
    pub scheme: Scheme,
    pub grid_size: usize,
    pub noise: NoiseSpec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            horizon: 50.0,
            record_stride: 100,
            truncation_radius: None,
            positivity: PositivityPolicy::Clip,
            scheme: Scheme::default(),
            grid_size: 64,
            noise: NoiseSpec::zero(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.dt > self.horizon {
            return bad(format!("dt {} exceeds horizon {}", self.dt, self.horizon));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if self.record_stride as f64 * self.dt > self.horizon * (1.0 + 1e-12) {
            return bad(format!(
                "record_stride * dt = {} exceeds horizon {}",
                self.record_stride as f64 * self.dt,
                self.horizon
            ));
        }
        if let Some(n) = self.truncation_radius {
            if !(n > 0.0) {
                return bad(format!("truncation radius must be positive, got {n}"));
            }
        }
        if let PositivityPolicy::Reject { tolerance } = self.positivity {
            if !(tolerance >= 0.0) {
                return bad(format!("reject tolerance must be nonnegative, got {tolerance}"));
            }
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidGrid { size: self.grid_size });
        }
        Ok(())
    }

    /// Number of steps; the horizon is rounded to a whole number of steps.
    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

/// Observables along one sample path, sampled every `record_stride` steps
/// (and at the final step).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub int_u: Vec<f64>,
    pub int_v: Vec<f64>,
    pub int_u2: Vec<f64>,
    pub int_v2: Vec<f64>,
    /// `∫ 1/U`; `+inf` once `U` vanishes anywhere on the grid.
    pub int_inv_u: Vec<f64>,
    pub min_u: Vec<f64>,
    pub min_v: Vec<f64>,
    /// Total mass removed by clipping over the whole run, both species.
    pub clip_mass: f64,
    pub final_state: StatePair,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest recorded `∫U + ∫V`.
    pub fn peak_mass(&self) -> f64 {
        self.int_u.iter().zip(&self.int_v).map(|(u, v)| u + v).fold(0.0, f64::max)
    }

    /// Clipped mass relative to the peak recorded total mass.
    pub fn relative_clip_mass(&self) -> f64 {
        let peak = self.peak_mass();
        if peak > 0.0 {
            self.clip_mass / peak
        } else {
            0.0
        }
    }

    fn push(&mut self, t: f64, spectral: &Spectral, state: &StatePair) {
        let g = spectral.grid();
        let (u, v) = (&state.u, &state.v);
        self.times.push(t);
        self.int_u.push(g.integrate(u));
        self.int_v.push(g.integrate(v));
        self.int_u2.push(u.iter().zip(g.weights()).map(|(x, w)| w * x * x).sum());
        self.int_v2.push(v.iter().zip(g.weights()).map(|(x, w)| w * x * x).sum());
        self.int_inv_u.push(u.iter().zip(g.weights()).map(|(x, w)| w / x).sum());
        self.min_u.push(u.min());
        self.min_v.push(v.min());
    }
}

/// Reusable buffers for one trajectory.
#[derive(Debug, Clone)]
pub struct Workspace {
    dw: [Vec<f64>; 2],
    drift: [Vec<f64>; 2],
    predictor: [Vec<f64>; 2],
    scratch: Vec<f64>,
}

impl Workspace {
    pub fn new(spectral: &Spectral) -> Self {
        let m = spectral.len();
        let pair = || [vec![0.0; m], vec![0.0; m]];
        Workspace {
            dw: pair(),
            drift: pair(),
            predictor: pair(),
            scratch: spectral.make_scratch(),
        }
    }
}

/// Removes negative values according to `policy`; returns the clipped mass.
pub fn apply_positivity(
    state: &mut StatePair,
    policy: PositivityPolicy,
    weights: &[f64],
    step: u64,
) -> Result<f64> {
    let mut clipped = 0.0;
    for species in Species::BOTH {
        let f = state.get_mut(species);
        match policy {
            PositivityPolicy::Clip => {
                for (x, w) in f.iter_mut().zip(weights) {
                    if *x < 0.0 {
                        clipped -= *x * w;
                        *x = 0.0;
                    }
                }
            }
            PositivityPolicy::Reject { tolerance } => {
                if let Some((index, &value)) = f.iter().enumerate().find(|(_, x)| **x < -tolerance) {
                    return Err(Error::Positivity {
                        species,
                        index,
                        value,
                        step,
                    });
                }
            }
        }
    }
    Ok(clipped)
}

/// Simulator bound to one coefficient set and solver configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    spectral: Arc<Spectral>,
    coeffs: Arc<CoefficientSet>,
    cfg: SolverConfig,
    noise: Arc<NoiseSpec>,
    decay: [Vec<f64>; 2],
}

impl Simulator {
    pub fn new(coeffs: CoefficientSet, cfg: SolverConfig) -> Result<Self> {
        Self::with_spectral(Arc::new(Spectral::new(cfg.grid_size)?), Arc::new(coeffs), cfg)
    }

    pub fn with_spectral(spectral: Arc<Spectral>, coeffs: Arc<CoefficientSet>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if spectral.len() != cfg.grid_size || coeffs.len() != cfg.grid_size {
            return Err(Error::Dimension {
                expected: cfg.grid_size,
                found: if spectral.len() != cfg.grid_size { spectral.len() } else { coeffs.len() },
            });
        }
        let noise = Arc::new(cfg.noise.clone());
        NoiseStream::new(0, 0, noise.clone()).check_resolution(cfg.grid_size)?;
        let decay = [
            spectral.decay_factors(coeffs.d1(), cfg.dt)?,
            spectral.decay_factors(coeffs.d2(), cfg.dt)?,
        ];
        Ok(Simulator {
            spectral,
            coeffs,
            cfg,
            noise,
            decay,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn stream(&self, master_seed: u64, trajectory_id: u32) -> NoiseStream {
        NoiseStream::new(master_seed, trajectory_id, self.noise.clone())
    }

    /// Advances `state` by one step with index `k`; returns the clipped mass.
    pub fn step(&self, state: &mut StatePair, stream: &NoiseStream, k: u64, ws: &mut Workspace) -> Result<f64> {
        let coeffs = &*self.coeffs;
        let radius = self.cfg.truncation_radius;
        self.step_with(state, stream, k, ws, |i, u, v| coeffs.reaction_at(i, radius, u, v))
    }

    /// Step with an arbitrary pointwise reaction `(grid index, u, v) -> (F1, F2)`.
    pub(crate) fn step_with<R>(
        &self,
        state: &mut StatePair,
        stream: &NoiseStream,
        k: u64,
        ws: &mut Workspace,
        reaction: R,
    ) -> Result<f64>
    where
        R: Fn(usize, f64, f64) -> (f64, f64),
    {
        let dt = self.cfg.dt;
        let sqrt_dt = dt.sqrt();
        let sp = &*self.spectral;
        let Workspace {
            dw,
            drift,
            predictor,
            scratch,
        } = ws;

        for s in Species::BOTH {
            stream.increment_into(sp, k, sqrt_dt, s, &mut dw[s.index()], scratch);
        }
        let (u, v) = (&mut state.u, &mut state.v);
        let [fu, fv] = drift;
        for i in 0..u.len() {
            (fu[i], fv[i]) = reaction(i, u[i], v[i]);
        }

        match self.cfg.scheme {
            Scheme::ExponentialEuler => {
                for (s, x, f) in [(0, &mut **u, &**fu), (1, &mut **v, &**fv)] {
                    for ((xi, fi), wi) in x.iter_mut().zip(f).zip(&dw[s]) {
                        *xi += dt * fi + *xi * wi;
                    }
                    sp.apply_decay_in_place(x, &self.decay[s], scratch);
                }
            }
            Scheme::ExponentialHeun => {
                let half = 0.5 * dt;
                for (s, x, f) in [(0, &mut **u, &**fu), (1, &mut **v, &**fv)] {
                    let p = &mut predictor[s];
                    for i in 0..x.len() {
                        let noisy = x[i] + x[i] * dw[s][i];
                        p[i] = noisy + dt * f[i];
                        x[i] = noisy + half * f[i];
                    }
                    sp.apply_decay_in_place(p, &self.decay[s], scratch);
                    sp.apply_decay_in_place(x, &self.decay[s], scratch);
                }
                let [pu, pv] = predictor;
                for i in 0..u.len() {
                    let (gu, gv) = reaction(i, pu[i].max(0.0), pv[i].max(0.0));
                    u[i] += half * gu;
                    v[i] += half * gv;
                }
            }
        }

        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::BlowUp { step: k });
        }
        apply_positivity(state, self.cfg.positivity, sp.grid().weights(), k)
    }

    fn check_initial(&self, u0: &[f64], v0: &[f64]) -> Result<StatePair> {
        let grid = self.spectral.grid();
        grid.check_len(u0)?;
        grid.check_len(v0)?;
        for (species, f) in [(Species::Prey, u0), (Species::Predator, v0)] {
            if let Some((index, &value)) = f.iter().enumerate().find(|(_, x)| !(**x >= 0.0) || !x.is_finite()) {
                return Err(if value.is_finite() {
                    Error::NegativeState { species, index, value }
                } else {
                    Error::Domain(format!("initial {species} density is not finite at grid index {index}"))
                });
            }
        }
        Ok(StatePair::new(u0.to_vec().into(), v0.to_vec().into()))
    }

    pub fn simulate(&self, u0: &[f64], v0: &[f64], trajectory_id: u32, master_seed: u64) -> Result<TrajectoryRecord> {
        let stream = self.stream(master_seed, trajectory_id);
        self.run(u0, v0, &[stream]).map(|mut r| r.remove(0))
    }

    /// Two runs on shared Gaussian draws: the full noise and its restriction
    /// to the first `coarse_modes` modes.
    pub fn simulate_galerkin_pair(
        &self,
        u0: &[f64],
        v0: &[f64],
        trajectory_id: u32,
        master_seed: u64,
        coarse_modes: usize,
    ) -> Result<(TrajectoryRecord, TrajectoryRecord)> {
        if coarse_modes > self.noise.modes() {
            return Err(Error::Precondition(format!(
                "coarse mode count {coarse_modes} exceeds the {} noise modes",
                self.noise.modes()
            )));
        }
        let fine = self.stream(master_seed, trajectory_id);
        let coarse = NoiseStream::new(master_seed, trajectory_id, Arc::new(self.noise.truncated(coarse_modes)));
        let mut out = self.run(u0, v0, &[fine, coarse])?;
        let coarse = out.pop().expect("two records");
        let fine = out.pop().expect("two records");
        Ok((fine, coarse))
    }

    /// Advances one state per stream in lockstep.
    fn run(&self, u0: &[f64], v0: &[f64], streams: &[NoiseStream]) -> Result<Vec<TrajectoryRecord>> {
        let init = self.check_initial(u0, v0)?;
        let n = self.cfg.steps();
        let stride = self.cfg.record_stride as u64;
        let sp = &*self.spectral;
        let mut states = vec![init; streams.len()];
        let mut records = vec![TrajectoryRecord::default(); streams.len()];
        let mut ws = Workspace::new(sp);
        for (rec, st) in records.iter_mut().zip(&states) {
            rec.push(0.0, sp, st);
        }
        for k in 0..n {
            for ((state, rec), stream) in states.iter_mut().zip(records.iter_mut()).zip(streams) {
                rec.clip_mass += self.step(state, stream, k, &mut ws)?;
                let done = k + 1;
                if done % stride == 0 || done == n {
                    rec.push(done as f64 * self.cfg.dt, sp, state);
                }
            }
        }
        for (rec, st) in records.iter_mut().zip(states) {
            rec.final_state = st;
        }
        Ok(records)
    }
}

/// One step of the scheme in `cfg`; convenience wrapper over [`Simulator::step`].
pub fn step(
    state: &StatePair,
    coeffs: &CoefficientSet,
    stream: &NoiseStream,
    k: u64,
    cfg: &SolverConfig,
) -> Result<StatePair> {
    let sim = Simulator::new(coeffs.clone(), cfg.clone())?;
    let sim_stream = NoiseStream::new(stream.master_seed(), stream.trajectory_id(), Arc::new(stream.spec().clone()));
    let mut next = state.clone();
    let mut ws = Workspace::new(sim.spectral());
    sim.step(&mut next, &sim_stream, k, &mut ws)?;
    Ok(next)
}

pub fn simulate_trajectory(
    u0: &ScalarField,
    v0: &ScalarField,
    coeffs: &CoefficientSet,
    cfg: &SolverConfig,
    trajectory_id: u32,
    master_seed: u64,
) -> Result<TrajectoryRecord> {
    Simulator::new(coeffs.clone(), cfg.clone())?.simulate(u0, v0, trajectory_id, master_seed)
}

/// `|Z_a - Z_b|²` in `L²(0,1; R²)`.
pub fn l2_gap_squared(spectral: &Spectral, a: &StatePair, b: &StatePair) -> f64 {
    let g = spectral.grid();
    let sq = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).zip(g.weights()).map(|((p, q), w)| w * (p - q) * (p - q)).sum() };
    sq(&a.u, &b.u) + sq(&a.v, &b.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConstantCoefficients;
    use crate::oracle::{integrate_ode, PointState};
    use std::f64::consts::PI;

    fn permanence_constants() -> ConstantCoefficients {
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

    fn cfg(m: usize, dt: f64, horizon: f64) -> SolverConfig {
        SolverConfig {
            dt,
            horizon,
            record_stride: 1,
            grid_size: m,
            ..SolverConfig::default()
        }
    }

    fn sim(k: &ConstantCoefficients, cfg: SolverConfig) -> Simulator {
        Simulator::new(CoefficientSet::constant(cfg.grid_size, k).unwrap(), cfg).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(cfg(16, 1e-3, 1.0).validate().is_ok());
        assert!(cfg(16, 2.0, 1.0).validate().is_err());
        assert!(cfg(16, 0.0, 1.0).validate().is_err());
        assert!(SolverConfig { record_stride: 2000, ..cfg(16, 1e-3, 1.0) }.validate().is_err());
        assert!(SolverConfig { record_stride: 0, ..cfg(16, 1e-3, 1.0) }.validate().is_err());
        assert!(SolverConfig { truncation_radius: Some(0.0), ..cfg(16, 1e-3, 1.0) }.validate().is_err());
        assert!(cfg(1, 1e-3, 1.0).validate().is_err());
    }

    #[test]
    fn positivity_policy_examples() {
        let w = [0.25; 4];
        let mut s = StatePair::new(vec![0.0, 1.0, 2.0, 3.0].into(), vec![1.0; 4].into());
        let before = s.clone();
        assert_eq!(apply_positivity(&mut s, PositivityPolicy::Clip, &w, 0).unwrap(), 0.0);
        assert_eq!(s, before);

        let mut s = StatePair::new(vec![1.0, -1e-12, 2.0, 3.0].into(), vec![1.0; 4].into());
        let m = apply_positivity(&mut s, PositivityPolicy::Clip, &w, 0).unwrap();
        assert_eq!(s.u[1], 0.0);
        assert!((m - 0.25e-12).abs() < 1e-27);

        let mut s = StatePair::new(vec![1.0; 4].into(), vec![1.0, 1.0, -0.5, 1.0].into());
        let err = apply_positivity(&mut s, PositivityPolicy::Reject { tolerance: 1e-8 }, &w, 17).unwrap_err();
        assert!(matches!(
            err,
            Error::Positivity { species: Species::Predator, index: 2, step: 17, .. }
        ));
        let mut s = StatePair::new(vec![1.0, -1e-10, 1.0, 1.0].into(), vec![1.0; 4].into());
        assert!(apply_positivity(&mut s, PositivityPolicy::Reject { tolerance: 1e-8 }, &w, 0).is_ok());
    }

    #[test]
    fn pure_diffusion_reduces_to_semigroup() {
        for scheme in [Scheme::ExponentialEuler, Scheme::ExponentialHeun] {
            let c = SolverConfig { scheme, ..cfg(32, 1e-2, 1.0) };
            let s = sim(&permanence_constants(), c);
            let u0 = s.spectral().grid().sample(|x| (PI * x).cos() + 1.0);
            let mut state = StatePair::new(u0.clone(), u0.clone());
            let stream = s.stream(1, 0);
            let mut ws = Workspace::new(s.spectral());
            let n = 25;
            for k in 0..n {
                s.step_with(&mut state, &stream, k, &mut ws, |_, _, _| (0.0, 0.0)).unwrap();
            }
            let want = s.spectral().apply_semigroup(&u0, 0.1, n as f64 * 1e-2).unwrap();
            let diff = state.u.iter().zip(want.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "{scheme:?}: {diff}");
        }
    }

    #[test]
    fn constant_state_single_step() {
        let k = permanence_constants();
        let dt = 1e-2;
        let (u0, v0) = (0.5, 0.25);
        let f = |u: f64, v: f64| k.reaction(u, v);
        for scheme in [Scheme::ExponentialEuler, Scheme::ExponentialHeun] {
            let s = sim(&k, SolverConfig { scheme, ..cfg(16, dt, 1.0) });
            let mut state = StatePair::new(vec![u0; 16].into(), vec![v0; 16].into());
            s.step(&mut state, &s.stream(3, 0), 0, &mut Workspace::new(s.spectral())).unwrap();
            let (f1, f2) = f(u0, v0);
            let (eu, ev) = match scheme {
                Scheme::ExponentialEuler => (u0 + dt * f1, v0 + dt * f2),
                Scheme::ExponentialHeun => {
                    let (g1, g2) = f(u0 + dt * f1, v0 + dt * f2);
                    (u0 + dt / 2.0 * (f1 + g1), v0 + dt / 2.0 * (f2 + g2))
                }
            };
            assert!(state.u.iter().all(|x| (x - eu).abs() < 1e-14), "{scheme:?}");
            assert!(state.v.iter().all(|x| (x - ev).abs() < 1e-14), "{scheme:?}");
        }
    }

    #[test]
    fn step_is_deterministic() {
        let k = permanence_constants();
        let c = SolverConfig {
            noise: NoiseSpec::geometric(0.1, 0.1, 0.5, 8).unwrap(),
            ..cfg(32, 1e-3, 1.0)
        };
        let coeffs = CoefficientSet::constant(32, &k).unwrap();
        let g = crate::spectral::Grid::new(32).unwrap();
        let state = StatePair::new(g.sample(|x| 1.0 + x), g.sample(|x| 2.0 - x));
        let stream = NoiseStream::new(9, 2, Arc::new(c.noise.clone()));
        let a = step(&state, &coeffs, &stream, 5, &c).unwrap();
        let b = step(&state, &coeffs, &stream, 5, &c).unwrap();
        assert_eq!(a, b);
        let other = step(&state, &coeffs, &stream, 6, &c).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let k = permanence_constants();
        let s = sim(&k, cfg(8, 1e-3, 1.0));
        let mut state = StatePair::new(vec![1.0; 8].into(), vec![1.0; 8].into());
        let err = s
            .step_with(&mut state, &s.stream(0, 0), 41, &mut Workspace::new(s.spectral()), |_, _, _| (f64::INFINITY, 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 41 }));
    }

    #[test]
    fn absorbing_zero_state() {
        let c = SolverConfig {
            noise: NoiseSpec::single_mode(0.2, 0.2).unwrap(),
            record_stride: 10,
            ..cfg(16, 1e-3, 0.5)
        };
        let s = sim(&permanence_constants(), c);
        let rec = s.simulate(&[0.0; 16], &[0.0; 16], 0, 1).unwrap();
        for series in [&rec.int_u, &rec.int_v, &rec.int_u2, &rec.int_v2, &rec.min_u, &rec.min_v] {
            assert!(series.iter().all(|&x| x == 0.0));
        }
        assert!(rec.int_inv_u.iter().all(|x| x.is_infinite()));
        assert_eq!(rec.clip_mass, 0.0);
        assert_eq!(rec.times.len(), 51);
    }

    #[test]
    fn invalid_initial_data_is_rejected() {
        let s = sim(&permanence_constants(), cfg(8, 1e-3, 0.01));
        let mut u0 = vec![1.0; 8];
        u0[3] = -0.1;
        assert!(matches!(s.simulate(&u0, &[1.0; 8], 0, 0), Err(Error::NegativeState { index: 3, .. })));
        assert!(s.simulate(&[1.0; 7], &[1.0; 8], 0, 0).is_err());
        assert!(s.simulate(&[f64::INFINITY; 8], &[1.0; 8], 0, 0).is_err());
    }

    #[test]
    fn record_times_follow_stride() {
        let s = sim(
            &permanence_constants(),
            SolverConfig { record_stride: 3, ..cfg(8, 0.1, 1.0) },
        );
        let rec = s.simulate(&[1.0; 8], &[1.0; 8], 0, 0).unwrap();
        let want = [0.0, 0.3, 0.6, 0.9, 1.0];
        assert_eq!(rec.times.len(), want.len());
        for (a, b) in rec.times.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn distinct_trajectories_differ() {
        let c = SolverConfig {
            noise: NoiseSpec::single_mode(0.1, 0.1).unwrap(),
            record_stride: 50,
            ..cfg(16, 1e-3, 0.5)
        };
        let s = sim(&permanence_constants(), c);
        let a = s.simulate(&[1.0; 16], &[1.0; 16], 0, 5).unwrap();
        let b = s.simulate(&[1.0; 16], &[1.0; 16], 1, 5).unwrap();
        let a2 = s.simulate(&[1.0; 16], &[1.0; 16], 0, 5).unwrap();
        assert_ne!(a.int_u, b.int_u);
        assert_eq!(a, a2);
    }

    #[test]
    fn zero_noise_constant_run_tracks_oracle() {
        let k = permanence_constants();
        let dt = 1e-3;
        let c = SolverConfig { record_stride: 100, ..cfg(8, dt, 5.0) };
        let s = sim(&k, c);
        let rec = s.simulate(&[0.5; 8], &[0.5; 8], 0, 0).unwrap();
        let sol = integrate_ode(&k, PointState { u: 0.5, v: 0.5 }, 5.0, 50, 1e-10).unwrap();
        let err = rec
            .int_u
            .iter()
            .zip(&rec.int_v)
            .zip(&sol.states)
            .map(|((u, v), p)| (u - p.u).abs().max((v - p.v).abs()))
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn heun_is_second_order_and_euler_first_order_without_noise() {
        // Order from three resolutions of a zero-noise run with spatial structure.
        let k = permanence_constants();
        let g = crate::spectral::Grid::new(32).unwrap();
        let u0 = g.sample(|x| 1.0 + 0.5 * (PI * x).cos());
        let v0 = g.sample(|x| 0.5 + 0.25 * (2.0 * PI * x).cos());
        let end = |scheme, dt: f64| {
            let s = sim(&k, SolverConfig { scheme, record_stride: 1, ..cfg(32, dt, 1.0) });
            s.simulate(&u0, &v0, 0, 0).unwrap().final_state
        };
        for (scheme, min_order) in [(Scheme::ExponentialEuler, 0.9), (Scheme::ExponentialHeun, 1.8)] {
            let a = end(scheme, 4e-3);
            let b = end(scheme, 2e-3);
            let c = end(scheme, 1e-3);
            let sp = Spectral::new(32).unwrap();
            let e1 = l2_gap_squared(&sp, &a, &b).sqrt();
            let e2 = l2_gap_squared(&sp, &b, &c).sqrt();
            let order = (e1 / e2).log2();
            assert!(order >= min_order, "{scheme:?}: order {order}");
        }
    }

    #[test]
    fn prey_mass_obeys_linear_growth_bound() {
        // With no noise, d/dt ∫U <= sup(a1) ∫U; checked on recorded increments.
        let k = permanence_constants();
        let c = SolverConfig { record_stride: 10, ..cfg(32, 1e-3, 3.0) };
        let s = sim(&k, c);
        let g = s.spectral().grid().clone();
        let rec = s
            .simulate(&g.sample(|x| 0.2 + 0.1 * (PI * x).cos()), &g.sample(|x| 1.0 + 0.5 * x), 0, 0)
            .unwrap();
        for i in 1..rec.len() {
            let h = rec.times[i] - rec.times[i - 1];
            let bound = rec.int_u[i - 1] * (k.a1 * h).exp();
            assert!(rec.int_u[i] <= bound * 1.05, "t={}", rec.times[i]);
        }
    }

    #[test]
    fn continuous_dependence_on_initial_data() {
        let k = permanence_constants();
        let c = SolverConfig {
            noise: NoiseSpec::geometric(0.05, 0.05, 0.5, 8).unwrap(),
            record_stride: 1000,
            ..cfg(32, 1e-3, 1.0)
        };
        let s = sim(&k, c);
        let g = s.spectral().grid().clone();
        let u0 = g.sample(|x| 1.0 + 0.5 * (PI * x).cos());
        let v0 = g.sample(|x| 0.7 + 0.2 * (3.0 * PI * x).cos());
        let bump = g.sample(|x| (2.0 * PI * x).cos() + 1.0);
        let bump_norm = g.integrate(&bump.iter().map(|b| b * b).collect::<Vec<_>>()).sqrt();
        let base = s.simulate(&u0, &v0, 3, 77).unwrap().final_state;
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| {
                let scale = eps / bump_norm;
                let up: Vec<f64> = u0.iter().zip(bump.iter()).map(|(u, b)| u + scale * b).collect();
                let vp: Vec<f64> = v0.iter().zip(bump.iter()).map(|(v, b)| v + scale * b).collect();
                let pert = s.simulate(&up, &vp, 3, 77).unwrap().final_state;
                let init_gap = (2.0f64).sqrt() * eps;
                l2_gap_squared(s.spectral(), &base, &pert).sqrt() / init_gap
            })
            .collect();
        for r in &ratios {
            assert!(r.is_finite() && *r < 10.0, "{ratios:?}");
        }
        // Stable Lipschitz constant: the ratios agree as eps shrinks.
        assert!((ratios[1] - ratios[2]).abs() < 0.05 * ratios[2], "{ratios:?}");
    }

    #[test]
    fn galerkin_pair_degenerate_cases() {
        let k = permanence_constants();
        let g = crate::spectral::Grid::new(16).unwrap();
        let u0 = g.sample(|x| 1.0 + 0.3 * (PI * x).cos());
        let v0 = g.constant(0.5);
        let base = SolverConfig { record_stride: 25, ..cfg(16, 1e-3, 0.2) };

        let s = sim(&k, SolverConfig { noise: NoiseSpec::geometric(0.1, 0.1, 0.5, 8).unwrap(), ..base.clone() });
        let (fine, coarse) = s.simulate_galerkin_pair(&u0, &v0, 0, 1, 8).unwrap();
        assert_eq!(fine, coarse);

        let spec = NoiseSpec::new(vec![0.1, 0.05, 0.0, 0.0], vec![0.2, 0.0, 0.0, 0.0]).unwrap();
        let s = sim(&k, SolverConfig { noise: spec, ..base.clone() });
        let (fine, coarse) = s.simulate_galerkin_pair(&u0, &v0, 0, 1, 2).unwrap();
        assert_eq!(fine, coarse);
        let (fine, coarse) = s.simulate_galerkin_pair(&u0, &v0, 0, 1, 1).unwrap();
        assert_ne!(fine, coarse);
        assert!(s.simulate_galerkin_pair(&u0, &v0, 0, 1, 5).is_err());
    }

    #[test]
    fn truncation_far_above_states_is_bit_identical() {
        let k = permanence_constants();
        let base = SolverConfig {
            noise: NoiseSpec::single_mode(0.05, 0.05).unwrap(),
            record_stride: 50,
            ..cfg(16, 1e-3, 0.5)
        };
        let plain = sim(&k, base.clone()).simulate(&[1.0; 16], &[1.0; 16], 0, 2).unwrap();
        let trunc = sim(&k, SolverConfig { truncation_radius: Some(1e6), ..base.clone() })
            .simulate(&[1.0; 16], &[1.0; 16], 0, 2)
            .unwrap();
        assert_eq!(plain, trunc);
        let tight = sim(&k, SolverConfig { truncation_radius: Some(1.0), ..base })
            .simulate(&[1.0; 16], &[1.0; 16], 0, 2)
            .unwrap();
        assert_ne!(plain, tight);
    }

    #[test]
    fn noise_beyond_grid_is_rejected() {
        let c = SolverConfig { noise: NoiseSpec::geometric(0.1, 0.1, 0.5, 20).unwrap(), ..cfg(16, 1e-3, 1.0) };
        assert!(Simulator::new(CoefficientSet::constant(16, &permanence_constants()).unwrap(), c).is_err());
    }
}
