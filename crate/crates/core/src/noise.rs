//! Q-Wiener increments built from the Neumann cosine eigenbasis.
//!
//! `W_i(t) = Σ_k sqrt(λ_{k,i}) B_{k,i}(t) e_k`. Each scalar Brownian increment
//! is drawn from a counter-based generator keyed by
//! `(master_seed, trajectory, step, mode, species)`, so a draw never depends on
//! scheduling or on how many other modes are active. Refining the mode set
//! reuses the identical draws for the shared modes.

use std::sync::Arc;

use crate::error::{Error, Result, Species};
use crate::spectral::{basis_sup_norm, ScalarField, Spectral};

/// Per-species eigenvalues of the noise covariance, indexed by cosine mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    eigenvalues: [Vec<f64>; 2],
}

impl NoiseSpec {
    /// Both sequences are padded with zeros to a common mode count.
    pub fn new(prey: Vec<f64>, predator: Vec<f64>) -> Result<Self> {
        for (species, values) in [(Species::Prey, &prey), (Species::Predator, &predator)] {
            if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{species} noise eigenvalue {k} must be finite and nonnegative, got {v}"
                )));
            }
        }
        let n = prey.len().max(predator.len());
        let pad = |mut v: Vec<f64>| {
            v.resize(n, 0.0);
            v
        };
        Ok(NoiseSpec {
            eigenvalues: [pad(prey), pad(predator)],
        })
    }

    pub fn zero() -> Self {
        NoiseSpec {
            eigenvalues: [Vec::new(), Vec::new()],
        }
    }

    /// Spatially constant noise `σ_i B_i(t)`: only mode 0 is active.
    pub fn single_mode(prey_variance: f64, predator_variance: f64) -> Result<Self> {
        Self::new(vec![prey_variance], vec![predator_variance])
    }

    /// `λ_{k,i} = σ_i² q^k` for `k = 0..modes`.
    pub fn geometric(prey_variance: f64, predator_variance: f64, ratio: f64, modes: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Domain(format!("geometric ratio must lie in (0, 1), got {ratio}")));
        }
        let family = |s: f64| (0..modes).map(|k| s * ratio.powi(k as i32)).collect();
        Self::new(family(prey_variance), family(predator_variance))
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues[0].len()
    }

    pub fn eigenvalues(&self, species: Species) -> &[f64] {
        &self.eigenvalues[species.index()]
    }

    /// `λ_i = Σ_k λ_{k,i}`.
    pub fn trace(&self, species: Species) -> f64 {
        self.eigenvalues(species).iter().sum()
    }

    /// `C_0 = sup_k |e_k|_∞` over modes with a nonzero eigenvalue in either
    /// species; 1 when no mode (or only the constant mode) is active.
    pub fn basis_bound(&self) -> f64 {
        (0..self.modes())
            .filter(|&k| self.eigenvalues[0][k] != 0.0 || self.eigenvalues[1][k] != 0.0)
            .map(basis_sup_norm)
            .fold(1.0, f64::max)
    }

    /// Keeps the first `modes` eigenvalues of each species.
    pub fn truncated(&self, modes: usize) -> Self {
        let cut = |v: &Vec<f64>| v[..modes.min(v.len())].to_vec();
        NoiseSpec {
            eigenvalues: [cut(&self.eigenvalues[0]), cut(&self.eigenvalues[1])],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.eigenvalues.iter().all(|v| v.iter().all(|&x| x == 0.0))
    }

    /// One past the highest mode with a nonzero eigenvalue for `species`.
    fn active_modes(&self, species: Species) -> usize {
        self.eigenvalues(species)
            .iter()
            .rposition(|&x| x != 0.0)
            .map_or(0, |k| k + 1)
    }
}

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3").
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    const M0: u64 = 0xD251_1F53;
    const M1: u64 = 0xCD9E_8D57;
    const W0: u32 = 0x9E37_79B9;
    const W1: u32 = 0xBB67_AE85;

    let [mut c0, mut c1, mut c2, mut c3] = counter;
    let [mut k0, mut k1] = key;
    for round in 0..10 {
        if round > 0 {
            k0 = k0.wrapping_add(W0);
            k1 = k1.wrapping_add(W1);
        }
        let p0 = M0 * c0 as u64;
        let p1 = M1 * c2 as u64;
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        let next = [hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0];
        [c0, c1, c2, c3] = next;
    }
    [c0, c1, c2, c3]
}

/// Maps 64 random bits to a uniform in `(0, 1]`.
fn open_unit(hi: u32, lo: u32) -> f64 {
    let bits = ((hi as u64) << 32 | lo as u64) >> 11;
    (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Immutable, addressable source of the scalar Brownian increments for one
/// trajectory.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    master_seed: u64,
    trajectory_id: u32,
    spec: Arc<NoiseSpec>,
    sqrt_eigenvalues: [Vec<f64>; 2],
}

impl NoiseStream {
    pub fn new(master_seed: u64, trajectory_id: u32, spec: Arc<NoiseSpec>) -> Self {
        let roots = |s: Species| spec.eigenvalues(s)[..spec.active_modes(s)].iter().map(|l| l.sqrt()).collect();
        let sqrt_eigenvalues = [roots(Species::Prey), roots(Species::Predator)];
        NoiseStream {
            master_seed,
            trajectory_id,
            spec,
            sqrt_eigenvalues,
        }
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trajectory_id(&self) -> u32 {
        self.trajectory_id
    }

    /// Standard normal draw `ξ` addressed by `(step, mode, species)`.
    pub fn gaussian(&self, step: u64, mode: usize, species: Species) -> f64 {
        debug_assert!(mode < (1 << 31));
        let counter = [
            step as u32,
            (step >> 32) as u32,
            self.trajectory_id,
            (mode as u32) << 1 | species.index() as u32,
        ];
        let key = [self.master_seed as u32, (self.master_seed >> 32) as u32];
        let [a, b, c, d] = philox4x32(counter, key);
        let u1 = open_unit(a, b);
        let u2 = open_unit(c, d);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `ΔW(x) = Σ_k sqrt(λ_k dt) ξ_k e_k(x)` on the grid of `spectral`.
    pub fn sample_increment(&self, spectral: &Spectral, step: u64, dt: f64, species: Species) -> Result<ScalarField> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        self.check_resolution(spectral.len())?;
        let mut out = vec![0.0; spectral.len()];
        let mut scratch = spectral.make_scratch();
        self.increment_into(spectral, step, dt.sqrt(), species, &mut out, &mut scratch);
        Ok(ScalarField::from_vec(out))
    }

    /// Active noise modes must be representable on a grid of `grid_size` points.
    pub fn check_resolution(&self, grid_size: usize) -> Result<()> {
        let needed = self.spec.active_modes(Species::Prey).max(self.spec.active_modes(Species::Predator));
        if needed > grid_size {
            return Err(Error::Precondition(format!(
                "noise uses {needed} cosine modes but the grid has only {grid_size} points"
            )));
        }
        Ok(())
    }

    /// Hot-path form of [`sample_increment`](Self::sample_increment); `out`
    /// must have grid length and the resolution must already be checked.
    pub fn increment_into(
        &self,
        spectral: &Spectral,
        step: u64,
        sqrt_dt: f64,
        species: Species,
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        let roots = &self.sqrt_eigenvalues[species.index()];
        match roots.len() {
            0 => out.fill(0.0),
            1 => out.fill(roots[0] * sqrt_dt * self.gaussian(step, 0, species)),
            n => {
                out.fill(0.0);
                for (k, r) in roots.iter().enumerate().take(n) {
                    if *r != 0.0 {
                        out[k] = r * sqrt_dt * self.gaussian(step, k, species);
                    }
                }
                spectral.inverse_in_place(out, scratch);
            }
        }
    }

    /// Mode amplitudes `sqrt(λ_k dt) ξ_k` for all `spec.modes()` modes.
    pub fn mode_amplitudes(&self, step: u64, dt: f64, species: Species) -> Vec<f64> {
        let sqrt_dt = dt.sqrt();
        self.spec
            .eigenvalues(species)
            .iter()
            .enumerate()
            .map(|(k, l)| if *l == 0.0 { 0.0 } else { l.sqrt() * sqrt_dt * self.gaussian(step, k, species) })
            .collect()
    }
}
