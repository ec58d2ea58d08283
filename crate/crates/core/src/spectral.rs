//! Neumann Laplacian on the unit interval, realized in its cosine eigenbasis.
//!
//! Fields live on the DCT-II collocation grid `x_j = (j + 1/2) / M`. The
//! orthonormal basis is `e_0 = 1`, `e_k(x) = sqrt(2) cos(k pi x)`, and the
//! diffusion semigroup `exp(t d Δ)` multiplies mode `k` by
//! `exp(-d (k pi)^2 t)`. Because the semigroup is diagonal here, its
//! algebraic identities (semigroup law, mass conservation, eigen-decay) hold to
//! round-off.
//!
//! The quadrature weights are uniform (`1/M`). They are the unique weights on
//! this grid that integrate modes `0..M` exactly; functions whose cosine
//! series is not band-limited pick up aliasing error of order `M^-2`.

use std::f64::consts::{PI, SQRT_2};
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};

/// Collocation grid on `[0, 1]` with quadrature weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidGrid { size });
        }
        let h = 1.0 / size as f64;
        let points = (0..size).map(|j| (j as f64 + 0.5) * h).collect();
        let weights = vec![h; size];
        Ok(Grid { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Evaluates `f` at every collocation point.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_vec(self.points.iter().map(|&x| f(x)).collect())
    }

    pub fn constant(&self, value: f64) -> ScalarField {
        ScalarField::from_vec(vec![value; self.len()])
    }

    /// Quadrature approximation of `∫_0^1 f dx`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: values.len(),
            });
        }
        Ok(())
    }
}

/// `e_k(x)`, the k-th Neumann eigenfunction normalized in `L²(0,1)`.
pub fn basis_function(k: usize, x: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        SQRT_2 * (k as f64 * PI * x).cos()
    }
}

/// Sup norm of `e_k` over the unit interval.
pub fn basis_sup_norm(k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        SQRT_2
    }
}

/// Eigenvalue magnitude `(k pi)^2` of `-Δ` for mode `k`.
pub fn eigenvalue(k: usize) -> f64 {
    let w = k as f64 * PI;
    w * w
}

macro_rules! vec_newtype {
    ($name:ident) => {
        impl $name {
            pub fn from_vec(values: Vec<f64>) -> Self {
                $name(values)
            }

            pub fn zeros(len: usize) -> Self {
                $name(vec![0.0; len])
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                $name(values)
            }
        }
    };
}

/// Density values at the grid points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalarField(Vec<f64>);
vec_newtype!(ScalarField);

impl ScalarField {
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Amplitudes `<f, e_k>` for `k = 0..M`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralCoeffs(Vec<f64>);
vec_newtype!(SpectralCoeffs);

/// Grid plus planned DCT-II/III pair. Cheap to share behind an `Arc`; all
/// methods take `&self`.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn TransformType2And3<f64>>,
    inverse: Arc<dyn TransformType2And3<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("size", &self.grid.len()).finish()
    }
}

impl Spectral {
    pub fn new(size: usize) -> Result<Self> {
        let grid = Grid::new(size)?;
        let mut planner = DctPlanner::new();
        let forward = planner.plan_dct2(size);
        let inverse = planner.plan_dct3(size);
        Ok(Spectral {
            grid,
            forward,
            inverse,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Scratch buffer sized for the `*_with_scratch` methods.
    pub fn make_scratch(&self) -> Vec<f64> {
        vec![0.0; self.forward.get_scratch_len().max(self.inverse.get_scratch_len())]
    }

    pub fn to_spectral(&self, field: &[f64]) -> Result<SpectralCoeffs> {
        self.grid.check_len(field)?;
        let mut out = field.to_vec();
        let mut scratch = self.make_scratch();
        self.forward_in_place(&mut out, &mut scratch);
        Ok(SpectralCoeffs(out))
    }

    pub fn from_spectral(&self, coeffs: &[f64]) -> Result<ScalarField> {
        self.grid.check_len(coeffs)?;
        let mut out = coeffs.to_vec();
        let mut scratch = self.make_scratch();
        self.inverse_in_place(&mut out, &mut scratch);
        Ok(ScalarField(out))
    }

    /// Grid values → `<f, e_k>` in place.
    pub fn forward_in_place(&self, buf: &mut [f64], scratch: &mut [f64]) {
        let m = buf.len() as f64;
        self.forward.process_dct2_with_scratch(buf, scratch);
        buf[0] /= m;
        let s = SQRT_2 / m;
        buf[1..].iter_mut().for_each(|c| *c *= s);
    }

    /// `<f, e_k>` → grid values in place.
    pub fn inverse_in_place(&self, buf: &mut [f64], scratch: &mut [f64]) {
        // rustdct's DCT-III halves the zeroth input.
        buf[0] *= 2.0;
        buf[1..].iter_mut().for_each(|c| *c *= SQRT_2);
        self.inverse.process_dct3_with_scratch(buf, scratch);
    }

    /// Per-mode multipliers `exp(-d (k pi)^2 t)`.
    pub fn decay_factors(&self, diffusivity: f64, time: f64) -> Result<Vec<f64>> {
        check_semigroup_args(diffusivity, time)?;
        Ok((0..self.len())
            .map(|k| (-diffusivity * eigenvalue(k) * time).exp())
            .collect())
    }

    /// Applies precomputed decay factors to grid values in place.
    pub fn apply_decay_in_place(&self, buf: &mut [f64], factors: &[f64], scratch: &mut [f64]) {
        debug_assert_eq!(buf.len(), factors.len());
        let m = buf.len() as f64;
        self.forward.process_dct2_with_scratch(buf, scratch);
        // Forward normalization followed by inverse pre-scaling collapses to 2/M.
        let s = 2.0 / m;
        buf.iter_mut().zip(factors).for_each(|(c, f)| *c *= s * f);
        self.inverse.process_dct3_with_scratch(buf, scratch);
    }

    /// `exp(t A) f` where `A = d Δ` with Neumann boundary conditions.
    pub fn apply_semigroup(&self, field: &[f64], diffusivity: f64, time: f64) -> Result<ScalarField> {
        self.grid.check_len(field)?;
        let factors = self.decay_factors(diffusivity, time)?;
        let mut out = field.to_vec();
        let mut scratch = self.make_scratch();
        self.apply_decay_in_place(&mut out, &factors, &mut scratch);
        Ok(ScalarField(out))
    }

    pub fn integrate(&self, field: &[f64]) -> f64 {
        self.grid.integrate(field)
    }
}

fn check_semigroup_args(diffusivity: f64, time: f64) -> Result<()> {
    if !(time >= 0.0) || !time.is_finite() {
        return Err(Error::Domain(format!("semigroup time must be finite and >= 0, got {time}")));
    }
    if !(diffusivity >= 0.0) || !diffusivity.is_finite() {
        return Err(Error::Domain(format!(
            "diffusivity must be finite and >= 0, got {diffusivity}"
        )));
    }
    Ok(())
}
