//! High-accuracy integrator for the spatially homogeneous, noise-free system.
//!
//! Classical RK4 on a uniform step, with the step halved until two successive
//! refinements agree to `tol` in sup norm over the output times. The
//! right-hand side is written out here rather than borrowed from
//! [`crate::model`] so the oracle stays independent of the code it checks.

use crate::error::{Error, Result};
use crate::model::ConstantCoefficients;

const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<PointState>,
    /// RK4 substeps per output interval in the accepted refinement.
    pub substeps: usize,
    /// Sup-norm change between the last two refinements.
    pub error_estimate: f64,
}

fn rhs(k: &ConstantCoefficients, s: [f64; 2]) -> [f64; 2] {
    let [u, v] = s;
    let holling = u * v / (k.m1 + k.m2 * u + k.m3 * v);
    [
        k.a1 * u - k.b1 * u * u - k.c1 * holling,
        -k.a2 * v - k.b2 * v * v + k.c2 * holling,
    ]
}

fn rk4_step(k: &ConstantCoefficients, s: [f64; 2], h: f64) -> [f64; 2] {
    let axpy = |a: [f64; 2], b: [f64; 2], c: f64| [a[0] + c * b[0], a[1] + c * b[1]];
    let k1 = rhs(k, s);
    let k2 = rhs(k, axpy(s, k1, h / 2.0));
    let k3 = rhs(k, axpy(s, k2, h / 2.0));
    let k4 = rhs(k, axpy(s, k3, h));
    [
        s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn run(k: &ConstantCoefficients, init: PointState, horizon: f64, outputs: usize, substeps: usize) -> Vec<PointState> {
    let h = horizon / (outputs * substeps) as f64;
    let mut s = [init.u, init.v];
    let mut out = Vec::with_capacity(outputs + 1);
    out.push(init);
    for _ in 0..outputs {
        for _ in 0..substeps {
            s = rk4_step(k, s, h);
        }
        out.push(PointState { u: s[0], v: s[1] });
    }
    out
}

/// Integrates from `init` to `horizon`, reporting the state at `outputs + 1`
/// equally spaced times (including 0 and `horizon`).
pub fn integrate_ode(
    k: &ConstantCoefficients,
    init: PointState,
    horizon: f64,
    outputs: usize,
    tol: f64,
) -> Result<OdeSolution> {
    let coeffs = [k.a1, k.a2, k.b1, k.b2, k.c1, k.c2, k.m1, k.m2, k.m3];
    if coeffs.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::Domain("oracle coefficients must be positive".into()));
    }
    if !(init.u >= 0.0 && init.v >= 0.0) {
        return Err(Error::Domain("oracle initial state must be nonnegative".into()));
    }
    if !(horizon > 0.0) || outputs == 0 || !(tol > 0.0) {
        return Err(Error::Domain("oracle needs horizon > 0, outputs >= 1, tol > 0".into()));
    }
    let times = (0..=outputs).map(|i| horizon * i as f64 / outputs as f64).collect();
    let mut substeps = 1;
    let mut prev = run(k, init, horizon, outputs, substeps);
    for _ in 0..MAX_HALVINGS {
        substeps *= 2;
        let next = run(k, init, horizon, outputs, substeps);
        let diff = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a.u - b.u).abs().max((a.v - b.v).abs()))
            .fold(0.0, f64::max);
        if diff.is_finite() && diff < tol {
            return Ok(OdeSolution {
                times,
                states: next,
                substeps,
                error_estimate: diff,
            });
        }
        prev = next;
    }
    Err(Error::Oracle(format!(
        "no convergence to tol {tol:e} after {MAX_HALVINGS} step halvings"
    )))
}
