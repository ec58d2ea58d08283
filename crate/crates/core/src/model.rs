//! Coefficient fields and the Beddington-DeAngelis reaction terms
//!
//! ```text
//! F1(u, v) = u (a1 - b1 u) - c1 u v / (m1 + m2 u + m3 v)
//! F2(u, v) = v (-a2 - b2 v) + c2 u v / (m1 + m2 u + m3 v)
//! ```
//!
//! together with the radially truncated variant `F_n`, which evaluates the
//! reaction at `n (u, v) / |(u, v)|` whenever `|(u, v)| > n`.

use std::fmt;

use crate::error::{Error, Result, Species};
use crate::spectral::ScalarField;

/// Names of the nine spatial coefficient fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coefficient {
    A1,
    A2,
    B1,
    B2,
    C1,
    C2,
    M1,
    M2,
    M3,
}

impl Coefficient {
    pub const ALL: [Coefficient; 9] = [
        Coefficient::A1,
        Coefficient::A2,
        Coefficient::B1,
        Coefficient::B2,
        Coefficient::C1,
        Coefficient::C2,
        Coefficient::M1,
        Coefficient::M2,
        Coefficient::M3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Coefficient::A1 => "a1",
            Coefficient::A2 => "a2",
            Coefficient::B1 => "b1",
            Coefficient::B2 => "b2",
            Coefficient::C1 => "c1",
            Coefficient::C2 => "c2",
            Coefficient::M1 => "m1",
            Coefficient::M2 => "m2",
            Coefficient::M3 => "m3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Spatially constant parameter set; also the input of the ODE oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub d1: f64,
    pub d2: f64,
}

impl ConstantCoefficients {
    pub fn get(&self, c: Coefficient) -> f64 {
        match c {
            Coefficient::A1 => self.a1,
            Coefficient::A2 => self.a2,
            Coefficient::B1 => self.b1,
            Coefficient::B2 => self.b2,
            Coefficient::C1 => self.c1,
            Coefficient::C2 => self.c2,
            Coefficient::M1 => self.m1,
            Coefficient::M2 => self.m2,
            Coefficient::M3 => self.m3,
        }
    }

    pub fn reaction(&self, u: f64, v: f64) -> (f64, f64) {
        reaction_point(
            [self.a1, self.a2, self.b1, self.b2, self.c1, self.c2, self.m1, self.m2, self.m3],
            u,
            v,
        )
    }
}

/// Pointwise `(F1, F2)` for coefficients ordered as [`Coefficient::ALL`].
#[inline]
pub fn reaction_point(k: [f64; 9], u: f64, v: f64) -> (f64, f64) {
    let [a1, a2, b1, b2, c1, c2, m1, m2, m3] = k;
    let uv = u * v;
    let den = m1 + m2 * u + m3 * v;
    (u * (a1 - b1 * u) - c1 * uv / den, v * (-a2 - b2 * v) + c2 * uv / den)
}

/// Radial projection onto the closed ball of radius `radius`.
#[inline]
pub fn truncate_point(radius: Option<f64>, u: f64, v: f64) -> (f64, f64) {
    match radius {
        Some(n) => {
            let r = u.hypot(v);
            if r > n {
                let s = n / r;
                (u * s, v * s)
            } else {
                (u, v)
            }
        }
        None => (u, v),
    }
}

/// Positive coefficient fields `a_i, b_i, c_i, m_i` on the grid plus the
/// diffusivities `d_1, d_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    fields: [ScalarField; 9],
    d1: f64,
    d2: f64,
}

impl CoefficientSet {
    /// `fields` is ordered as [`Coefficient::ALL`].
    pub fn new(fields: [ScalarField; 9], d1: f64, d2: f64) -> Result<Self> {
        let len = fields[0].len();
        for (c, f) in Coefficient::ALL.iter().zip(&fields) {
            if f.len() != len {
                return Err(Error::Dimension {
                    expected: len,
                    found: f.len(),
                });
            }
            if let Some((i, v)) = f.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "coefficient {c} must be positive, got {v} at grid index {i}"
                )));
            }
        }
        for (name, d) in [("d1", d1), ("d2", d2)] {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Domain(format!("diffusivity {name} must be positive, got {d}")));
            }
        }
        Ok(CoefficientSet { fields, d1, d2 })
    }

    /// Broadcasts constants over a grid of `len` points.
    pub fn constant(len: usize, k: &ConstantCoefficients) -> Result<Self> {
        let fields = Coefficient::ALL.map(|c| ScalarField::from_vec(vec![k.get(c); len]));
        Self::new(fields, k.d1, k.d2)
    }

    pub fn len(&self) -> usize {
        self.fields[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn field(&self, c: Coefficient) -> &ScalarField {
        &self.fields[c.index()]
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }

    pub fn d2(&self) -> f64 {
        self.d2
    }

    pub fn diffusivity(&self, species: Species) -> f64 {
        match species {
            Species::Prey => self.d1,
            Species::Predator => self.d2,
        }
    }

    /// Coefficient values at grid index `i`, ordered as [`Coefficient::ALL`].
    #[inline]
    pub fn at(&self, i: usize) -> [f64; 9] {
        std::array::from_fn(|c| self.fields[c][i])
    }

    /// Pointwise reaction with no sign checks; `radius` enables truncation.
    #[inline]
    pub fn reaction_at(&self, i: usize, radius: Option<f64>, u: f64, v: f64) -> (f64, f64) {
        let (u, v) = truncate_point(radius, u, v);
        reaction_point(self.at(i), u, v)
    }

    /// The constant values, if every field is spatially constant.
    pub fn as_constant(&self) -> Option<ConstantCoefficients> {
        let mut vals = [0.0; 9];
        for (slot, f) in vals.iter_mut().zip(&self.fields) {
            let first = f[0];
            if f.iter().any(|&x| x != first) {
                return None;
            }
            *slot = first;
        }
        let [a1, a2, b1, b2, c1, c2, m1, m2, m3] = vals;
        Some(ConstantCoefficients {
            a1,
            a2,
            b1,
            b2,
            c1,
            c2,
            m1,
            m2,
            m3,
            d1: self.d1,
            d2: self.d2,
        })
    }
}

/// The population pair `Z = (U, V)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatePair {
    pub u: ScalarField,
    pub v: ScalarField,
}

impl StatePair {
    pub fn new(u: ScalarField, v: ScalarField) -> Self {
        StatePair { u, v }
    }

    pub fn get(&self, species: Species) -> &ScalarField {
        match species {
            Species::Prey => &self.u,
            Species::Predator => &self.v,
        }
    }

    pub fn get_mut(&mut self, species: Species) -> &mut ScalarField {
        match species {
            Species::Prey => &mut self.u,
            Species::Predator => &mut self.v,
        }
    }

    fn check(&self, coeffs: &CoefficientSet) -> Result<()> {
        for species in Species::BOTH {
            let f = self.get(species);
            if f.len() != coeffs.len() {
                return Err(Error::Dimension {
                    expected: coeffs.len(),
                    found: f.len(),
                });
            }
            if let Some((index, &value)) = f.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(Error::NegativeState { species, index, value });
            }
        }
        Ok(())
    }
}

/// `(F1(Z), F2(Z))` as grid fields.
pub fn eval_reaction(coeffs: &CoefficientSet, state: &StatePair) -> Result<StatePair> {
    evaluate(coeffs, state, None)
}

/// `(F_{n,1}(Z), F_{n,2}(Z))`: the reaction evaluated after projecting each
/// point `(u(x), v(x))` onto the ball of radius `radius`.
pub fn eval_truncated_reaction(radius: f64, coeffs: &CoefficientSet, state: &StatePair) -> Result<StatePair> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("truncation radius must be positive, got {radius}")));
    }
    evaluate(coeffs, state, Some(radius))
}

fn evaluate(coeffs: &CoefficientSet, state: &StatePair, radius: Option<f64>) -> Result<StatePair> {
    state.check(coeffs)?;
    let (f1, f2): (Vec<f64>, Vec<f64>) = (0..coeffs.len())
        .map(|i| coeffs.reaction_at(i, radius, state.u[i], state.v[i]))
        .unzip();
    Ok(StatePair::new(f1.into(), f2.into()))
}
