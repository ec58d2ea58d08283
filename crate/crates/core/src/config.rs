//! Experiment configuration: INI-style `key = value` text in sections.
//!
//! ```ini
//! [model]
//! a1 = 4
//! a2 = affine 0.1 0.05        # 0.1 + 0.05 x
//! c2 = bump 4 1 0.5 0.2       # base, amplitude, center, half-width
//! d1 = 0.1
//!
//! [noise]
//! family = geometric
//! prey_variance = 0.05
//! predator_variance = 0.05
//! ratio = 0.5
//! modes = 8
//!
//! [initial]
//! u = 0.5
//! v = constant 0.5
//!
//! [solver]
//! dt = 1e-3
//! horizon = 50
//!
//! [ensemble]
//! size = 200
//! seed = 42
//! ```
//!
//! `#` and `;` start comments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Coefficient, CoefficientSet, StatePair};
use crate::noise::{NoiseSpec, NoiseStream};
use crate::solver::{PositivityPolicy, Scheme, SolverConfig};
use crate::spectral::{Grid, ScalarField};

/// A field on `[0, 1]` from a small named family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    /// `a + b x`
    Affine { a: f64, b: f64 },
    /// `base + amp (1 + cos(π (x - center) / width)) / 2` inside
    /// `|x - center| < width`, `base` outside.
    CosineBump { base: f64, amp: f64, center: f64, width: f64 },
}

impl FieldSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FieldSpec::Constant(c) => c,
            FieldSpec::Affine { a, b } => a + b * x,
            FieldSpec::CosineBump { base, amp, center, width } => {
                let r = (x - center) / width;
                if r.abs() < 1.0 {
                    base + amp * 0.5 * (1.0 + (PI * r).cos())
                } else {
                    base
                }
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> ScalarField {
        grid.sample(|x| self.eval(x))
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FieldSpec::Constant(c) => write!(f, "{c:?}"),
            FieldSpec::Affine { a, b } => write!(f, "affine {a:?} {b:?}"),
            FieldSpec::CosineBump { base, amp, center, width } => {
                write!(f, "bump {base:?} {amp:?} {center:?} {width:?}")
            }
        }
    }
}

impl FromStr for FieldSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let nums = |w: &[&str], n: usize| -> std::result::Result<Vec<f64>, String> {
            if w.len() != n {
                return Err(format!("expected {n} numbers, found {}", w.len()));
            }
            w.iter().map(|x| parse_real(x)).collect()
        };
        match words.split_first() {
            None => Err("empty field definition".into()),
            Some((&"constant", rest)) => Ok(FieldSpec::Constant(nums(rest, 1)?[0])),
            Some((&"affine", rest)) => {
                let v = nums(rest, 2)?;
                Ok(FieldSpec::Affine { a: v[0], b: v[1] })
            }
            Some((&"bump", rest)) => {
                let v = nums(rest, 4)?;
                if !(v[3] > 0.0) {
                    return Err("bump width must be positive".into());
                }
                Ok(FieldSpec::CosineBump {
                    base: v[0],
                    amp: v[1],
                    center: v[2],
                    width: v[3],
                })
            }
            Some(_) if words.len() == 1 => Ok(FieldSpec::Constant(parse_real(words[0])?)),
            Some((w, _)) => Err(format!("unknown field family '{w}' (constant, affine, bump)")),
        }
    }
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseFamily {
    Zero,
    /// Spatially constant mode only.
    Single { prey: f64, predator: f64 },
    /// `λ_k = variance · ratio^k` for `k < modes`.
    Geometric { prey: f64, predator: f64, ratio: f64, modes: usize },
    Explicit { prey: Vec<f64>, predator: Vec<f64> },
}

impl NoiseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::Zero => "zero",
            NoiseFamily::Single { .. } => "single",
            NoiseFamily::Geometric { .. } => "geometric",
            NoiseFamily::Explicit { .. } => "explicit",
        }
    }

    pub fn spec(&self) -> Result<NoiseSpec> {
        match self {
            NoiseFamily::Zero => Ok(NoiseSpec::zero()),
            NoiseFamily::Single { prey, predator } => NoiseSpec::single_mode(*prey, *predator),
            NoiseFamily::Geometric { prey, predator, ratio, modes } => {
                NoiseSpec::geometric(*prey, *predator, *ratio, *modes)
            }
            NoiseFamily::Explicit { prey, predator } => NoiseSpec::new(prey.clone(), predator.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Indexed in [`Coefficient::ALL`] order.
    pub coefficients: [FieldSpec; 9],
    pub d1: f64,
    pub d2: f64,
    pub noise: NoiseFamily,
    pub initial_u: FieldSpec,
    pub initial_v: FieldSpec,
    pub dt: f64,
    pub horizon: f64,
    pub record_stride: usize,
    pub truncation_radius: Option<f64>,
    pub positivity: PositivityPolicy,
    pub scheme: Scheme,
    pub grid_size: usize,
    pub ensemble_size: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

const DEFAULT_GRID: usize = 64;
const DEFAULT_NOISE_MODES: usize = 16;
const DEFAULT_ENSEMBLE: usize = 200;
const DEFAULT_RECORD_INTERVAL: f64 = 0.1;

const SECTIONS: [(&str, &[&str]); 5] = [
    ("model", &["a1", "a2", "b1", "b2", "c1", "c2", "m1", "m2", "m3", "d1", "d2"]),
    (
        "noise",
        &[
            "family",
            "prey_variance",
            "predator_variance",
            "ratio",
            "modes",
            "prey_eigenvalues",
            "predator_eigenvalues",
        ],
    ),
    ("initial", &["u", "v"]),
    (
        "solver",
        &[
            "dt",
            "horizon",
            "record_stride",
            "truncation_radius",
            "positivity",
            "reject_tolerance",
            "scheme",
            "grid_size",
        ],
    ),
    ("ensemble", &["size", "seed", "output"]),
];

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

/// Raw `section.key -> value` map with line numbers.
struct Raw(BTreeMap<String, Entry>);

impl Raw {
    fn parse(text: &str) -> Result<Raw> {
        let mut map = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                match SECTIONS.iter().find(|(s, _)| *s == name) {
                    Some((s, _)) => section = Some(s),
                    None => return Err(Error::config(Some(line), name, "unknown section")),
                }
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::config(Some(line), content, "expected 'key = value'"))?;
            let key = key.trim();
            let sec = section.ok_or_else(|| Error::config(Some(line), key, "key outside of any section"))?;
            let allowed = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(Error::config(Some(line), format!("{sec}.{key}"), "unknown key"));
            }
            let full = format!("{sec}.{key}");
            if let Some(prev) = map.get(&full) {
                let prev: &Entry = prev;
                return Err(Error::config(
                    Some(line),
                    full,
                    format!("duplicate key (first set on line {})", prev.line),
                ));
            }
            map.insert(
                full,
                Entry {
                    line,
                    value: value.trim().to_string(),
                    used: false,
                },
            );
        }
        Ok(Raw(map))
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.0.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn get<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<(usize, T)>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse(&v)
                .map(|x| Some((line, x)))
                .map_err(|m| Error::config(Some(line), key, m)),
        }
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<(usize, T)> {
        self.get(key, parse)?
            .ok_or_else(|| Error::config(None, key, "missing required field"))
    }

    /// Rejects keys that were present but meaningless for the chosen options.
    fn finish(self) -> Result<()> {
        match self.0.into_iter().find(|(_, e)| !e.used) {
            Some((k, e)) => Err(Error::config(Some(e.line), k, "not applicable with the chosen options")),
            None => Ok(()),
        }
    }
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("'{s}' is not a nonnegative integer"))
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(parse_real)
        .collect()
}

fn format_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut raw = Raw::parse(text)?;
    let mut coeff_lines = [0usize; 9];
    let mut coefficients = [FieldSpec::Constant(0.0); 9];
    for (i, c) in Coefficient::ALL.into_iter().enumerate() {
        let (line, spec) = raw.required(&format!("model.{}", c.name()), FieldSpec::from_str)?;
        coeff_lines[i] = line;
        coefficients[i] = spec;
    }
    let (d1_line, d1) = raw.required("model.d1", parse_real)?;
    let (d2_line, d2) = raw.required("model.d2", parse_real)?;

    let family = raw.get("noise.family", |s| Ok(s.to_string()))?;
    let noise_line = family.as_ref().map(|f| f.0);
    let noise = match family.as_ref().map(|f| f.1.as_str()).unwrap_or("zero") {
        "zero" => NoiseFamily::Zero,
        "single" => NoiseFamily::Single {
            prey: raw.required("noise.prey_variance", parse_real)?.1,
            predator: raw.required("noise.predator_variance", parse_real)?.1,
        },
        "geometric" => NoiseFamily::Geometric {
            prey: raw.required("noise.prey_variance", parse_real)?.1,
            predator: raw.required("noise.predator_variance", parse_real)?.1,
            ratio: raw.required("noise.ratio", parse_real)?.1,
            modes: raw.get("noise.modes", parse_usize)?.map_or(DEFAULT_NOISE_MODES, |m| m.1),
        },
        "explicit" => NoiseFamily::Explicit {
            prey: raw.required("noise.prey_eigenvalues", parse_list)?.1,
            predator: raw.required("noise.predator_eigenvalues", parse_list)?.1,
        },
        other => {
            return Err(Error::config(
                noise_line,
                "noise.family",
                format!("unknown family '{other}' (zero, single, geometric, explicit)"),
            ))
        }
    };

    let (u_line, initial_u) = raw.required("initial.u", FieldSpec::from_str)?;
    let (v_line, initial_v) = raw.required("initial.v", FieldSpec::from_str)?;

    let (dt_line, dt) = raw.required("solver.dt", parse_real)?;
    let (_, horizon) = raw.required("solver.horizon", parse_real)?;
    let stride = raw.get("solver.record_stride", parse_usize)?;
    let stride_line = stride.as_ref().map(|s| s.0);
    let record_stride = match stride {
        Some((_, s)) => s,
        None if dt > 0.0 => {
            let s = (DEFAULT_RECORD_INTERVAL / dt).round().max(1.0);
            let cap = (horizon / dt).floor().max(1.0);
            s.min(cap) as usize
        }
        None => 1,
    };
    let truncation_radius = raw
        .get("solver.truncation_radius", |s| if s == "none" { Ok(None) } else { parse_real(s).map(Some) })?
        .and_then(|x| x.1);
    let positivity = match raw.get("solver.positivity", |s| Ok(s.to_string()))? {
        None => PositivityPolicy::Clip,
        Some((_, p)) if p == "clip" => PositivityPolicy::Clip,
        Some((_, p)) if p == "reject" => PositivityPolicy::Reject {
            tolerance: raw
                .get("solver.reject_tolerance", parse_real)?
                .map(|x| x.1)
                .unwrap_or(PositivityPolicy::DEFAULT_REJECT_TOLERANCE),
        },
        Some((line, p)) => {
            return Err(Error::config(
                Some(line),
                "solver.positivity",
                format!("unknown policy '{p}' (clip, reject)"),
            ))
        }
    };
    let scheme = raw
        .get("solver.scheme", |s| {
            Scheme::from_name(s).ok_or_else(|| format!("unknown scheme '{s}' (exp-heun, exp-euler)"))
        })?
        .map(|x| x.1)
        .unwrap_or_default();
    let grid = raw.get("solver.grid_size", parse_usize)?;
    let grid_line = grid.as_ref().map(|g| g.0);
    let grid_size = grid.map(|g| g.1).unwrap_or(DEFAULT_GRID);

    let ensemble_size = raw.get("ensemble.size", parse_usize)?.map(|x| x.1).unwrap_or(DEFAULT_ENSEMBLE);
    let seed = raw
        .get("ensemble.seed", |s| s.parse::<u64>().map_err(|_| format!("'{s}' is not a u64 seed")))?
        .map(|x| x.1)
        .unwrap_or(0);
    let output = raw.get("ensemble.output", |s| Ok(PathBuf::from(s)))?.map(|x| x.1);
    raw.finish()?;

    let cfg = ExperimentConfig {
        coefficients,
        d1,
        d2,
        noise,
        initial_u,
        initial_v,
        dt,
        horizon,
        record_stride,
        truncation_radius,
        positivity,
        scheme,
        grid_size,
        ensemble_size,
        seed,
        output,
    };

    // Semantic validation, attributed to the most relevant line.
    if cfg.ensemble_size == 0 {
        return Err(Error::config(None, "ensemble.size", "must be at least 1"));
    }
    let grid = Grid::new(cfg.grid_size).map_err(|e| Error::config(grid_line, "solver.grid_size", e.to_string()))?;
    for (i, c) in Coefficient::ALL.into_iter().enumerate() {
        let f = cfg.coefficients[i].sample(&grid);
        if let Some(x) = f.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::config(
                Some(coeff_lines[i]),
                format!("model.{}", c.name()),
                format!("coefficient must be positive (found {x} on the grid)"),
            ));
        }
    }
    for (line, key, d) in [(d1_line, "model.d1", d1), (d2_line, "model.d2", d2)] {
        if !(d > 0.0) {
            return Err(Error::config(Some(line), key, "diffusivity must be positive"));
        }
    }
    for (line, key, spec) in [(u_line, "initial.u", cfg.initial_u), (v_line, "initial.v", cfg.initial_v)] {
        if let Some(x) = spec.sample(&grid).iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::config(Some(line), key, format!("initial density must be nonnegative (found {x})")));
        }
    }
    let spec = cfg
        .noise
        .spec()
        .map_err(|e| Error::config(noise_line, "noise", e.to_string()))?;
    NoiseStream::new(0, 0, std::sync::Arc::new(spec))
        .check_resolution(cfg.grid_size)
        .map_err(|e| Error::config(noise_line, "noise", e.to_string()))?;
    cfg.solver_config()?
        .validate()
        .map_err(|e| Error::config(stride_line.or(Some(dt_line)), "solver", e.to_string()))?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_config(&text)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid_size)
    }

    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        let grid = self.grid()?;
        CoefficientSet::new(self.coefficients.map(|f| f.sample(&grid)), self.d1, self.d2)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        self.noise.spec()
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig {
            dt: self.dt,
            horizon: self.horizon,
            record_stride: self.record_stride,
            truncation_radius: self.truncation_radius,
            positivity: self.positivity,
            scheme: self.scheme,
            grid_size: self.grid_size,
            noise: self.noise_spec()?,
        })
    }

    pub fn initial_state(&self) -> Result<StatePair> {
        let grid = self.grid()?;
        Ok(StatePair::new(self.initial_u.sample(&grid), self.initial_v.sample(&grid)))
    }

    /// `(section.key, value)` pairs in canonical order; [`Self::to_ini`]
    /// and the CSV metadata block are both built from this.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        for (c, f) in Coefficient::ALL.iter().zip(&self.coefficients) {
            push(&format!("model.{}", c.name()), f.to_string());
        }
        push("model.d1", format!("{:?}", self.d1));
        push("model.d2", format!("{:?}", self.d2));
        push("noise.family", self.noise.name().to_string());
        match &self.noise {
            NoiseFamily::Zero => {}
            NoiseFamily::Single { prey, predator } => {
                push("noise.prey_variance", format!("{prey:?}"));
                push("noise.predator_variance", format!("{predator:?}"));
            }
            NoiseFamily::Geometric { prey, predator, ratio, modes } => {
                push("noise.prey_variance", format!("{prey:?}"));
                push("noise.predator_variance", format!("{predator:?}"));
                push("noise.ratio", format!("{ratio:?}"));
                push("noise.modes", modes.to_string());
            }
            NoiseFamily::Explicit { prey, predator } => {
                push("noise.prey_eigenvalues", format_list(prey));
                push("noise.predator_eigenvalues", format_list(predator));
            }
        }
        push("initial.u", self.initial_u.to_string());
        push("initial.v", self.initial_v.to_string());
        push("solver.dt", format!("{:?}", self.dt));
        push("solver.horizon", format!("{:?}", self.horizon));
        push("solver.record_stride", self.record_stride.to_string());
        push(
            "solver.truncation_radius",
            self.truncation_radius.map_or("none".into(), |r| format!("{r:?}")),
        );
        match self.positivity {
            PositivityPolicy::Clip => push("solver.positivity", "clip".into()),
            PositivityPolicy::Reject { tolerance } => {
                push("solver.positivity", "reject".into());
                push("solver.reject_tolerance", format!("{tolerance:?}"));
            }
        }
        push("solver.scheme", self.scheme.name().into());
        push("solver.grid_size", self.grid_size.to_string());
        push("ensemble.size", self.ensemble_size.to_string());
        push("ensemble.seed", self.seed.to_string());
        if let Some(p) = &self.output {
            push("ensemble.output", p.display().to_string());
        }
        out
    }

    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let mut current = "";
        for (k, v) in self.entries() {
            let (sec, key) = k.split_once('.').expect("qualified key");
            if sec != current {
                if !current.is_empty() {
                    s.push('\n');
                }
                let _ = writeln!(s, "[{sec}]");
                current = SECTIONS.iter().find(|(n, _)| *n == sec).map(|(n, _)| *n).unwrap_or("");
            }
            let _ = writeln!(s, "{key} = {v}");
        }
        s
    }
}
