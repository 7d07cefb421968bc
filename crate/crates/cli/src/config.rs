//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! case = hartmann
//! degree = 4
//! cutoff = none
//! ```
//!
//! The `case` key selects the initial field and the default parameters; every
//! other key overrides one of them.

use std::path::PathBuf;
use std::str::FromStr;

use lsreinit::harness::{CaseParams, TestCase};
use lsreinit::regularization::RegularizationConfig;
use lsreinit::timeint::{Integrator, Scheme, TimeConfig};
use lsreinit::{Error, Result};

/// Spatial operator selection of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Ldg,
    FiniteVolume,
    Regularized,
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ldg" => Ok(SchemeKind::Ldg),
            "fv" => Ok(SchemeKind::FiniteVolume),
            "regularized" => Ok(SchemeKind::Regularized),
            _ => Err(Error::Config(format!(
                "scheme: expected one of ldg, fv, regularized, got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: TestCase,
    /// Mesh file replacing the case's structured mesh.
    pub mesh: Option<PathBuf>,
    pub cells: usize,
    pub degree: usize,
    pub eps: f64,
    pub cfl: f64,
    pub integrator: Integrator,
    pub cutoff: Option<f64>,
    pub scheme: SchemeKind,
    pub s_low: f64,
    pub s_up: f64,
    /// Trailing modes inspected by the indicator besides the highest.
    pub modes: usize,
    pub tolerance: f64,
    pub stall_limit: usize,
    pub max_iterations: usize,
    pub degree_scaling: bool,
    pub output: PathBuf,
    /// Snapshot cadence in iterations; 0 writes only the final state.
    pub output_every: usize,
}

pub const KEYS: &[&str] = &[
    "case",
    "mesh",
    "cells",
    "degree",
    "eps",
    "cfl",
    "integrator",
    "cutoff",
    "scheme",
    "s_low",
    "s_up",
    "n",
    "tolerance",
    "stall",
    "max_iterations",
    "degree_scaling",
    "output",
    "output_every",
];

const MAX_DEGREE: usize = 12;

impl RunConfig {
    /// Defaults of `case`.
    pub fn for_case(case: TestCase) -> Self {
        let p = case.defaults();
        let (scheme, ind) = match p.regularization {
            Some(rc) => (SchemeKind::Regularized, rc),
            None => (SchemeKind::Ldg, RegularizationConfig { s_low: -6.5, s_up: -5.5, modes: 2 }),
        };
        Self {
            case,
            mesh: None,
            cells: p.cells,
            degree: p.degree,
            eps: p.eps,
            cfl: p.cfl,
            integrator: p.integrator,
            cutoff: p.cutoff,
            scheme,
            s_low: ind.s_low,
            s_up: ind.s_up,
            modes: ind.modes,
            tolerance: p.tolerance,
            stall_limit: p.stall_limit,
            max_iterations: p.max_iterations,
            degree_scaling: p.degree_scaling,
            output: PathBuf::from("output"),
            output_every: 0,
        }
    }

    /// Builds a configuration from ordered pairs; later pairs win. `case` is
    /// required and is resolved first so other keys override its defaults.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        for (k, _) in pairs {
            if !KEYS.contains(&k.as_ref()) {
                return Err(Error::Config(format!("unknown key '{}'", k.as_ref())));
            }
        }
        let case_value = pairs
            .iter()
            .rev()
            .find(|(k, _)| k.as_ref() == "case")
            .map(|(_, v)| v.as_ref())
            .ok_or_else(|| Error::Config("missing required key 'case'".into()))?;
        let case: TestCase = case_value
            .parse()
            .map_err(|_| Error::Config(format!("case: unknown test case '{case_value}'")))?;
        let mut cfg = Self::for_case(case);
        for (k, v) in pairs {
            cfg.set(k.as_ref(), v.as_ref().trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "case" => {}
            "mesh" => self.mesh = Some(PathBuf::from(value)),
            "cells" => self.cells = parse(key, value)?,
            "degree" => self.degree = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "cfl" => self.cfl = parse(key, value)?,
            "integrator" => {
                self.integrator = match value {
                    "euler" => Integrator::Euler,
                    "rk3" => Integrator::Rk3,
                    _ => return Err(Error::Config(format!("integrator: expected euler or rk3, got '{value}'"))),
                }
            }
            "cutoff" => {
                self.cutoff = match value {
                    "none" => None,
                    _ => Some(parse(key, value)?),
                }
            }
            "scheme" => self.scheme = value.parse()?,
            "s_low" => self.s_low = parse(key, value)?,
            "s_up" => self.s_up = parse(key, value)?,
            "n" => self.modes = parse(key, value)?,
            "tolerance" => self.tolerance = parse(key, value)?,
            "stall" => self.stall_limit = parse(key, value)?,
            "max_iterations" => self.max_iterations = parse(key, value)?,
            "degree_scaling" => self.degree_scaling = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "output_every" => self.output_every = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, constraint: &str| Err(Error::Config(format!("{key}: must satisfy {constraint}")));
        if self.cells == 0 {
            return fail("cells", "cells >= 1");
        }
        if self.degree > MAX_DEGREE {
            return fail("degree", &format!("degree <= {MAX_DEGREE}"));
        }
        if !(self.eps > 0.0) {
            return fail("eps", "eps > 0");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return fail("cfl", "0 < cfl <= 1");
        }
        if let Some(c) = self.cutoff {
            if !(c > 0.0) {
                return fail("cutoff", "cutoff > 0");
            }
        }
        if !(self.tolerance > 0.0) {
            return fail("tolerance", "tolerance > 0");
        }
        if self.stall_limit == 0 {
            return fail("stall", "stall >= 1");
        }
        if self.max_iterations == 0 {
            return fail("max_iterations", "max_iterations >= 1");
        }
        if self.scheme == SchemeKind::Regularized {
            if !(self.s_low < self.s_up) {
                return fail("s_low", "s_low < s_up");
            }
            if !(1..=2).contains(&self.modes) {
                return fail("n", "n in {1, 2}");
            }
            if self.modes > self.degree {
                return fail("n", "n <= degree");
            }
        }
        if self.scheme != SchemeKind::FiniteVolume && self.degree == 0 {
            return fail("degree", "degree >= 1 unless scheme = fv");
        }
        Ok(())
    }

    pub fn time_config(&self) -> TimeConfig {
        TimeConfig {
            cfl: self.cfl,
            integrator: self.integrator,
            tolerance: self.tolerance,
            stall_limit: self.stall_limit,
            max_iterations: self.max_iterations,
            degree_scaling: self.degree_scaling,
        }
    }

    pub fn indicator(&self) -> RegularizationConfig {
        RegularizationConfig {
            s_low: self.s_low,
            s_up: self.s_up,
            modes: self.modes,
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.scheme {
            SchemeKind::Ldg => Scheme::Ldg,
            SchemeKind::FiniteVolume => Scheme::FiniteVolume,
            SchemeKind::Regularized => Scheme::Regularized(self.indicator()),
        }
    }

    pub fn case_params(&self) -> CaseParams {
        CaseParams {
            degree: self.degree,
            cells: self.cells,
            eps: self.eps,
            cfl: self.cfl,
            cutoff: self.cutoff,
            regularization: (self.scheme == SchemeKind::Regularized).then(|| self.indicator()),
            integrator: self.integrator,
            tolerance: self.tolerance,
            stall_limit: self.stall_limit,
            max_iterations: self.max_iterations,
            degree_scaling: self.degree_scaling,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Config(format!(
            "{key}: cannot parse '{value}' as {}",
            std::any::type_name::<T>()
        ))
    })
}

/// Splits configuration text into ordered `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if pairs.iter().any(|(p, _)| p == k) {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::from_pairs(&parse_pairs(text)?)
}
