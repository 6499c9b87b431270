//! JSON run configuration. Syntax errors carry line and column; every other
//! problem names the offending field, e.g. `observation.sigma`.

use std::collections::BTreeSet;
use std::path::Path;

use movingwave_core::expr::Expr;
use movingwave_core::geometry::{auto_t0, BoundaryCurve, MovingDomain};
use movingwave_core::grid::GridSpec;
use movingwave_core::hum::{DEFAULT_CG_TOL, DEFAULT_MAX_ITER};
use movingwave_core::wavesolver::CoefficientSet;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainConfig {
    pub n: usize,
    pub lower: Vec<String>,
    pub upper: Vec<String>,
    pub tau_minus: f64,
    pub tau_plus: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum T0 {
    #[serde(serialize_with = "auto_str")]
    Auto,
    Value(f64),
}

fn auto_str<S: serde::Serializer>(s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str("auto")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationConfig {
    pub x0: Vec<f64>,
    pub t0: T0,
    pub delta: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientConfig {
    pub xt: String,
    pub xx: Vec<String>,
    pub q: String,
    pub v: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridConfig {
    pub nx: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Values of `a`; empty means `a_floor * {1, 2, 4, 8}`.
    pub a_sweep: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Sine modes in random initial data.
    pub modes: usize,
    pub cg_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub domain: DomainConfig,
    pub observation: ObservationConfig,
    pub coefficients: CoefficientConfig,
    pub grid: GridConfig,
    pub run: RunConfig,
}

/// Field reader over one JSON object that remembers which keys were used.
struct Block<'a> {
    path: String,
    map: &'a Map<String, Value>,
    used: BTreeSet<&'static str>,
}

impl<'a> Block<'a> {
    fn root(value: &'a Value) -> Result<Self> {
        match value {
            Value::Object(map) => Ok(Self {
                path: String::new(),
                map,
                used: BTreeSet::new(),
            }),
            _ => Err(CliError::validation("config", "top level must be an object")),
        }
    }

    fn field(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn require(&mut self, key: &'static str) -> Result<&'a Value> {
        let field = self.field(key);
        self.get(key).ok_or_else(|| CliError::validation(field, "is required"))
    }

    fn block(&mut self, key: &'static str) -> Result<Block<'a>> {
        let field = self.field(key);
        match self.require(key)? {
            Value::Object(map) => Ok(Block {
                path: field,
                map,
                used: BTreeSet::new(),
            }),
            _ => Err(CliError::validation(field, "must be an object")),
        }
    }

    fn optional_block(&mut self, key: &'static str) -> Result<Option<Block<'a>>> {
        if self.get(key).is_none() {
            return Ok(None);
        }
        self.block(key).map(Some)
    }

    fn as_number(&self, key: &str, v: &Value) -> Result<f64> {
        v.as_f64()
            .ok_or_else(|| CliError::validation(self.field(key), "must be a number"))
    }

    fn number(&mut self, key: &'static str) -> Result<f64> {
        let v = self.require(key)?;
        self.as_number(key, v)
    }

    fn number_or(&mut self, key: &'static str, default: f64) -> Result<f64> {
        match self.get(key) {
            Some(v) => self.as_number(key, v),
            None => Ok(default),
        }
    }

    fn count(&mut self, key: &'static str, default: Option<u64>) -> Result<u64> {
        let v = match (self.get(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) => return Ok(d),
            (None, None) => return Err(CliError::validation(self.field(key), "is required")),
        };
        v.as_u64()
            .ok_or_else(|| CliError::validation(self.field(key), "must be a nonnegative integer"))
    }

    fn string_of(&self, key: &str, v: &Value) -> Result<String> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(CliError::validation(self.field(key), "must be an expression string")),
        }
    }

    fn string_or(&mut self, key: &'static str, default: &str) -> Result<String> {
        match self.get(key) {
            Some(v) => self.string_of(key, v),
            None => Ok(default.to_string()),
        }
    }

    fn list(&mut self, key: &'static str) -> Result<Option<&'a Vec<Value>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => Ok(Some(items)),
            Some(_) => Err(CliError::validation(self.field(key), "must be a list")),
        }
    }

    fn strings(&mut self, key: &'static str) -> Result<Option<Vec<String>>> {
        let Some(items) = self.list(key)? else {
            return Ok(None);
        };
        items
            .iter()
            .enumerate()
            .map(|(i, v)| self.string_of(&format!("{key}[{i}]"), v))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn numbers(&mut self, key: &'static str) -> Result<Option<Vec<f64>>> {
        let Some(items) = self.list(key)? else {
            return Ok(None);
        };
        items
            .iter()
            .enumerate()
            .map(|(i, v)| self.as_number(&format!("{key}[{i}]"), v))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if !self.used.contains(key.as_str()) {
                return Err(CliError::validation(self.field(key), "unknown field"));
            }
        }
        Ok(())
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&src, &path.display().to_string())
    }

    /// Parses and validates; `origin` labels syntax errors.
    pub fn parse(src: &str, origin: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(src).map_err(|e| CliError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: {
                let text = e.to_string();
                match text.rfind(" at line ") {
                    Some(i) => text[..i].to_string(),
                    None => text,
                }
            },
        })?;
        let mut root = Block::root(&value)?;

        let mut b = root.block("domain")?;
        let n = b.count("n", None)? as usize;
        if !(1..=3).contains(&n) {
            return Err(CliError::validation("domain.n", format!("must be 1, 2 or 3, got {n}")));
        }
        let lower = b.strings("lower")?.ok_or_else(|| CliError::validation("domain.lower", "is required"))?;
        let upper = b.strings("upper")?.ok_or_else(|| CliError::validation("domain.upper", "is required"))?;
        for (key, list) in [("domain.lower", &lower), ("domain.upper", &upper)] {
            if list.len() != n {
                return Err(CliError::validation(key, format!("needs {n} expressions, got {}", list.len())));
            }
        }
        let domain = DomainConfig {
            n,
            lower,
            upper,
            tau_minus: b.number("tau_minus")?,
            tau_plus: b.number("tau_plus")?,
            margin: b.number_or("margin", movingwave_core::geometry::DEFAULT_MARGIN)?,
        };
        b.finish()?;

        let mut b = root.block("observation")?;
        let x0 = b.numbers("x0")?.ok_or_else(|| CliError::validation("observation.x0", "is required"))?;
        if x0.len() != n {
            return Err(CliError::validation("observation.x0", format!("needs {n} coordinates, got {}", x0.len())));
        }
        let t0 = match b.require("t0")? {
            Value::String(s) if s == "auto" => T0::Auto,
            Value::Number(v) => T0::Value(v.as_f64().unwrap_or(f64::NAN)),
            _ => return Err(CliError::validation("observation.t0", "must be a number or \"auto\"")),
        };
        let observation = ObservationConfig {
            x0,
            t0,
            delta: b.number("delta")?,
            sigma: b.number("sigma")?,
        };
        b.finish()?;

        let coefficients = match root.optional_block("coefficients")? {
            Some(mut b) => {
                let c = CoefficientConfig {
                    xt: b.string_or("xt", "0")?,
                    xx: b.strings("xx")?.unwrap_or_else(|| vec!["0".into(); n]),
                    q: b.string_or("q", "0")?,
                    v: b.string_or("v", "0")?,
                };
                b.finish()?;
                c
            }
            None => CoefficientConfig {
                xt: "0".into(),
                xx: vec!["0".into(); n],
                q: "0".into(),
                v: "0".into(),
            },
        };

        let mut b = root.block("grid")?;
        let grid = GridConfig {
            nx: b.count("nx", None)? as usize,
            nt: b.count("nt", None)? as usize,
        };
        b.finish()?;

        let run = match root.optional_block("run")? {
            Some(mut b) => {
                let r = RunConfig {
                    a_sweep: b.numbers("a_sweep")?.unwrap_or_default(),
                    trials: b.count("trials", Some(20))? as usize,
                    seed: b.count("seed", Some(1))?,
                    modes: b.count("modes", Some(6))? as usize,
                    cg_tol: b.number_or("cg_tol", DEFAULT_CG_TOL)?,
                    max_iter: b.count("max_iter", Some(DEFAULT_MAX_ITER as u64))? as usize,
                };
                b.finish()?;
                r
            }
            None => RunConfig {
                a_sweep: Vec::new(),
                trials: 20,
                seed: 1,
                modes: 6,
                cg_tol: DEFAULT_CG_TOL,
                max_iter: DEFAULT_MAX_ITER,
            },
        };
        root.finish()?;

        let config = Config {
            domain,
            observation,
            coefficients,
            grid,
            run,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let n = self.domain.n;
        self.build_domain()?;
        self.build_coefficients()?;
        self.grid_spec()?;
        let o = &self.observation;
        if !(o.delta > 0.0 && o.delta < 1.0) {
            return Err(CliError::validation("observation.delta", format!("must lie in (0, 1), got {}", o.delta)));
        }
        if !(o.sigma >= 0.0 && o.sigma.is_finite()) {
            return Err(CliError::validation("observation.sigma", format!("must be nonnegative, got {}", o.sigma)));
        }
        if let T0::Value(t0) = o.t0 {
            if !t0.is_finite() {
                return Err(CliError::validation("observation.t0", "must be finite"));
            }
        }
        self.t0()?;
        for (i, a) in self.run.a_sweep.iter().enumerate() {
            if !(*a >= (n * n) as f64) {
                return Err(CliError::validation(
                    format!("run.a_sweep[{i}]"),
                    format!("a = {a} is below n^2 = {}", n * n),
                ));
            }
        }
        if !(self.run.cg_tol > 0.0) {
            return Err(CliError::validation("run.cg_tol", "must be positive"));
        }
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.domain.tau_minus, self.domain.tau_plus)
    }

    pub fn build_domain(&self) -> Result<MovingDomain> {
        let d = &self.domain;
        let curves = |key: &str, list: &[String]| -> Result<Vec<BoundaryCurve>> {
            list.iter()
                .enumerate()
                .map(|(i, s)| {
                    BoundaryCurve::parse(s).map_err(|e| CliError::validation(format!("domain.{key}[{i}]"), e.to_string()))
                })
                .collect()
        };
        let lower = curves("lower", &d.lower)?;
        let upper = curves("upper", &d.upper)?;
        MovingDomain::new(lower, upper, self.window(), d.margin, 200)
            .map_err(|e| CliError::validation("domain", e.to_string()))
    }

    pub fn build_coefficients(&self) -> Result<CoefficientSet> {
        let c = &self.coefficients;
        let n = self.domain.n;
        if c.xx.len() != n {
            return Err(CliError::validation(
                "coefficients.xx",
                format!("needs {n} expressions, got {}", c.xx.len()),
            ));
        }
        let parse = |key: String, s: &str| Expr::parse(s, n).map_err(|e| CliError::validation(key, e.to_string()));
        Ok(CoefficientSet {
            xt: parse("coefficients.xt".into(), &c.xt)?,
            xx: c
                .xx
                .iter()
                .enumerate()
                .map(|(i, s)| parse(format!("coefficients.xx[{i}]"), s))
                .collect::<Result<Vec<_>>>()?,
            q: parse("coefficients.q".into(), &c.q)?,
            v: parse("coefficients.v".into(), &c.v)?,
        })
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.nx, self.grid.nt).map_err(|e| CliError::validation("grid", e.to_string()))
    }

    /// `t0`, resolving "auto" to the middle of the admissible interval.
    pub fn t0(&self) -> Result<f64> {
        match self.observation.t0 {
            T0::Value(t0) => Ok(t0),
            T0::Auto => auto_t0(&self.build_domain()?, &self.observation.x0, self.window()).ok_or_else(|| {
                CliError::validation("observation.t0", "\"auto\" found no admissible t0: the window is too short")
            }),
        }
    }
}
