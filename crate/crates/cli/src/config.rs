//! Flat `key = value` experiment configs.
//!
//! Lines are `key = value`; `#` starts a comment. Keys are namespaced with
//! dots. Overrides from the command line replace file values. Unknown keys
//! are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use polyheat::{Bundle, Connection, Field, GridQuadrature, Manifold, Partition, Potential, StepKernelConfig, Variant};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Io(String),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key:?}: {msg}")]
    Value { key: String, msg: String },
    #[error("missing key {0:?}")]
    Missing(String),
    #[error(transparent)]
    Model(#[from] polyheat::Error),
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

pub const KEYS: &[&str] = &[
    "experiment",
    "manifold.kind",
    "manifold.radius",
    "manifold.periods",
    "bundle.rank",
    "bundle.field",
    "bundle.connection",
    "bundle.form",
    "potential.name",
    "potential.value",
    "potential.shift",
    "time",
    "partition.kind",
    "partition.r",
    "partition.ladder",
    "partition.steps",
    "partition.last",
    "variant",
    "variants",
    "quadrature.order",
    "grid.n",
    "mc.paths",
    "mc.seed",
    "kernel.sources",
    "converge.mode",
    "converge.u",
    "propagate.mode",
    "propagate.u",
    "propagate.x0",
    "propagate.times",
    "hsu.offset",
    "lemma.m",
    "lemma.form",
    "lemma.f",
    "lemma.t_min",
    "lemma.t_max",
    "lemma.count",
    "holonomy.loop",
    "accept.rel_error",
    "accept.monotone",
    "accept.pairwise",
    "accept.oracle",
    "accept.violation",
    "accept.sigmas",
    "accept.stderr",
    "accept.ratio",
    "accept.slope",
    "accept.tolerance",
    "out",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> ConfigResult<()> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides<'a>(&mut self, items: impl IntoIterator<Item = &'a str>) -> ConfigResult<()> {
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| ConfigError::Io(format!("override {item:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn require(&self, key: &str) -> ConfigResult<&str> {
        self.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str, v: &str) -> ConfigResult<T>
    where
        T::Err: std::fmt::Display,
    {
        v.parse().map_err(|e: T::Err| ConfigError::Value {
            key: key.to_string(),
            msg: format!("{v:?}: {e}"),
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> ConfigResult<f64> {
        self.get(key).map_or(Ok(default), |v| self.parse_value(key, v))
    }

    pub fn f64_req(&self, key: &str) -> ConfigResult<f64> {
        self.parse_value(key, self.require(key)?)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> ConfigResult<usize> {
        self.get(key).map_or(Ok(default), |v| self.parse_value(key, v))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> ConfigResult<u64> {
        self.get(key).map_or(Ok(default), |v| self.parse_value(key, v))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> ConfigResult<bool> {
        self.get(key).map_or(Ok(default), |v| self.parse_value(key, v))
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> ConfigResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| self.parse_value(key, s))
            .collect::<ConfigResult<Vec<T>>>()
            .map(Some)
    }

    fn bad(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    pub fn manifold(&self) -> ConfigResult<Manifold> {
        let kind = self.require("manifold.kind")?;
        Ok(match kind {
            "circle" => Manifold::circle(self.f64_or("manifold.radius", 1.0)?)?,
            "sphere" => Manifold::sphere(self.f64_or("manifold.radius", 1.0)?)?,
            "torus" => {
                let periods: Vec<f64> = self.list("manifold.periods")?.unwrap_or_else(|| vec![1.0, 1.0]);
                Manifold::torus(&periods)?
            }
            other => return Err(self.bad("manifold.kind", format!("unknown manifold {other:?}"))),
        })
    }

    pub fn potential(&self) -> ConfigResult<Potential> {
        let p = Potential::by_name(
            self.str_or("potential.name", "zero"),
            self.f64_or("potential.value", 0.0)?,
        )?;
        Ok(p.with_shift(self.f64_or("potential.shift", 0.0)?))
    }

    pub fn bundle(&self) -> ConfigResult<Bundle> {
        let m = self.manifold()?;
        let potential = self.potential()?;
        let rank = self.usize_or("bundle.rank", potential.required_rank().unwrap_or(1))?;
        let form: Vec<f64> = self.list("bundle.form")?.unwrap_or_else(|| vec![0.0]);
        let connection = match self.str_or("bundle.connection", "trivial") {
            "trivial" => Connection::Trivial,
            "rotation" => Connection::rotation_form(&form, rank)?,
            "phase" => Connection::phase_form(&form, rank)?,
            "levi-civita" => Connection::LeviCivita,
            other => return Err(self.bad("bundle.connection", format!("unknown connection {other:?}"))),
        };
        let default_field = if self.get("bundle.connection") == Some("phase") {
            "complex"
        } else {
            "real"
        };
        let field = match self.str_or("bundle.field", default_field) {
            "real" => Field::Real,
            "complex" => Field::Complex,
            other => return Err(self.bad("bundle.field", format!("unknown field {other:?}"))),
        };
        Ok(Bundle::new(m, rank, field, connection, potential)?)
    }

    pub fn variant(&self) -> ConfigResult<Variant> {
        Ok(Variant::parse(self.str_or("variant", "v"))?)
    }

    pub fn variants(&self) -> ConfigResult<Vec<Variant>> {
        match self.get("variants") {
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Variant::parse(s).map_err(ConfigError::from))
                .collect(),
            None => Ok(vec![self.variant()?]),
        }
    }

    pub fn step_config(&self, variant: Variant) -> ConfigResult<StepKernelConfig> {
        let cfg = StepKernelConfig::new(self.bundle()?, variant);
        match self.get("quadrature.order") {
            Some(_) => Ok(cfg.with_quadrature_order(self.usize_or("quadrature.order", 4)?)?),
            None => Ok(cfg),
        }
    }

    pub fn time(&self) -> ConfigResult<f64> {
        let t = self.f64_req("time")?;
        if !(t > 0.0) {
            return Err(self.bad("time", "must be positive"));
        }
        Ok(t)
    }

    pub fn grid(&self, m: &Manifold) -> ConfigResult<GridQuadrature> {
        let default = match m {
            Manifold::Circle { .. } => 256,
            Manifold::Torus { .. } => 64,
            Manifold::Sphere { .. } => 4096,
        };
        Ok(m.make_grid(self.usize_or("grid.n", default)?)?)
    }

    /// The partition for step count `r`.
    pub fn partition_for(&self, r: usize) -> ConfigResult<Partition> {
        let t = self.time()?;
        Ok(match self.str_or("partition.kind", "uniform") {
            "uniform" => Partition::uniform(t, r)?,
            "remark" => Partition::with_last_step(t, self.f64_req("partition.last")?, r)?,
            "list" => {
                let steps: Vec<f64> = self
                    .list("partition.steps")?
                    .ok_or_else(|| ConfigError::Missing("partition.steps".into()))?;
                Partition::new(steps)?
            }
            other => return Err(self.bad("partition.kind", format!("unknown partition kind {other:?}"))),
        })
    }

    /// Step counts of the ladder, or the single `partition.r`.
    pub fn ladder(&self) -> ConfigResult<Vec<usize>> {
        if self.str_or("partition.kind", "uniform") == "list" {
            return Ok(vec![0]);
        }
        let ladder = match self.list::<usize>("partition.ladder")? {
            Some(l) => l,
            None => vec![self.usize_or("partition.r", 1)?],
        };
        if ladder.is_empty() || ladder.contains(&0) {
            return Err(self.bad("partition.ladder", "step counts must be positive"));
        }
        Ok(ladder)
    }
}
