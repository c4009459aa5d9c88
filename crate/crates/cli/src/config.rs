//! Scenario files: `key = value` lines grouped under `[section]` headers, addressed as
//! `section.key`. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;

use langevin_core::coefficients::{builtin_family, Family};
use langevin_core::parametrix_solver::ParametrixConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Raw `section.key -> value` table.
pub fn parse_table(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (no, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(line, format!("line {}: unterminated section header", no + 1)))?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(ConfigError::new(name, format!("line {}: bad section name", no + 1)));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(line, format!("line {}: expected `key = value`", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::new("", format!("line {}: empty key", no + 1)));
        }
        let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        let v = unquote(v.trim());
        if out.insert(key.clone(), v).is_some() {
            return Err(ConfigError::new(key, "duplicate key"));
        }
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> String {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v).to_string()
}

const KEYS: &[&str] = &[
    "name",
    "seed",
    "time.s",
    "time.t",
    "path.dt",
    "pole.x",
    "pole.v",
    "grid.x_min",
    "grid.x_max",
    "grid.v_min",
    "grid.v_max",
    "grid.nx",
    "grid.nv",
    "parametrix.order",
    "parametrix.alpha",
    "parametrix.time_nodes",
    "parametrix.space_order",
    "parametrix.inner_time_nodes",
    "parametrix.inner_space_order",
    "checks.normalization",
    "checks.normalization_tol",
    "checks.quadrature_order",
    "mc.n_paths",
    "bounds.n",
    "bounds.m",
    "bounds.radius",
    "bounds.h_min",
    "bounds.refine",
    "bounds.tolerance",
    "control.x",
    "control.v",
    "control.n_targets",
    "control.radius",
    "flow.n_paths",
    "flow.eps",
    "flow.n",
    "flow.radius",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x: (f64, f64),
    pub v: (f64, f64),
    pub nx: usize,
    pub nv: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<[f64; 2]> {
        let lin =
            |(a, b): (f64, f64), n: usize, i: usize| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
        let mut out = Vec::with_capacity(self.nx * self.nv);
        for i in 0..self.nx {
            for j in 0..self.nv {
                out.push([lin(self.x, self.nx, i), lin(self.v, self.nv, j)]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checks {
    pub normalization: bool,
    pub normalization_tol: f64,
    pub quadrature_order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsSpec {
    pub n: usize,
    pub m: usize,
    pub radius: f64,
    pub h_min: f64,
    pub refine: bool,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSpec {
    pub target: [f64; 2],
    pub n_targets: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub n_paths: usize,
    pub eps: Option<f64>,
    pub n: usize,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub family_name: String,
    pub family: Family,
    pub s: f64,
    pub t: f64,
    pub dt: f64,
    pub pole: [f64; 2],
    pub grid: Grid,
    pub parametrix: ParametrixConfig,
    pub checks: Checks,
    pub mc_paths: usize,
    pub bounds: BoundsSpec,
    pub control: ControlSpec,
    pub flow: FlowSpec,
}

struct Reader<'a> {
    table: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.table.get(key).map(String::as_str)
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(ConfigError::new(key, format!("expected a finite number, got `{v}`"))),
            },
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => {
                v.parse().map_err(|_| ConfigError::new(key, format!("expected a non-negative integer, got `{v}`")))
            }
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::new(key, format!("expected an unsigned integer, got `{v}`"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(ConfigError::new(key, format!("expected true or false, got `{v}`"))),
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
        let table = parse_table(text)?;
        let mut family_params = BTreeMap::new();
        for (k, v) in &table {
            if let Some(p) = k.strip_prefix("family.") {
                if p != "name" {
                    let x = v
                        .parse::<f64>()
                        .map_err(|_| ConfigError::new(k.clone(), format!("expected a number, got `{v}`")))?;
                    family_params.insert(p.to_string(), x);
                }
            } else if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::new(k.clone(), "unknown key"));
            }
        }
        let r = Reader { table: &table };
        let family_name = r.raw("family.name").ok_or_else(|| ConfigError::new("family.name", "missing"))?.to_string();
        let family = builtin_family(&family_name, &family_params).map_err(|e| match e {
            langevin_core::Error::InvalidParameter { name, reason } => {
                ConfigError::new(format!("family.{name}"), reason)
            }
            other => ConfigError::new("family.name", other.to_string()),
        })?;

        let s = r.f64("time.s", 0.0)?;
        let t = r.f64("time.t", 1.0)?;
        if !(s < t) {
            return Err(ConfigError::new("time.t", "need time.s < time.t"));
        }
        let dt = r.f64("path.dt", 1e-3)?;
        let steps = (t - s) / dt;
        if !(dt > 0.0) || (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(ConfigError::new("path.dt", "must be positive and divide time.t - time.s"));
        }

        let grid = Grid {
            x: (r.f64("grid.x_min", -2.0)?, r.f64("grid.x_max", 2.0)?),
            v: (r.f64("grid.v_min", -2.0)?, r.f64("grid.v_max", 2.0)?),
            nx: r.usize("grid.nx", 21)?,
            nv: r.usize("grid.nv", 21)?,
        };
        if grid.nx == 0 {
            return Err(ConfigError::new("grid.nx", "grid must be nonempty"));
        }
        if grid.nv == 0 {
            return Err(ConfigError::new("grid.nv", "grid must be nonempty"));
        }

        let d = ParametrixConfig::default();
        let parametrix = ParametrixConfig {
            order: r.usize("parametrix.order", d.order)?,
            alpha: r.f64(
                "parametrix.alpha",
                match family {
                    Family::Kolmogorov(k) => k.alpha(),
                    Family::Spde(_) => d.alpha,
                },
            )?,
            time_nodes: r.usize("parametrix.time_nodes", d.time_nodes)?,
            space_order: r.usize("parametrix.space_order", d.space_order)?,
            inner_time_nodes: r.usize("parametrix.inner_time_nodes", d.inner_time_nodes)?,
            inner_space_order: r.usize("parametrix.inner_space_order", d.inner_space_order)?,
            ..d
        };
        parametrix.validate().map_err(|e| match e {
            langevin_core::Error::InvalidParameter { name, reason } => ConfigError::new(name, reason),
            other => ConfigError::new("parametrix", other.to_string()),
        })?;

        let mc_paths = r.usize("mc.n_paths", 100_000)?;
        if mc_paths < 2 {
            return Err(ConfigError::new("mc.n_paths", "need at least two paths"));
        }
        let bounds = BoundsSpec {
            n: r.usize("bounds.n", 9)?,
            m: r.usize("bounds.m", 5)?,
            radius: r.f64("bounds.radius", 3.0)?,
            h_min: r.f64("bounds.h_min", 0.2)?,
            refine: r.bool("bounds.refine", true)?,
            tolerance: r.f64("bounds.tolerance", 0.1)?,
        };
        if bounds.n == 0 || bounds.m == 0 {
            return Err(ConfigError::new("bounds.n", "grid must be nonempty"));
        }
        if !(bounds.h_min > 0.0 && bounds.h_min <= 1.0) {
            return Err(ConfigError::new("bounds.h_min", "must lie in (0, 1]"));
        }
        let flow = FlowSpec {
            n_paths: r.usize("flow.n_paths", 200)?,
            eps: match r.raw("flow.eps") {
                None => None,
                Some(_) => Some(r.f64("flow.eps", 0.25)?),
            },
            n: r.usize("flow.n", 5)?,
            radius: r.f64("flow.radius", 2.0)?,
        };
        Ok(Scenario {
            name: r.raw("name").unwrap_or("scenario").to_string(),
            seed: r.u64("seed", 0)?,
            family_name,
            family,
            s,
            t,
            dt,
            pole: [r.f64("pole.x", 0.0)?, r.f64("pole.v", 0.0)?],
            grid,
            parametrix,
            checks: Checks {
                normalization: r.bool("checks.normalization", false)?,
                normalization_tol: r.f64("checks.normalization_tol", 5e-3)?,
                quadrature_order: r.usize("checks.quadrature_order", 8)?,
            },
            mc_paths,
            bounds,
            control: ControlSpec {
                target: [r.f64("control.x", 1.0)?, r.f64("control.v", 0.0)?],
                n_targets: r.usize("control.n_targets", 50)?,
                radius: r.f64("control.radius", 2.0)?,
            },
            flow,
        })
    }
}
