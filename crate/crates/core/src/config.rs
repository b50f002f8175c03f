//! Problem files.
//!
//! A problem is a TOML document:
//!
//! ```toml
//! schema = 1
//! T = 1.0
//!
//! [table]
//! kind = "interval"        # or "ball" (r, dim) or "star" (constant, harmonics)
//! a = 0.125
//!
//! [force]
//! constant = [2.0]         # or [[force.terms]] with coord, t_exp, x_exp, coef
//!
//! [tolerances]             # optional, every key optional
//! atol = 1e-10
//!
//! [solve]                  # optional defaults for the command of the same name
//! max_count = 2
//! ```
//!
//! Validation reports every problem it finds, each tagged with the path of
//! the offending key.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;
use toml::{Table, Value};

use crate::dynamics::{ForceField, ImpactLaw, Monomial, DEFAULT_BOUND_INFLATION};
use crate::geometry::{BilliardTable, RadialProfile, TrigPolynomial, DEFAULT_BOUNDARY_TOL};
use crate::integrator::{IntegratorOptions, Problem};
use crate::shooting::SolverOptions;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Schema(Vec<SchemaError>),
}

impl ConfigError {
    /// The schema errors, empty for I/O and syntax failures.
    pub fn schema_errors(&self) -> &[SchemaError] {
        match self {
            ConfigError::Schema(errs) => errs,
            _ => &[],
        }
    }
}

/// Defaults for the individual commands; command-line flags override them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandDefaults {
    pub shoot_v_min: Option<f64>,
    pub shoot_v_max: Option<f64>,
    pub shoot_grid: Option<usize>,
    pub solve_max_count: Option<usize>,
    pub solve_direction: Option<f64>,
    pub solve_v_min: Option<f64>,
    pub solve_v_max: Option<f64>,
    pub solve_grid: Option<usize>,
    pub attainable_d: Option<f64>,
    pub attainable_samples: Option<usize>,
    pub winding_d: Option<f64>,
    pub winding_samples: Option<usize>,
    pub sweep_d_grid: Option<Vec<f64>>,
    pub sweep_samples: Option<usize>,
    pub deviation_d: Option<f64>,
    pub deviation_dirs: Option<usize>,
}

/// A validated problem file.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub horizon: f64,
    pub table: BilliardTable,
    pub field: ForceField,
    pub integrator: IntegratorOptions,
    pub solver: SolverOptions,
    pub commands: CommandDefaults,
}

impl ProblemConfig {
    pub fn problem(&self) -> Problem {
        Problem {
            table: self.table.clone(),
            field: self.field.clone(),
            options: self.integrator,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ProblemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ProblemConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut r = Reader::default();
    let config = r.problem(&root);
    match config {
        Some(c) if r.errors.is_empty() => Ok(c),
        _ => Err(ConfigError::Schema(r.errors)),
    }
}

#[derive(Default)]
struct Reader {
    errors: Vec<SchemaError>,
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

impl Reader {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(SchemaError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn unknown_keys(&mut self, table: &Table, prefix: &str, known: &[&str]) {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                self.error(join(prefix, key), "unknown key");
            }
        }
    }

    fn as_float(&mut self, value: &Value, path: &str) -> Option<f64> {
        match value {
            Value::Float(x) if x.is_finite() => Some(*x),
            Value::Integer(n) => Some(*n as f64),
            _ => {
                self.error(path, "expected a finite number");
                None
            }
        }
    }

    fn as_count(&mut self, value: &Value, path: &str) -> Option<usize> {
        match value {
            Value::Integer(n) if *n >= 0 => Some(*n as usize),
            _ => {
                self.error(path, "expected a nonnegative integer");
                None
            }
        }
    }

    fn float(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        let path = join(prefix, key);
        t.get(key).and_then(|v| self.as_float(v, &path))
    }

    fn positive(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        let x = self.float(t, prefix, key)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.error(join(prefix, key), format!("must be positive, got {x}"));
            None
        }
    }

    fn nonnegative(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        let x = self.float(t, prefix, key)?;
        if x >= 0.0 {
            Some(x)
        } else {
            self.error(join(prefix, key), format!("must be nonnegative, got {x}"));
            None
        }
    }

    fn count(&mut self, t: &Table, prefix: &str, key: &str) -> Option<usize> {
        let path = join(prefix, key);
        t.get(key).and_then(|v| self.as_count(v, &path))
    }

    fn required<T>(&mut self, value: Option<T>, t: &Table, prefix: &str, key: &str) -> Option<T> {
        if value.is_none() && !t.contains_key(key) {
            self.error(join(prefix, key), "missing");
        }
        value
    }

    fn float_list(&mut self, t: &Table, prefix: &str, key: &str) -> Option<Vec<f64>> {
        let path = join(prefix, key);
        match t.get(key)? {
            Value::Array(items) => {
                let before = self.errors.len();
                let xs: Vec<f64> = items
                    .iter()
                    .enumerate()
                    .filter_map(|(i, v)| self.as_float(v, &format!("{path}[{i}]")))
                    .collect();
                (self.errors.len() == before).then_some(xs)
            }
            _ => {
                self.error(path, "expected an array of numbers");
                None
            }
        }
    }

    fn subtable<'a>(&mut self, root: &'a Table, key: &str) -> Option<&'a Table> {
        match root.get(key)? {
            Value::Table(t) => Some(t),
            _ => {
                self.error(key, "expected a table");
                None
            }
        }
    }

    fn problem(&mut self, root: &Table) -> Option<ProblemConfig> {
        self.unknown_keys(
            root,
            "",
            &[
                "schema",
                "T",
                "table",
                "force",
                "tolerances",
                "shoot",
                "solve",
                "attainable",
                "winding",
                "sweep",
                "deviation",
            ],
        );
        match root.get("schema") {
            Some(Value::Integer(SCHEMA_VERSION)) => {}
            Some(other) => self.error("schema", format!("unsupported schema version {other}")),
            None => self.error("schema", "missing"),
        }
        let horizon = self.positive(root, "", "T");
        let horizon = self.required(horizon, root, "", "T");

        let tolerances = self
            .subtable(root, "tolerances")
            .cloned()
            .unwrap_or_default();
        let tol = self.tolerances(&tolerances);

        let table = match self.subtable(root, "table") {
            Some(t) => self.table(t, tol.boundary_rel),
            None => {
                if !root.contains_key("table") {
                    self.error("table", "missing");
                }
                None
            }
        };
        let field = match (self.subtable(root, "force"), &table) {
            (Some(f), Some(tab)) => {
                self.force(f, tab.dim(), horizon.unwrap_or(1.0), tol.bound_inflation)
            }
            (Some(f), None) => {
                // still report errors inside the block
                if let Some(dim) = root.get("table").and_then(declared_dim) {
                    self.force(f, dim, horizon.unwrap_or(1.0), tol.bound_inflation);
                }
                None
            }
            (None, _) => {
                if !root.contains_key("force") {
                    self.error("force", "missing");
                }
                None
            }
        };
        let commands = self.commands(root);
        let (table, field, horizon) = (table?, field?, horizon?);
        Some(ProblemConfig {
            horizon,
            table,
            field,
            integrator: tol.integrator,
            solver: tol.solver,
            commands,
        })
    }

    fn tolerances(&mut self, t: &Table) -> Tolerances {
        const P: &str = "tolerances";
        self.unknown_keys(
            t,
            P,
            &[
                "atol",
                "rtol",
                "max_impacts",
                "max_steps",
                "event_samples",
                "boundary_rel",
                "graze_rel",
                "graze_abs",
                "bound_inflation",
                "tol_v",
                "tol_residual",
                "cells_per_decade",
                "distinct",
                "max_doublings",
                "max_levels",
            ],
        );
        let mut integrator = IntegratorOptions::default();
        let mut solver = SolverOptions::default();
        let mut law = ImpactLaw::default();
        let mut out = Tolerances {
            integrator,
            solver,
            boundary_rel: DEFAULT_BOUNDARY_TOL,
            bound_inflation: DEFAULT_BOUND_INFLATION,
        };
        if let Some(x) = self.positive(t, P, "atol") {
            integrator.atol = x;
        }
        if let Some(x) = self.positive(t, P, "rtol") {
            integrator.rtol = x;
        }
        if let Some(n) = self.count(t, P, "max_impacts") {
            integrator.max_impacts = n;
        }
        if let Some(n) = self.count(t, P, "max_steps") {
            integrator.max_steps = n;
        }
        if let Some(n) = self.count(t, P, "event_samples") {
            if n == 0 {
                self.error(join(P, "event_samples"), "must be at least 1");
            } else {
                integrator.event_samples = n;
            }
        }
        if let Some(x) = self.nonnegative(t, P, "graze_rel") {
            law.graze_rel = x;
        }
        if let Some(x) = self.nonnegative(t, P, "graze_abs") {
            law.graze_abs = x;
        }
        integrator.law = law;
        if let Some(x) = self.positive(t, P, "boundary_rel") {
            out.boundary_rel = x;
        }
        if let Some(x) = self.float(t, P, "bound_inflation") {
            if x >= 1.0 {
                out.bound_inflation = x;
            } else {
                self.error(
                    join(P, "bound_inflation"),
                    format!("must be at least 1, got {x}"),
                );
            }
        }
        if let Some(x) = self.positive(t, P, "tol_v") {
            solver.tol_v = x;
        }
        if let Some(x) = self.positive(t, P, "tol_residual") {
            solver.tol_residual = x;
        }
        if let Some(n) = self.count(t, P, "cells_per_decade") {
            solver.cells_per_decade = n.max(1);
        }
        if let Some(x) = self.positive(t, P, "distinct") {
            solver.distinct = x;
        }
        if let Some(n) = self.count(t, P, "max_doublings") {
            solver.max_doublings = n;
        }
        if let Some(n) = self.count(t, P, "max_levels") {
            solver.max_levels = n;
        }
        out.integrator = integrator;
        out.solver = solver;
        out
    }

    fn table(&mut self, t: &Table, boundary_rel: f64) -> Option<BilliardTable> {
        const P: &str = "table";
        let kind = match t.get("kind") {
            Some(Value::String(s)) => s.as_str(),
            Some(_) => {
                self.error("table.kind", "expected a string");
                return None;
            }
            None => {
                self.error("table.kind", "missing");
                return None;
            }
        };
        let built = match kind {
            "interval" => {
                self.unknown_keys(t, P, &["kind", "a"]);
                let a = self.positive(t, P, "a");
                let a = self.required(a, t, P, "a")?;
                BilliardTable::interval(a)
            }
            "ball" => {
                self.unknown_keys(t, P, &["kind", "r", "dim"]);
                let r = self.positive(t, P, "r");
                let r = self.required(r, t, P, "r");
                let dim = self.count(t, P, "dim");
                let dim = self.required(dim, t, P, "dim")?;
                if !(1..=2).contains(&dim) {
                    self.error("table.dim", format!("must be 1 or 2, got {dim}"));
                    return None;
                }
                BilliardTable::ball(r?, dim)
            }
            "star" => {
                self.unknown_keys(t, P, &["kind", "constant", "harmonics"]);
                let c = self.positive(t, P, "constant");
                let c = self.required(c, t, P, "constant");
                let harmonics = self.harmonics(t)?;
                BilliardTable::star_shaped(RadialProfile::Trig(TrigPolynomial::new(c?, harmonics)))
            }
            other => {
                self.error(
                    "table.kind",
                    format!("expected interval, ball or star, got {other:?}"),
                );
                return None;
            }
        };
        match built {
            Ok(table) => Some(table.with_boundary_tolerance(boundary_rel)),
            Err(e) => {
                self.error(P, e.to_string());
                None
            }
        }
    }

    fn harmonics(&mut self, t: &Table) -> Option<Vec<(u32, f64, f64)>> {
        let items = match t.get("harmonics") {
            None => return Some(Vec::new()),
            Some(Value::Array(items)) => items,
            Some(_) => {
                self.error(
                    "table.harmonics",
                    "expected an array of [k, cos, sin] triples",
                );
                return None;
            }
        };
        let before = self.errors.len();
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let path = format!("table.harmonics[{i}]");
            match item.as_array().map(|a| a.as_slice()) {
                Some([k, c, s]) => {
                    let k = match k {
                        Value::Integer(k) if *k >= 1 && *k <= i64::from(u32::MAX) => {
                            Some(*k as u32)
                        }
                        _ => {
                            self.error(format!("{path}[0]"), "harmonic must be a positive integer");
                            None
                        }
                    };
                    let c = self.as_float(c, &format!("{path}[1]"));
                    let s = self.as_float(s, &format!("{path}[2]"));
                    if let (Some(k), Some(c), Some(s)) = (k, c, s) {
                        out.push((k, c, s));
                    }
                }
                _ => self.error(path, "expected [k, cos, sin]"),
            }
        }
        (self.errors.len() == before).then_some(out)
    }

    fn force(&mut self, t: &Table, dim: usize, horizon: f64, inflation: f64) -> Option<ForceField> {
        const P: &str = "force";
        self.unknown_keys(t, P, &["constant", "terms"]);
        let built = match (t.get("constant"), t.get("terms")) {
            (Some(_), Some(_)) => {
                self.error(P, "give either constant or terms, not both");
                return None;
            }
            (None, None) => {
                self.error(P, "needs constant or terms");
                return None;
            }
            (Some(_), None) => {
                let values = self.float_list(t, P, "constant")?;
                if values.len() != dim {
                    self.error(
                        "force.constant",
                        format!("expected {dim} components, got {}", values.len()),
                    );
                    return None;
                }
                ForceField::constant(&values, horizon)
            }
            (None, Some(terms)) => {
                let terms = self.terms(terms, dim)?;
                ForceField::polynomial(terms, dim, horizon)
            }
        };
        match built {
            Ok(field) => Some(field.with_bound_inflation(inflation)),
            Err(e) => {
                self.error(P, e.to_string());
                None
            }
        }
    }

    fn terms(&mut self, value: &Value, dim: usize) -> Option<Vec<Monomial>> {
        let Value::Array(items) = value else {
            self.error("force.terms", "expected an array of tables");
            return None;
        };
        let before = self.errors.len();
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let prefix = format!("force.terms[{i}]");
            let Value::Table(term) = item else {
                self.error(prefix, "expected a table");
                continue;
            };
            self.unknown_keys(term, &prefix, &["coord", "t_exp", "x_exp", "coef"]);
            let coord = self.count(term, &prefix, "coord");
            let coord = self.required(coord, term, &prefix, "coord");
            if let Some(c) = coord {
                if c >= dim {
                    self.error(join(&prefix, "coord"), format!("must be below {dim}"));
                }
            }
            let t_exp = self.count(term, &prefix, "t_exp").unwrap_or(0);
            let x_exp: Vec<u32> = match term.get("x_exp") {
                None => vec![0; dim],
                Some(Value::Array(es)) if es.len() == dim => es
                    .iter()
                    .enumerate()
                    .filter_map(|(j, e)| {
                        self.as_count(e, &format!("{prefix}.x_exp[{j}]"))
                            .map(|n| n as u32)
                    })
                    .collect(),
                Some(_) => {
                    self.error(join(&prefix, "x_exp"), format!("expected {dim} exponents"));
                    Vec::new()
                }
            };
            let coef = self.float(term, &prefix, "coef");
            let coef = self.required(coef, term, &prefix, "coef");
            if let (Some(c), Some(coef)) = (coord, coef) {
                if x_exp.len() == dim {
                    out.push(Monomial::new(c, t_exp as u32, &x_exp, coef));
                }
            }
        }
        (self.errors.len() == before).then_some(out)
    }

    fn commands(&mut self, root: &Table) -> CommandDefaults {
        let mut c = CommandDefaults::default();
        let empty = Table::new();
        let shoot = self.subtable(root, "shoot").unwrap_or(&empty);
        self.unknown_keys(shoot, "shoot", &["v_min", "v_max", "grid"]);
        c.shoot_v_min = self.nonnegative(shoot, "shoot", "v_min");
        c.shoot_v_max = self.positive(shoot, "shoot", "v_max");
        c.shoot_grid = self.count(shoot, "shoot", "grid");

        let solve = self.subtable(root, "solve").unwrap_or(&empty);
        self.unknown_keys(
            solve,
            "solve",
            &["max_count", "direction", "v_min", "v_max", "grid"],
        );
        c.solve_max_count = self.count(solve, "solve", "max_count");
        c.solve_direction = self.float(solve, "solve", "direction");
        if c.solve_direction == Some(0.0) {
            self.error("solve.direction", "must be nonzero");
        }
        c.solve_v_min = self.nonnegative(solve, "solve", "v_min");
        c.solve_v_max = self.positive(solve, "solve", "v_max");
        c.solve_grid = self.count(solve, "solve", "grid");

        let att = self.subtable(root, "attainable").unwrap_or(&empty);
        self.unknown_keys(att, "attainable", &["d", "samples"]);
        c.attainable_d = self.nonnegative(att, "attainable", "d");
        c.attainable_samples = self.count(att, "attainable", "samples");

        let wind = self.subtable(root, "winding").unwrap_or(&empty);
        self.unknown_keys(wind, "winding", &["d", "samples"]);
        c.winding_d = self.nonnegative(wind, "winding", "d");
        c.winding_samples = self.count(wind, "winding", "samples");

        let sweep = self.subtable(root, "sweep").unwrap_or(&empty);
        self.unknown_keys(sweep, "sweep", &["d_grid", "samples"]);
        c.sweep_d_grid = self.float_list(sweep, "sweep", "d_grid");
        c.sweep_samples = self.count(sweep, "sweep", "samples");

        let dev = self.subtable(root, "deviation").unwrap_or(&empty);
        self.unknown_keys(dev, "deviation", &["d", "dirs"]);
        c.deviation_d = self.positive(dev, "deviation", "d");
        c.deviation_dirs = self.count(dev, "deviation", "dirs");
        c
    }
}

/// Dimension a table block asks for, even when the block is invalid.
fn declared_dim(table: &Value) -> Option<usize> {
    match table.get("kind")?.as_str()? {
        "interval" => Some(1),
        "star" => Some(2),
        "ball" => match table.get("dim")?.as_integer()? {
            d @ 1..=2 => Some(d as usize),
            _ => None,
        },
        _ => None,
    }
}

struct Tolerances {
    integrator: IntegratorOptions,
    solver: SolverOptions,
    boundary_rel: f64,
    bound_inflation: f64,
}
