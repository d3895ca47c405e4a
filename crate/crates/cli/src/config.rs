//! Run configuration: one JSON document, merged over defaults, with dotted
//! `key=value` overrides applied before validation.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use weakkam_core::model::{KineticForm, LagrangianModel, Potential, TabulatedLagrangian, UniformAxis};
use weakkam_core::semigroup::{default_vmax, ActionKernel, Direction, QuadratureRule};
use weakkam_core::symmetry::{GeneratorSpec, SymmetryGroup};
use weakkam_core::{GridFunction, PeriodicGrid};

/// A configuration problem, tied to the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Cosine {
        #[serde(default)]
        axis: usize,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        period: Option<f64>,
    },
    /// Grid samples in the `x0,...,value` layout written by the solver, on the
    /// run grid unless `dims` is given.
    Tabulated {
        path: PathBuf,
        #[serde(default)]
        dims: Option<Vec<usize>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    /// `½ vᵀ A v − U(x) − P·v`; `kinetic` is `A`, identity when absent.
    Mechanical {
        #[serde(default)]
        kinetic: Option<Vec<Vec<f64>>>,
        potential: PotentialSpec,
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
    /// One-dimensional `L(x, v)` from a CSV with columns `x,v,value`, sorted by
    /// `x` then `v`, on uniform axes.
    Tabulated {
        path: PathBuf,
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub lengths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Direction for `solve`.
    pub direction: Direction,
    /// Gap threshold for the Mather set.
    pub mather_tol: f64,
    /// Random seeds per direction in the invariance harness.
    pub harness_seeds: usize,
    /// Calibrated orbit length written by `solve` (backward only).
    pub orbit_steps: usize,
    /// Sample count of the reference curve written by `pendulum-demo`.
    pub reference_points: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            direction: Direction::Backward,
            mather_tol: 1e-6,
            harness_seeds: 20,
            orbit_steps: 200,
            reference_points: 513,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub dt: f64,
    /// Velocity cap; the model-dependent default when absent.
    pub vmax: Option<f64>,
    pub rule: QuadratureRule,
    pub tol: f64,
    pub max_iter: usize,
    pub symmetry: Vec<GeneratorSpec>,
    pub seed: u64,
    /// Amplitude of the random seed function; zero gives a constant seed.
    pub seed_amplitude: f64,
    pub options: Options,
    pub output_dir: PathBuf,
}

fn unit() -> f64 {
    1.0
}

impl Default for RunConfig {
    /// The pendulum `L = v²/2 − cos θ` on a 256-point circle.
    fn default() -> Self {
        Self {
            model: ModelSpec::Mechanical {
                kinetic: None,
                potential: PotentialSpec::Cosine {
                    axis: 0,
                    amplitude: 1.0,
                    period: None,
                },
                shift: None,
            },
            grid: GridSpec {
                dims: vec![256],
                lengths: vec![std::f64::consts::TAU],
            },
            dt: 0.05,
            vmax: Some(4.0),
            rule: QuadratureRule::Endpoint,
            tol: 1e-10,
            max_iter: 1_000_000,
            symmetry: vec![GeneratorSpec::Reflection { axis: 0 }],
            seed: 0,
            seed_amplitude: 0.0,
            options: Options::default(),
            output_dir: PathBuf::from("weakkam-out"),
        }
    }
}

/// Overlays `patch` onto `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Applies `key.path=value`; the value is parsed as JSON, or taken as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new(assignment, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::new(assignment, "empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = doc;
    for part in key.split('.') {
        slot = match slot {
            Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
            Value::Array(items) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| ConfigError::new(key, format!("`{part}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| ConfigError::new(key, format!("index {i} out of range (length {len})")))?
            }
            Value::Null => {
                *slot = Value::Object(Default::default());
                match slot {
                    Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
                    _ => unreachable!(),
                }
            }
            _ => return Err(ConfigError::new(key, format!("cannot descend into `{part}`"))),
        };
    }
    *slot = value;
    Ok(())
}

/// Field path of a serde error message such as "unknown field `x`".
fn field_of(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    msg.split('`').nth(1).unwrap_or("config").to_string()
}

impl RunConfig {
    /// Defaults, overlaid with the file (if any), then the overrides, then validated.
    /// Relative paths are resolved against the config file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        let mut base_dir = PathBuf::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::new("--config", format!("{}: {e}", p.display())))?;
            let file: Value = serde_json::from_str(&text)
                .map_err(|e| ConfigError::new("--config", format!("{}: {e}", p.display())))?;
            if !file.is_object() {
                return Err(ConfigError::new("--config", "top level must be a JSON object"));
            }
            // A model given in the file replaces the default model wholesale.
            if let (Some(model), Value::Object(d)) = (file.get("model").cloned(), &mut doc) {
                d.insert("model".into(), model);
            }
            merge(&mut doc, file);
            base_dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| ConfigError::new(field_of(&e), e.to_string()))?;
        cfg.resolve_paths(&base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.model {
            ModelSpec::Mechanical {
                potential: PotentialSpec::Tabulated { path, .. },
                ..
            } => fix(path),
            ModelSpec::Tabulated { path, .. } => fix(path),
            _ => {}
        }
        fix(&mut self.output_dir);
    }

    /// Checks every numeric field before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("tol", self.tol)?;
        if let Some(v) = self.vmax {
            positive("vmax", v)?;
        }
        if self.max_iter == 0 {
            return Err(ConfigError::new("max_iter", "must be at least 1"));
        }
        if !(self.seed_amplitude.is_finite() && self.seed_amplitude >= 0.0) {
            return Err(ConfigError::new("seed_amplitude", "must be finite and non-negative"));
        }
        if self.grid.dims.is_empty() {
            return Err(ConfigError::new("grid.dims", "needs at least one axis"));
        }
        if self.grid.dims.len() != self.grid.lengths.len() {
            return Err(ConfigError::new(
                "grid.lengths",
                format!("{} lengths for {} axes", self.grid.lengths.len(), self.grid.dims.len()),
            ));
        }
        for (a, &n) in self.grid.dims.iter().enumerate() {
            if n < weakkam_core::grid::MIN_AXIS_COUNT {
                return Err(ConfigError::new(
                    format!("grid.dims.{a}"),
                    format!("needs at least {} points, got {n}", weakkam_core::grid::MIN_AXIS_COUNT),
                ));
            }
        }
        for (a, &l) in self.grid.lengths.iter().enumerate() {
            positive(&format!("grid.lengths.{a}"), l)?;
        }
        positive("options.mather_tol", self.options.mather_tol)?;
        if self.options.reference_points < 2 {
            return Err(ConfigError::new("options.reference_points", "must be at least 2"));
        }
        let ndim = self.grid.dims.len();
        match &self.model {
            ModelSpec::Mechanical {
                kinetic,
                potential,
                shift,
            } => {
                if let Some(rows) = kinetic {
                    if rows.len() != ndim || rows.iter().any(|r| r.len() != ndim) {
                        return Err(ConfigError::new("model.kinetic", format!("must be {ndim}×{ndim}")));
                    }
                }
                if let Some(s) = shift {
                    if s.len() != ndim {
                        return Err(ConfigError::new("model.shift", format!("needs {ndim} components")));
                    }
                }
                if let PotentialSpec::Cosine { axis, amplitude, period } = potential {
                    if *axis >= ndim {
                        return Err(ConfigError::new("model.potential.axis", format!("grid has {ndim} axes")));
                    }
                    if !amplitude.is_finite() {
                        return Err(ConfigError::new("model.potential.amplitude", "must be finite"));
                    }
                    if let Some(p) = period {
                        positive("model.potential.period", *p)?;
                    }
                }
                if let PotentialSpec::Tabulated { dims: Some(d), .. } = potential {
                    if d.len() != ndim {
                        return Err(ConfigError::new("model.potential.dims", format!("needs {ndim} entries")));
                    }
                }
            }
            ModelSpec::Tabulated { shift, .. } => {
                if ndim != 1 {
                    return Err(ConfigError::new("model.kind", "tabulated Lagrangians need a 1-D grid"));
                }
                if let Some(s) = shift {
                    if s.len() != 1 {
                        return Err(ConfigError::new("model.shift", "needs 1 component"));
                    }
                }
            }
        }
        for (i, g) in self.symmetry.iter().enumerate() {
            let (GeneratorSpec::Shift { axis, .. } | GeneratorSpec::Reflection { axis }) = g;
            if *axis >= ndim {
                return Err(ConfigError::new(format!("symmetry.{i}.axis"), format!("grid has {ndim} axes")));
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<PeriodicGrid, ConfigError> {
        PeriodicGrid::new(self.grid.dims.clone(), self.grid.lengths.clone())
            .map_err(|e| ConfigError::new("grid", e.to_string()))
    }

    pub fn build_model(&self, grid: &PeriodicGrid) -> Result<LagrangianModel, ConfigError> {
        let model = match &self.model {
            ModelSpec::Mechanical {
                kinetic,
                potential,
                shift,
            } => {
                let kinetic = match kinetic {
                    Some(rows) => KineticForm::new(rows.clone())
                        .map_err(|e| ConfigError::new("model.kinetic", e.to_string()))?,
                    None => KineticForm::identity(grid.ndim()),
                };
                let potential = match potential {
                    PotentialSpec::Zero => Potential::Zero,
                    PotentialSpec::Cosine {
                        axis,
                        amplitude,
                        period,
                    } => Potential::Cosine {
                        axis: *axis,
                        amplitude: *amplitude,
                        period: period.unwrap_or(std::f64::consts::TAU),
                    },
                    PotentialSpec::Tabulated { path, dims } => {
                        let pgrid = match dims {
                            Some(d) => PeriodicGrid::new(d.clone(), grid.lengths().to_vec())
                                .map_err(|e| ConfigError::new("model.potential.dims", e.to_string()))?,
                            None => grid.clone(),
                        };
                        let file = File::open(path).map_err(|e| {
                            ConfigError::new("model.potential.path", format!("{}: {e}", path.display()))
                        })?;
                        Potential::Tabulated(
                            GridFunction::read_csv(file, &pgrid)
                                .map_err(|e| ConfigError::new("model.potential.path", e.to_string()))?,
                        )
                    }
                };
                let m = LagrangianModel::mechanical(kinetic, potential);
                match shift {
                    Some(s) => m.with_shift(s.clone()),
                    None => Ok(m),
                }
                .map_err(|e| ConfigError::new("model.shift", e.to_string()))?
            }
            ModelSpec::Tabulated { path, shift } => {
                let table = read_lagrangian_table(path, grid.lengths()[0])?;
                let m = LagrangianModel::tabulated(table);
                match shift {
                    Some(s) => m.with_shift(s.clone()),
                    None => Ok(m),
                }
                .map_err(|e| ConfigError::new("model.shift", e.to_string()))?
            }
        };
        Ok(model)
    }

    pub fn build_group(&self, grid: &PeriodicGrid) -> Result<Option<SymmetryGroup>, ConfigError> {
        if self.symmetry.is_empty() {
            return Ok(None);
        }
        SymmetryGroup::from_specs(grid, &self.symmetry)
            .map(Some)
            .map_err(|e| ConfigError::new("symmetry", e.to_string()))
    }

    /// Grid, model and kernel; `vmax` falls back to the model default.
    pub fn build_kernel(&self) -> Result<(LagrangianModel, ActionKernel), ConfigError> {
        let grid = self.build_grid()?;
        let model = self.build_model(&grid)?;
        let vmax = self.vmax.unwrap_or_else(|| default_vmax(&model, &grid, self.dt));
        let kernel = ActionKernel::build(&model, &grid, self.dt, vmax, self.rule)
            .map_err(|e| ConfigError::new("vmax", e.to_string()))?;
        Ok((model, kernel))
    }

    /// The seed function: random with `seed_amplitude`, constant zero otherwise.
    pub fn seed_function(&self, grid: &PeriodicGrid) -> GridFunction {
        if self.seed_amplitude > 0.0 {
            GridFunction::random(grid, self.seed, self.seed_amplitude)
        } else {
            GridFunction::constant(grid, 0.0)
        }
    }
}

fn read_lagrangian_table(path: &Path, length: f64) -> Result<TabulatedLagrangian, ConfigError> {
    let field = "model.path";
    let err = |m: String| ConfigError::new(field, format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 3 {
            return Err(err(format!("row {i}: expected columns x,v,value")));
        }
        let p = |s: &str| s.trim().parse::<f64>().map_err(|e| err(format!("row {i}: {e}")));
        rows.push((p(&rec[0])?, p(&rec[1])?, p(&rec[2])?));
    }
    let nv = rows.iter().take_while(|r| r.0 == rows[0].0).count();
    if nv < 2 || !rows.len().is_multiple_of(nv) {
        return Err(err("rows must form a full x-by-v table".into()));
    }
    let nx = rows.len() / nv;
    let v0 = rows[0].1;
    let v1 = rows[nv - 1].1;
    let velocities = UniformAxis::new(v0, v1, nv).map_err(|e| err(e.to_string()))?;
    let positions = PeriodicGrid::circle(nx, length).map_err(|e| err(e.to_string()))?;
    for (i, r) in rows.iter().enumerate() {
        let expect_v = velocities.point(i % nv);
        if (r.1 - expect_v).abs() > 1e-9 * (1.0 + expect_v.abs()) {
            return Err(err(format!("row {i}: velocity {} off the uniform axis", r.1)));
        }
    }
    TabulatedLagrangian::new(positions, velocities, rows.iter().map(|r| r.2).collect()).map_err(|e| err(e.to_string()))
}
