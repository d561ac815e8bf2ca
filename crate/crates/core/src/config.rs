//! Run configuration files: TOML with `[model]`, `[mesh]`, `[ic]` and
//! `[solver]` sections plus a few top-level keys.
//!
//! Unknown keys are rejected. Overrides use dotted paths such as
//! `model.gamma=+1` or `ic.A=0.8`; the same paths name sweep axes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::{Dims, MeshSpec};
use crate::initdata::InitialDataSpec;
use crate::model::{KineticSign, ModelParams, Potential};
use crate::solver::{LineSearch, NewtonOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid override `{0}`: expected key=value")]
    Override(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub mesh: MeshSpec,
    pub ic: InitialDataSpec,
    pub solver: NewtonOptions,
    pub max_slabs: usize,
    pub output_dir: Option<PathBuf>,
    /// Write a field snapshot every this many slabs; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelParams::default(),
            mesh: MeshSpec::new_1d(100, 101, 1.0, 1.0),
            ic: InitialDataSpec::default(),
            solver: NewtonOptions::default(),
            max_slabs: 200,
            output_dir: None,
            snapshot_every: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: String| Err(ConfigError::Invalid(e));
        if let Err(e) = self.model.validate() {
            return inv(e.to_string());
        }
        if self.model.potential.is_mms() {
            return inv("the mms potential is only available through the mms subcommand".into());
        }
        if let Err(e) = self.mesh.validate() {
            return inv(e.to_string());
        }
        if let Err(e) = self.ic.validate() {
            return inv(e.to_string());
        }
        if let Err(e) = self.solver.validate() {
            return inv(e);
        }
        if self.max_slabs < 1 {
            return inv("max_slabs >= 1 required".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PotentialKind {
    None,
    V22,
    LiftedPhi6,
    Mms,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default = "one")]
    m_phi: f64,
    #[serde(default = "one")]
    m_chi: f64,
    #[serde(default = "minus_one")]
    gamma: i64,
    #[serde(default = "default_kind")]
    potential: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda22: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> i64 {
    -1
}
fn default_kind() -> PotentialKind {
    PotentialKind::V22
}

/// Mass in the lifted potential when the file does not set `m`. The
/// quadratic part of the field equations already comes from `m_phi`, `m_chi`.
pub const DEFAULT_PHI6_MASS: f64 = 0.0;

impl RawModel {
    fn into_model(self) -> Result<ModelParams, ConfigError> {
        let gamma = KineticSign::try_from(self.gamma).map_err(ConfigError::Invalid)?;
        let allowed: &[&str] = match self.potential {
            PotentialKind::None => &[],
            PotentialKind::V22 => &["lambda22"],
            PotentialKind::LiftedPhi6 => &["m", "lambda", "g"],
            PotentialKind::Mms => &["lambda"],
        };
        for (name, v) in [("lambda22", self.lambda22), ("m", self.m), ("lambda", self.lambda), ("g", self.g)] {
            if v.is_some() && !allowed.contains(&name) {
                return Err(ConfigError::Invalid(format!(
                    "model.{name} does not apply to potential {}",
                    serde_plain(&self.potential)
                )));
            }
        }
        let potential = match self.potential {
            PotentialKind::None => Potential::None,
            PotentialKind::V22 => Potential::V22 { lambda22: self.lambda22.unwrap_or(1.0) },
            PotentialKind::LiftedPhi6 => Potential::LiftedPhi6 {
                m: self.m.unwrap_or(DEFAULT_PHI6_MASS),
                lambda: self.lambda.unwrap_or(1.0),
                g: self.g.unwrap_or(1.0),
            },
            PotentialKind::Mms => Potential::Mms { lambda: self.lambda.unwrap_or(1.0) },
        };
        Ok(ModelParams { m_phi: self.m_phi, m_chi: self.m_chi, gamma, potential })
    }

    fn from_model(m: &ModelParams) -> Self {
        let mut raw = RawModel {
            m_phi: m.m_phi,
            m_chi: m.m_chi,
            gamma: m.gamma.into(),
            potential: PotentialKind::None,
            lambda22: None,
            m: None,
            lambda: None,
            g: None,
        };
        match m.potential {
            Potential::None => {}
            Potential::V22 { lambda22 } => {
                raw.potential = PotentialKind::V22;
                raw.lambda22 = Some(lambda22);
            }
            Potential::LiftedPhi6 { m, lambda, g } => {
                raw.potential = PotentialKind::LiftedPhi6;
                raw.m = Some(m);
                raw.lambda = Some(lambda);
                raw.g = Some(g);
            }
            Potential::Mms { lambda } => {
                raw.potential = PotentialKind::Mms;
                raw.lambda = Some(lambda);
            }
        }
        raw
    }
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    #[serde(default = "default_dims")]
    dims: Dims,
    #[serde(default = "default_n")]
    nx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ny: Option<usize>,
    #[serde(default = "default_nt")]
    nt: usize,
    #[serde(rename = "L", default = "one")]
    length: f64,
    #[serde(rename = "T_slab", default = "one")]
    t_slab: f64,
}

fn default_dims() -> Dims {
    Dims::D1
}
fn default_n() -> usize {
    100
}
fn default_nt() -> usize {
    101
}

impl RawMesh {
    fn into_mesh(self) -> Result<MeshSpec, ConfigError> {
        match self.dims {
            Dims::D1 => {
                if self.ny.is_some() {
                    return Err(ConfigError::Invalid("mesh.ny only applies to dims = \"2+1\"".into()));
                }
                Ok(MeshSpec::new_1d(self.nx, self.nt, self.length, self.t_slab))
            }
            Dims::D2 => Ok(MeshSpec::new_2d(self.nx, self.ny.unwrap_or(self.nx), self.nt, self.length, self.t_slab)),
        }
    }

    fn from_mesh(m: &MeshSpec) -> Self {
        RawMesh {
            dims: m.dims,
            nx: m.nx,
            ny: (m.dims == Dims::D2).then_some(m.ny),
            nt: m.nt,
            length: m.length,
            t_slab: m.t_slab,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum LineSearchKind {
    Backtracking,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default = "default_rtol")]
    rtol: f64,
    #[serde(default = "default_atol")]
    atol: f64,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    #[serde(default = "default_ls")]
    line_search: LineSearchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shrink: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_alpha: Option<f64>,
}

fn default_rtol() -> f64 {
    NewtonOptions::default().rtol
}
fn default_atol() -> f64 {
    NewtonOptions::default().atol
}
fn default_max_iters() -> usize {
    NewtonOptions::default().max_iters
}
fn default_ls() -> LineSearchKind {
    LineSearchKind::Backtracking
}

impl RawSolver {
    fn into_options(self) -> Result<NewtonOptions, ConfigError> {
        let line_search = match self.line_search {
            LineSearchKind::None => {
                if self.c.is_some() || self.shrink.is_some() || self.min_alpha.is_some() {
                    return Err(ConfigError::Invalid("solver.c, shrink and min_alpha need line_search = \"backtracking\"".into()));
                }
                LineSearch::None
            }
            LineSearchKind::Backtracking => {
                let LineSearch::Backtracking { c, shrink, min_alpha } = LineSearch::default() else { unreachable!() };
                LineSearch::Backtracking {
                    c: self.c.unwrap_or(c),
                    shrink: self.shrink.unwrap_or(shrink),
                    min_alpha: self.min_alpha.unwrap_or(min_alpha),
                }
            }
        };
        Ok(NewtonOptions { rtol: self.rtol, atol: self.atol, max_iters: self.max_iters, line_search })
    }

    fn from_options(o: &NewtonOptions) -> Self {
        let (line_search, c, shrink, min_alpha) = match o.line_search {
            LineSearch::None => (LineSearchKind::None, None, None, None),
            LineSearch::Backtracking { c, shrink, min_alpha } => {
                (LineSearchKind::Backtracking, Some(c), Some(shrink), Some(min_alpha))
            }
        };
        RawSolver { rtol: o.rtol, atol: o.atol, max_iters: o.max_iters, line_search, c, shrink, min_alpha }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_max_slabs")]
    max_slabs: usize,
    #[serde(default)]
    snapshot_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(default = "default_raw_model")]
    model: RawModel,
    #[serde(default = "default_raw_mesh")]
    mesh: RawMesh,
    #[serde(default)]
    ic: InitialDataSpec,
    #[serde(default = "default_raw_solver")]
    solver: RawSolver,
}

fn default_max_slabs() -> usize {
    RunConfig::default().max_slabs
}
fn default_raw_model() -> RawModel {
    RawModel::from_model(&ModelParams::default())
}
fn default_raw_mesh() -> RawMesh {
    RawMesh::from_mesh(&RunConfig::default().mesh)
}
fn default_raw_solver() -> RawSolver {
    RawSolver::from_options(&NewtonOptions::default())
}

impl RawConfig {
    fn into_config(self) -> Result<RunConfig, ConfigError> {
        Ok(RunConfig {
            model: self.model.into_model()?,
            mesh: self.mesh.into_mesh()?,
            ic: self.ic,
            solver: self.solver.into_options()?,
            max_slabs: self.max_slabs,
            output_dir: self.output_dir,
            snapshot_every: self.snapshot_every,
        })
    }

    fn from_config(c: &RunConfig) -> Self {
        RawConfig {
            max_slabs: c.max_slabs,
            snapshot_every: c.snapshot_every,
            output_dir: c.output_dir.clone(),
            model: RawModel::from_model(&c.model),
            mesh: RawMesh::from_mesh(&c.mesh),
            ic: c.ic.clone(),
            solver: RawSolver::from_options(&c.solver),
        }
    }
}

fn table_from_str(text: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))
}

fn config_from_table(table: toml::Table) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let cfg = raw.into_config()?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a value written on the command line: any TOML scalar, falling back
/// to a bare string.
fn parse_scalar(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.to_owned())),
        Err(_) => toml::Value::String(text.to_owned()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) || parts.len() > 2 {
        return Err(ConfigError::UnknownKey(key.to_owned()));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        if !matches!(*p, "model" | "mesh" | "ic" | "solver") {
            return Err(ConfigError::UnknownKey(key.to_owned()));
        }
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::UnknownKey(key.to_owned()))?;
    }
    cur.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}

fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<(), ConfigError> {
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
        set_path(table, k.trim(), parse_scalar(v.trim()))?;
    }
    Ok(())
}

/// Parses config text and applies `key=value` overrides before validation.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table = table_from_str(text)?;
    apply_overrides(&mut table, overrides)?;
    config_from_table(table)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
    parse_config_str(&text, overrides)
}

/// Every key written out explicitly, so the text alone reproduces the run.
pub fn write_config(cfg: &RunConfig) -> String {
    toml::to_string(&RawConfig::from_config(cfg)).expect("config serializes")
}

/// Copy of `cfg` with one dotted key replaced; `value` is TOML scalar text.
pub fn with_value(cfg: &RunConfig, key: &str, value: &str) -> Result<RunConfig, ConfigError> {
    let mut table = table_from_str(&write_config(cfg))?;
    set_path(&mut table, key, parse_scalar(value))?;
    config_from_table(table).map_err(|e| match e {
        ConfigError::Parse(msg) if msg.contains("unknown field") => ConfigError::UnknownKey(key.to_owned()),
        other => other,
    })
}
