//! Slab-by-slab evolution, lifetime measurement and parameter sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{Mode, SlabProblem, SlabState};
use crate::config::{with_value, ConfigError, RunConfig};
use crate::diagnostics::{slab_energies, write_energy_row, EnergyRecord, ENERGY_CSV_HEADER};
use crate::discretization::{Dims, MeshSpec};
use crate::initdata::{build_slice, seed_slab, InitDataError, InitialDataSpec, TimeSlice};
use crate::model::{ModelError, Potential};
use crate::solver::{newton_solve_with, LuSolver, NewtonReport, SolverError};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    InitData(#[from] InitDataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    BlowUp,
    MaxSlabs,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::BlowUp => "blow-up",
            Termination::MaxSlabs => "max-slabs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Converged slabs before the first failure.
    pub t_long_lived: usize,
    pub terminated_by: Termination,
    pub slab_reports: Vec<NewtonReport>,
    pub energy_csv_path: Option<PathBuf>,
    pub field_snapshot_paths: Vec<PathBuf>,
    /// Every level of every converged slab, deviations filled in.
    #[serde(skip)]
    pub energies: Vec<EnergyRecord>,
}

/// Evolves until the first non-converged slab or `max_slabs`.
pub fn evolve(cfg: &RunConfig) -> Result<RunReport, DriverError> {
    evolve_with(cfg, |_, _, _| {})
}

/// As [`evolve`], calling `on_slab(s, seed, solution)` after each converged slab.
pub fn evolve_with<F>(cfg: &RunConfig, mut on_slab: F) -> Result<RunReport, DriverError>
where
    F: FnMut(usize, &TimeSlice, &SlabState),
{
    cfg.validate()?;
    let mesh = &cfg.mesh;
    let model = &cfg.model;
    // t0 only enters the manufactured forcing, so one problem serves every slab
    let problem = SlabProblem::new(mesh, model, Mode::Physical, 0.0).map_err(SolverError::from)?;
    let lu = LuSolver::new(&problem.pattern);
    lu.check_memory()?;

    let mut energy_out = None;
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("energies.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{ENERGY_CSV_HEADER}")?;
        energy_out = Some((path, w));
    }

    let mut slice = build_slice(&cfg.ic, mesh, model)?;
    let mut report = RunReport {
        t_long_lived: 0,
        terminated_by: Termination::MaxSlabs,
        slab_reports: Vec::new(),
        energy_csv_path: energy_out.as_ref().map(|(p, _)| p.clone()),
        field_snapshot_paths: Vec::new(),
        energies: Vec::new(),
    };
    let first = crate::diagnostics::energies(&slice, mesh, model, 0.0)?;
    let mut push = |recs: Vec<EnergyRecord>, report: &mut RunReport| -> Result<(), DriverError> {
        for r in recs {
            let r = EnergyRecord { dev_phi: (r.h_phi - first.h_phi).abs(), dev_chi: (r.h_chi - first.h_chi).abs(), ..r };
            if let Some((_, w)) = energy_out.as_mut() {
                write_energy_row(w, &r)?;
            }
            report.energies.push(r);
        }
        if let Some((_, w)) = energy_out.as_mut() {
            w.flush()?;
        }
        Ok(())
    };
    push(vec![first], &mut report)?;

    for s in 0..cfg.max_slabs {
        let t0 = s as f64 * mesh.t_slab;
        let u0 = seed_slab(&slice, mesh)?;
        let (state, rep) = newton_solve_with(&problem, &lu, u0, &slice, &cfg.solver)?;
        let converged = rep.converged;
        report.slab_reports.push(rep);
        if !converged {
            report.terminated_by = Termination::BlowUp;
            break;
        }
        report.t_long_lived = s + 1;
        push(slab_energies(&state, mesh, model, t0, 1)?, &mut report)?;
        if let Some(dir) = &cfg.output_dir {
            if cfg.snapshot_every > 0 && s % cfg.snapshot_every == 0 {
                let path = dir.join(format!("fields_s{s}.csv"));
                write_fields_csv(&state, mesh, t0, &path)?;
                report.field_snapshot_paths.push(path);
            }
        }
        on_slab(s, &slice, &state);
        slice = state.level(mesh, mesh.nt - 1);
    }

    if let Some(dir) = &cfg.output_dir {
        write_report_json(cfg, &report, &dir.join("report.json"))?;
    }
    Ok(report)
}

pub fn fields_csv_header(dims: Dims) -> &'static str {
    match dims {
        Dims::D1 => "x,t,phi,u,chi,v",
        Dims::D2 => "x,y,t,phi,u,chi,v",
    }
}

/// All nodes of a slab, time-major, with absolute times.
pub fn write_fields_csv(state: &SlabState, mesh: &MeshSpec, t0: f64, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", fields_csv_header(mesh.dims))?;
    for n in 0..mesh.num_nodes() {
        let (ix, iy, it) = mesh.node_coords(n);
        let v = &state.values[4 * n..4 * n + 4];
        match mesh.dims {
            Dims::D1 => writeln!(w, "{},{},{:e},{:e},{:e},{:e}", mesh.x(ix), t0 + mesh.t(it), v[0], v[1], v[2], v[3])?,
            Dims::D2 => writeln!(
                w,
                "{},{},{},{:e},{:e},{:e},{:e}",
                mesh.x(ix),
                mesh.y(iy),
                t0 + mesh.t(it),
                v[0],
                v[1],
                v[2],
                v[3]
            )?,
        }
    }
    w.flush()
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a RunConfig,
    config_toml: String,
    #[serde(flatten)]
    report: &'a RunReport,
}

fn write_report_json(cfg: &RunConfig, report: &RunReport, path: &Path) -> Result<(), DriverError> {
    let doc = ReportFile { config: cfg, config_toml: crate::config::write_config(cfg), report };
    let text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: String,
    pub t_long_lived: usize,
    pub terminated_by: Termination,
}

pub const LIFETIMES_CSV_HEADER: &str = "axis_value,t_long_lived,terminated_by";

pub fn write_lifetimes_csv(points: &[SweepPoint], path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{LIFETIMES_CSV_HEADER}")?;
    for p in points {
        writeln!(w, "{},{},{}", p.axis_value, p.t_long_lived, p.terminated_by.as_str())?;
    }
    w.flush()
}

/// Worker count from `GHOSTFEM_THREADS`, else rayon's default.
pub fn worker_threads() -> usize {
    std::env::var("GHOSTFEM_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

fn point_dir_name(axis: &str, value: &str) -> String {
    let clean: String = value.chars().map(|c| if c.is_ascii_alphanumeric() || "+-.".contains(c) { c } else { '_' }).collect();
    format!("{axis}={clean}")
}

/// One independent run per value of the dotted config key `axis`. Results
/// keep input order. With an output directory, each point writes into its
/// own subdirectory and the table goes to `lifetimes.csv`.
pub fn sweep(base: &RunConfig, axis: &str, values: &[String]) -> Result<Vec<SweepPoint>, DriverError> {
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|v| {
            let mut c = with_value(base, axis, v)?;
            c.output_dir = base.output_dir.as_ref().map(|d| d.join(point_dir_name(axis, v)));
            Ok(c)
        })
        .collect::<Result<_, DriverError>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| DriverError::Pool(e.to_string()))?;
    let reports: Vec<RunReport> = pool.install(|| configs.par_iter().map(evolve).collect::<Result<_, _>>())?;
    let points: Vec<SweepPoint> = values
        .iter()
        .zip(&reports)
        .map(|(v, r)| SweepPoint { axis_value: v.clone(), t_long_lived: r.t_long_lived, terminated_by: r.terminated_by })
        .collect();
    if let Some(dir) = &base.output_dir {
        std::fs::create_dir_all(dir)?;
        write_lifetimes_csv(&points, &dir.join("lifetimes.csv"))?;
    }
    Ok(points)
}

/// The oscillon threshold `A_c = 1/sqrt(2)` for `lambda = g = 1`.
pub fn phi6_critical_amplitude(lambda: f64, g: f64) -> f64 {
    (lambda / (2.0 * g)).sqrt()
}

/// Lifetime against seed amplitude for the lifted sextic potential.
pub fn phi6_amplitude_scan(base: &RunConfig, amplitudes: &[f64]) -> Result<Vec<SweepPoint>, DriverError> {
    if !matches!(base.model.potential, Potential::LiftedPhi6 { .. }) {
        return Err(ConfigError::Invalid("phi6 scan needs potential = \"lifted_phi6\"".into()).into());
    }
    match base.ic {
        InitialDataSpec::OscillonSeed { r, delta_phi, k0, .. } if r == 1.0 && delta_phi == 0.0 && k0 == 0.0 => {}
        _ => {
            return Err(ConfigError::Invalid("phi6 scan needs an oscillon_seed with r = 1, delta_phi = 0, k0 = 0".into()).into())
        }
    }
    let values: Vec<String> = amplitudes.iter().map(|a| format!("{a:?}")).collect();
    sweep(base, "ic.A", &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KineticSign, ModelParams};

    fn small(max_slabs: usize) -> RunConfig {
        RunConfig {
            mesh: MeshSpec::new_1d(16, 9, 1.0, 0.5),
            ic: InitialDataSpec::PlaneWave { a: 0.3, c: 1.0, x_phi: None, x_chi: None, sign_phi: 1.0, sign_chi: -1.0 },
            max_slabs,
            ..Default::default()
        }
    }

    #[test]
    fn runs_to_max_slabs_and_hands_off_bitwise() {
        let cfg = small(3);
        let mut finals: Vec<TimeSlice> = Vec::new();
        let mut seeds: Vec<TimeSlice> = Vec::new();
        let rep = evolve_with(&cfg, |_, seed, st| {
            seeds.push(seed.clone());
            finals.push(st.level(&cfg.mesh, cfg.mesh.nt - 1));
        })
        .unwrap();
        assert_eq!(rep.t_long_lived, 3);
        assert_eq!(rep.terminated_by, Termination::MaxSlabs);
        assert_eq!(rep.slab_reports.len(), 3);
        for s in 1..3 {
            assert_eq!(seeds[s], finals[s - 1]);
        }
        // one record per level, shared levels counted once
        assert_eq!(rep.energies.len(), 1 + 3 * 8);
        assert!((rep.energies.last().unwrap().t - 1.5).abs() < 1e-12);
        assert_eq!(rep.energies[0].dev_phi, 0.0);
    }

    #[test]
    fn immediate_failure_gives_zero_lifetime() {
        let cfg = RunConfig {
            solver: crate::solver::NewtonOptions { max_iters: 1, rtol: 1e-14, atol: 0.0, ..Default::default() },
            ic: InitialDataSpec::PlaneWave { a: 2.0, c: 1.0, x_phi: None, x_chi: None, sign_phi: 1.0, sign_chi: -1.0 },
            ..small(1)
        };
        let rep = evolve(&cfg).unwrap();
        assert_eq!(rep.t_long_lived, 0);
        assert_eq!(rep.terminated_by, Termination::BlowUp);
        assert!(!rep.slab_reports.last().unwrap().converged);
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { output_dir: Some(dir.path().to_owned()), snapshot_every: 2, ..small(3) };
        let rep = evolve(&cfg).unwrap();
        let e = std::fs::read_to_string(dir.path().join("energies.csv")).unwrap();
        assert_eq!(e.lines().next(), Some(ENERGY_CSV_HEADER));
        assert_eq!(e.lines().count(), 1 + rep.energies.len());
        assert_eq!(rep.field_snapshot_paths, vec![dir.path().join("fields_s0.csv"), dir.path().join("fields_s2.csv")]);
        let f = std::fs::read_to_string(dir.path().join("fields_s2.csv")).unwrap();
        assert_eq!(f.lines().next(), Some("x,t,phi,u,chi,v"));
        assert_eq!(f.lines().count(), 1 + cfg.mesh.num_nodes());
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(json["t_long_lived"], 3);
        assert_eq!(json["terminated_by"], "max-slabs");
        let toml = json["config_toml"].as_str().unwrap();
        assert_eq!(crate::config::parse_config_str(toml, &[]).unwrap(), cfg);
    }

    #[test]
    fn rerun_is_deterministic() {
        let cfg = RunConfig {
            model: ModelParams { gamma: KineticSign::Ghost, ..Default::default() },
            ic: InitialDataSpec::ColoredNoise { a: 0.5, n1: 1, n2: 4, n_s: 0.0, rng_seed: 9, delta_phase: 0.0, s_policy: Default::default() },
            ..small(2)
        };
        let a = evolve(&cfg).unwrap();
        let b = evolve(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_keeps_input_order_and_writes_table() {
        let dir = tempfile::tempdir().unwrap();
        let base = RunConfig { output_dir: Some(dir.path().to_owned()), ..small(2) };
        let values: Vec<String> = ["0.3", "0.1", "0.2"].map(String::from).to_vec();
        let pts = sweep(&base, "ic.A", &values).unwrap();
        assert_eq!(pts.iter().map(|p| p.axis_value.as_str()).collect::<Vec<_>>(), ["0.3", "0.1", "0.2"]);
        assert!(pts.iter().all(|p| p.t_long_lived == 2));
        let csv = std::fs::read_to_string(dir.path().join("lifetimes.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines, [LIFETIMES_CSV_HEADER, "0.3,2,max-slabs", "0.1,2,max-slabs", "0.2,2,max-slabs"]);
        assert!(dir.path().join("ic.A=0.1").join("report.json").exists());
        assert!(sweep(&base, "ic.A", &[]).unwrap().is_empty());
        assert!(matches!(sweep(&base, "ic.Q", &values), Err(DriverError::Config(ConfigError::UnknownKey(_)))));
    }

    #[test]
    fn phi6_scan_checks_its_inputs() {
        assert!((phi6_critical_amplitude(1.0, 1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let base = small(1);
        assert!(phi6_amplitude_scan(&base, &[0.5]).is_err());
        let osc = RunConfig {
            model: ModelParams { potential: Potential::LiftedPhi6 { m: 0.0, lambda: 1.0, g: 1.0 }, ..Default::default() },
            ic: InitialDataSpec::OscillonSeed { a: 0.5, width_sigma: 0.1, r: 1.0, delta_phi: 0.0, x0: None, k0: 0.0 },
            ..small(1)
        };
        let pts = phi6_amplitude_scan(&osc, &[0.3]).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].axis_value, "0.3");
        let bad = RunConfig { ic: InitialDataSpec::OscillonSeed { a: 0.5, width_sigma: 0.1, r: 1.0, delta_phi: 0.0, x0: None, k0: 3.0 }, ..osc };
        assert!(phi6_amplitude_scan(&bad, &[0.3]).is_err());
    }
}
