//! Manufactured-solution verification.
//!
//! The manufactured fields live on the symmetric box `[-L/2, L/2)`; mesh
//! coordinates are shifted by [`domain_offset`] before evaluation.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{Mode, SlabState};
use crate::discretization::{Dims, MeshSpec};
use crate::initdata::{seed_slab, TimeSlice};
use crate::model::{KineticSign, ModelError, ModelParams, Potential};
use crate::solver::{newton_solve, NewtonOptions, NewtonReport, SolverError};

/// Coupling used by every verification run.
pub const MMS_LAMBDA: f64 = 1.0;
/// Box length of the manufactured problem; `cos(pi x)` has period 2.
pub const MMS_LENGTH: f64 = 2.0;
/// Slab duration, chosen so that `h_x = h_t` when `nt = nx + 1`.
pub const MMS_DURATION: f64 = 2.0;

#[derive(Debug, Error)]
pub enum MmsError {
    #[error("invalid convergence study: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("newton did not converge on mesh {mesh}: {report:?}")]
    NotConverged { mesh: String, report: NewtonReport },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The model the forcing terms are built for: unit masses, ghost `chi`.
pub fn mms_model() -> ModelParams {
    ModelParams { m_phi: 1.0, m_chi: 1.0, gamma: KineticSign::Ghost, potential: Potential::Mms { lambda: MMS_LAMBDA } }
}

/// Mesh for one refinement level: `n` cells in each space direction and in time.
pub fn mms_mesh(dims: Dims, n: usize) -> MeshSpec {
    match dims {
        Dims::D1 => MeshSpec::new_1d(n, n + 1, MMS_LENGTH, MMS_DURATION),
        Dims::D2 => MeshSpec::new_2d(n, n, n + 1, MMS_LENGTH, MMS_DURATION),
    }
}

/// Shift from mesh coordinates (starting at 0) to the symmetric box.
pub fn domain_offset(mesh: &MeshSpec) -> f64 {
    -0.5 * mesh.length
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactValues {
    pub phi: f64,
    pub chi: f64,
    pub u: f64,
    pub v: f64,
}

/// Manufactured fields; in 2+1 the spatial factor gains `cos(pi y)`.
pub fn exact_solution(dims: Dims, x: f64, t: f64, y: f64) -> ExactValues {
    let s = match dims {
        Dims::D1 => (PI * x).cos(),
        Dims::D2 => (PI * x).cos() * (PI * y).cos(),
    };
    let (st, ct) = (PI * t).sin_cos();
    ExactValues { phi: 1.0 + s * ct, chi: 1.0 + s * st, u: -PI * s * st, v: PI * s * ct }
}

/// `box phi = phi_tt - laplacian phi` of the manufactured fields.
fn wave_operator(dims: Dims, x: f64, t: f64, y: f64) -> (f64, f64) {
    match dims {
        Dims::D1 => (0.0, 0.0),
        Dims::D2 => {
            let s = PI * PI * (PI * x).cos() * (PI * y).cos();
            let (st, ct) = (PI * t).sin_cos();
            (s * ct, s * st)
        }
    }
}

/// Forcing for the unit-mass ghost model with coupling `lambda`.
pub fn forcing(dims: Dims, x: f64, t: f64, y: f64, lambda: f64) -> Result<(f64, f64), ModelError> {
    let model = ModelParams { potential: Potential::Mms { lambda }, ..mms_model() };
    forcing_for(&model, dims, x, t, y)
}

/// Forcing `box f + m^2 f + gamma^{0,1} dV` evaluated on the manufactured
/// solution, for any masses and kinetic sign.
pub fn forcing_for(model: &ModelParams, dims: Dims, x: f64, t: f64, y: f64) -> Result<(f64, f64), ModelError> {
    if !model.potential.is_mms() {
        return Err(ModelError::Invalid("manufactured forcing needs the mms potential".into()));
    }
    let e = exact_solution(dims, x, t, y);
    let (bp, bc) = wave_operator(dims, x, t, y);
    let (gp, gc) = model.potential.grad(e.phi, e.chi)?;
    let fp = bp + model.m_phi * model.m_phi * e.phi + gp;
    let fc = bc + model.m_chi * model.m_chi * e.chi + model.gamma() * gc;
    Ok((fp, fc))
}

/// Manufactured data on the slab's first time level.
pub fn exact_slice(mesh: &MeshSpec, t: f64) -> TimeSlice {
    let off = domain_offset(mesh);
    let npl = mesh.nodes_per_level();
    let mut s = TimeSlice::zeros(npl);
    for n in 0..npl {
        let (ix, iy, _) = mesh.node_coords(n);
        let e = exact_solution(mesh.dims, mesh.x(ix) + off, t, mesh.y(iy) + off);
        s.phi[n] = e.phi;
        s.u[n] = e.u;
        s.chi[n] = e.chi;
        s.v[n] = e.v;
    }
    s
}

/// Nodal L2 error `sqrt(sum e^2 h_x h_t [h_y])` of `phi` and `chi` over the slab.
pub fn l2_error(state: &SlabState, mesh: &MeshSpec) -> (f64, f64) {
    let off = domain_offset(mesh);
    let w = mesh.cell_volume() * mesh.h_t();
    let (mut ep, mut ec) = (0.0, 0.0);
    for n in 0..mesh.num_nodes() {
        let (ix, iy, it) = mesh.node_coords(n);
        let e = exact_solution(mesh.dims, mesh.x(ix) + off, mesh.t(it), mesh.y(iy) + off);
        ep += (state.get(n, 0) - e.phi).powi(2);
        ec += (state.get(n, 2) - e.chi).powi(2);
    }
    ((ep * w).sqrt(), (ec * w).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub mesh_label: String,
    pub l2_err_phi: f64,
    pub rate_phi: Option<f64>,
    pub l2_err_chi: f64,
    pub rate_chi: Option<f64>,
}

/// `log(E_c / E_f) / log(h_c / h_f)`.
pub fn observed_rate(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

fn check_nested(levels: &[MeshSpec]) -> Result<(), MmsError> {
    if levels.is_empty() {
        return Err(MmsError::Config("no levels given".into()));
    }
    for m in levels {
        m.validate().map_err(|e| MmsError::Config(e.to_string()))?;
    }
    for w in levels.windows(2) {
        let (c, f) = (&w[0], &w[1]);
        let same_box = c.dims == f.dims && c.length == f.length && c.t_slab == f.t_slab;
        let halved = f.nx == 2 * c.nx && f.nt - 1 == 2 * (c.nt - 1) && (c.dims == Dims::D1 || f.ny == 2 * c.ny);
        if !same_box || !halved {
            return Err(MmsError::Config(format!("{} does not halve the spacing of {}", f.label(), c.label())));
        }
    }
    Ok(())
}

/// Solves one level and returns its state with the L2 errors.
pub fn solve_level(mesh: &MeshSpec, opts: &NewtonOptions) -> Result<(SlabState, f64, f64), MmsError> {
    let model = mms_model();
    let ic = exact_slice(mesh, 0.0);
    let u0 = seed_slab(&ic, mesh).map_err(|e| MmsError::Config(e.to_string()))?;
    let (state, report) = newton_solve(u0, mesh, &model, Mode::Mms, &ic, opts)?;
    if !report.converged {
        return Err(MmsError::NotConverged { mesh: mesh.label(), report });
    }
    let (ep, ec) = l2_error(&state, mesh);
    Ok((state, ep, ec))
}

/// Runs every level and tabulates errors and observed rates.
pub fn convergence_study(levels: &[MeshSpec], opts: &NewtonOptions) -> Result<Vec<ConvergenceRow>, MmsError> {
    check_nested(levels)?;
    let errs: Vec<(f64, f64)> = levels
        .par_iter()
        .map(|m| solve_level(m, opts).map(|(_, ep, ec)| (ep, ec)))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(levels.len());
    for (i, m) in levels.iter().enumerate() {
        let (ep, ec) = errs[i];
        let (rp, rc) = if i == 0 {
            (None, None)
        } else {
            let (hc, hf) = (levels[i - 1].h_x(), m.h_x());
            (Some(observed_rate(errs[i - 1].0, ep, hc, hf)), Some(observed_rate(errs[i - 1].1, ec, hc, hf)))
        };
        rows.push(ConvergenceRow { mesh_label: m.label(), l2_err_phi: ep, rate_phi: rp, l2_err_chi: ec, rate_chi: rc });
    }
    Ok(rows)
}

pub const CONVERGENCE_CSV_HEADER: &str = "mesh,l2_err_phi,rate_phi,l2_err_chi,rate_chi";

pub fn write_convergence_csv(rows: &[ConvergenceRow], path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{CONVERGENCE_CSV_HEADER}")?;
    let opt = |r: Option<f64>| r.map(|v| format!("{v:.6}")).unwrap_or_default();
    for r in rows {
        writeln!(f, "{},{:.6e},{},{:.6e},{}", r.mesh_label, r.l2_err_phi, opt(r.rate_phi), r.l2_err_chi, opt(r.rate_chi))?;
    }
    f.flush()
}
