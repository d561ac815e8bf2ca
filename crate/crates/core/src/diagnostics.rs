//! Split Hamiltonian energies, RMS and deviation series.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::SlabState;
use crate::discretization::{Dims, MeshSpec};
use crate::initdata::TimeSlice;
use crate::model::{ModelError, ModelParams};

/// Energies on one time level. `dev_*` are absolute changes from the first record.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "H_phi")]
    pub h_phi: f64,
    #[serde(rename = "H_chi")]
    pub h_chi: f64,
    #[serde(rename = "H_int")]
    pub h_int: f64,
    pub dev_phi: f64,
    pub dev_chi: f64,
}

pub const ENERGY_CSV_HEADER: &str = "t,H,H_phi,H_chi,H_int,dev_phi,dev_chi";

/// Squared centered-difference gradient at every node of a level.
fn grad_sq(f: &[f64], mesh: &MeshSpec) -> Vec<f64> {
    let (nx, ny) = (mesh.nx, mesh.ny_eff());
    let (ix2, iy2) = (0.5 / mesh.h_x(), 0.5 / mesh.h_y());
    let mut out = vec![0.0; f.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let n = iy * nx + ix;
            let dx = (f[iy * nx + (ix + 1) % nx] - f[iy * nx + (ix + nx - 1) % nx]) * ix2;
            let mut g = dx * dx;
            if mesh.dims == Dims::D2 {
                let dy = (f[((iy + 1) % ny) * nx + ix] - f[((iy + ny - 1) % ny) * nx + ix]) * iy2;
                g += dy * dy;
            }
            out[n] = g;
        }
    }
    out
}

/// Integrated energies of one slice at time `t`; deviations are left at zero.
///
/// `H` and the three parts are integrated separately, so
/// `H - (H_phi + H_chi + H_int)` measures rounding only.
pub fn energies(slice: &TimeSlice, mesh: &MeshSpec, model: &ModelParams, t: f64) -> Result<EnergyRecord, ModelError> {
    let gamma = model.gamma();
    let (mp2, mc2) = (model.m_phi * model.m_phi, model.m_chi * model.m_chi);
    let gp = grad_sq(&slice.phi, mesh);
    let gc = grad_sq(&slice.chi, mesh);
    let (mut h, mut hp, mut hc, mut hi) = (0.0, 0.0, 0.0, 0.0);
    for n in 0..slice.len() {
        let (phi, u, chi, v) = (slice.phi[n], slice.u[n], slice.chi[n], slice.v[n]);
        let kin_phi = 0.5 * (u * u + gp[n] + mp2 * phi * phi);
        let kin_chi = 0.5 * gamma * (v * v + gc[n] + mc2 * chi * chi);
        let split = model.potential.split(phi, chi)?;
        let total_v = model.potential.value(phi, chi)?;
        h += kin_phi + kin_chi + total_v;
        hp += kin_phi + split.self_phi;
        hc += kin_chi + split.self_chi;
        hi += split.interaction;
    }
    let w = mesh.cell_volume();
    Ok(EnergyRecord { t, h: h * w, h_phi: hp * w, h_chi: hc * w, h_int: hi * w, dev_phi: 0.0, dev_chi: 0.0 })
}

/// Energies on levels `first_level..nt` of a solved slab starting at `t0`.
pub fn slab_energies(
    state: &SlabState,
    mesh: &MeshSpec,
    model: &ModelParams,
    t0: f64,
    first_level: usize,
) -> Result<Vec<EnergyRecord>, ModelError> {
    (first_level..mesh.nt).map(|it| energies(&state.level(mesh, it), mesh, model, t0 + mesh.t(it))).collect()
}

/// Root mean square over the nodes.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|x| x * x).sum::<f64>() / values.len() as f64).sqrt()
}

/// Fills `dev_phi` and `dev_chi` against the first record.
pub fn deviation_series(records: &[EnergyRecord]) -> Vec<EnergyRecord> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    records
        .iter()
        .map(|r| EnergyRecord { dev_phi: (r.h_phi - first.h_phi).abs(), dev_chi: (r.h_chi - first.h_chi).abs(), ..*r })
        .collect()
}

pub fn write_energy_row<W: Write>(w: &mut W, r: &EnergyRecord) -> std::io::Result<()> {
    writeln!(w, "{},{:e},{:e},{:e},{:e},{:e},{:e}", r.t, r.h, r.h_phi, r.h_chi, r.h_int, r.dev_phi, r.dev_chi)
}

pub fn write_energy_csv(records: &[EnergyRecord], path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{ENERGY_CSV_HEADER}")?;
    for r in records {
        write_energy_row(&mut f, r)?;
    }
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KineticSign, Potential};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn free(gamma: KineticSign) -> ModelParams {
        ModelParams { gamma, potential: Potential::None, ..Default::default() }
    }

    #[test]
    fn zero_slice_has_zero_energy() {
        let m = MeshSpec::new_1d(10, 3, 1.0, 1.0);
        let r = energies(&TimeSlice::zeros(10), &m, &free(KineticSign::Ghost), 0.0).unwrap();
        assert_eq!(r, EnergyRecord::default());
    }

    #[test]
    fn single_field_plane_wave_energy() {
        // H_phi = (A^2 L / 2)(k^2 + m^2), oracle: high-resolution rectangle sums
        let (a, k) = (0.6, 2.0 * PI);
        let exact = a * a / 2.0 * (k * k + 1.0);
        assert!((exact - 7.2861).abs() < 1e-4);
        let mut prev_err = f64::INFINITY;
        for nx in [50, 100, 200, 400] {
            let m = MeshSpec::new_1d(nx, 2, 1.0, 1.0);
            let mut s = TimeSlice::zeros(nx);
            let w = (k * k + 1.0f64).sqrt();
            for i in 0..nx {
                let x = m.x(i);
                s.phi[i] = a * (k * x).sin();
                s.u[i] = -w * a * (k * x).cos();
            }
            let r = energies(&s, &m, &free(KineticSign::Normal), 0.0).unwrap();
            let err = (r.h_phi - exact).abs();
            assert!(err < prev_err);
            prev_err = err;
            assert_eq!(r.h_chi, 0.0);
            assert_eq!(r.h, r.h_phi);
        }
        assert!(prev_err / exact < 1e-4);
    }

    #[test]
    fn ghost_swap_flips_sign() {
        let m = MeshSpec::new_1d(32, 2, 1.0, 1.0);
        let mut s = TimeSlice::zeros(32);
        for i in 0..32 {
            s.phi[i] = (2.0 * PI * m.x(i)).sin() + 0.3;
            s.u[i] = (4.0 * PI * m.x(i)).cos();
        }
        let swapped = TimeSlice { phi: s.chi.clone(), u: s.v.clone(), chi: s.phi.clone(), v: s.u.clone() };
        let model = free(KineticSign::Ghost);
        let a = energies(&s, &m, &model, 0.0).unwrap();
        let b = energies(&swapped, &m, &model, 0.0).unwrap();
        assert!((b.h_chi + a.h_phi).abs() < 1e-14 * a.h_phi.abs());
    }

    #[test]
    fn gradient_in_y_counts_in_2d() {
        let m = MeshSpec::new_2d(8, 16, 2, 1.0, 1.0);
        let mut s = TimeSlice::zeros(128);
        for iy in 0..16 {
            for ix in 0..8 {
                s.phi[iy * 8 + ix] = (2.0 * PI * m.y(iy)).sin();
            }
        }
        let model = ModelParams { m_phi: 0.0, ..free(KineticSign::Normal) };
        let r = energies(&s, &m, &model, 0.0).unwrap();
        // centered difference of sin on 16 points: k_eff = sin(k h)/h
        let h = 1.0 / 16.0;
        let keff = (2.0 * PI * h).sin() / h;
        assert!((r.h_phi - 0.25 * keff * keff).abs() < 1e-12);
    }

    #[test]
    fn rms_examples() {
        assert_eq!(rms(&[-2.0; 7]), 2.0);
        assert_eq!(rms(&[0.0; 5]), 0.0);
        let n = 256;
        let v: Vec<f64> = (0..n).map(|i| 0.8 * (2.0 * PI * i as f64 / n as f64).sin()).collect();
        assert!((rms(&v) - 0.8 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn deviations() {
        let rec = |t: f64, hp: f64, hc: f64| EnergyRecord { t, h_phi: hp, h_chi: hc, ..Default::default() };
        assert_eq!(deviation_series(&[rec(0.0, 1.0, 2.0)])[0].dev_phi, 0.0);
        assert!(deviation_series(&[]).is_empty());
        let eps = 0.125;
        let series: Vec<_> = (0..5).map(|i| rec(i as f64, 3.0 + eps * i as f64, -1.0)).collect();
        let d = deviation_series(&series);
        for (i, r) in d.iter().enumerate() {
            assert_eq!(r.dev_phi, eps * i as f64);
            assert_eq!(r.dev_chi, 0.0);
        }
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let r = EnergyRecord { t: 0.5, h: 1.0, h_phi: 2.0, h_chi: -1.5, h_int: 0.5, dev_phi: 0.0, dev_chi: 0.25 };
        write_energy_csv(&[r], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(ENERGY_CSV_HEADER));
        let vals: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(vals, vec![0.5, 1.0, 2.0, -1.5, 0.5, 0.0, 0.25]);
    }

    proptest! {
        #[test]
        fn split_identity(
            seed in any::<u64>(),
            pot in 0usize..3,
            ghost in any::<bool>(),
            amp in 0.0f64..3.0,
        ) {
            use rand::{Rng, SeedableRng};
            let potential = [
                Potential::None,
                Potential::V22 { lambda22: 1.3 },
                Potential::LiftedPhi6 { m: 0.7, lambda: 1.0, g: 1.0 },
            ][pot];
            let model = ModelParams {
                gamma: if ghost { KineticSign::Ghost } else { KineticSign::Normal },
                potential,
                ..Default::default()
            };
            let m = MeshSpec::new_1d(24, 2, 1.0, 1.0);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut s = TimeSlice::zeros(24);
            for f in [&mut s.phi, &mut s.u, &mut s.chi, &mut s.v] {
                f.iter_mut().for_each(|x| *x = amp * (rng.random::<f64>() - 0.5));
            }
            let r = energies(&s, &m, &model, 0.0).unwrap();
            let scale = r.h.abs().max(r.h_phi.abs()).max(r.h_chi.abs()).max(r.h_int.abs()).max(1e-300);
            prop_assert!((r.h - (r.h_phi + r.h_chi + r.h_int)).abs() <= 1e-12 * scale);
        }
    }
}
