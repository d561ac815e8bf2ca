//! Initial data on one time level: plane waves, Gaussian packets, colored
//! noise, phase-correlated carriers and oscillon-like seeds.
//!
//! All profiles are functions of `x` only; in 2+1 they are extruded
//! uniformly along `y`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::SlabState;
use crate::discretization::MeshSpec;
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitDataError {
    #[error("plane wave with C = {0} gives a chi wavenumber that does not fit the periodic box (2C must be an integer)")]
    Incommensurate(f64),
    #[error("invalid initial data: {0}")]
    Invalid(String),
    #[error("slice has {got} nodes per field, mesh level has {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Fields and their time derivatives on one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSlice {
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub chi: Vec<f64>,
    pub v: Vec<f64>,
}

impl TimeSlice {
    pub fn zeros(n: usize) -> Self {
        TimeSlice { phi: vec![0.0; n], u: vec![0.0; n], chi: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        [&self.phi, &self.u, &self.chi, &self.v].iter().all(|f| f.iter().all(|x| x.is_finite()))
    }

    /// Checks that all four arrays hold one value per spatial node.
    pub fn check(&self, mesh: &MeshSpec) -> Result<(), InitDataError> {
        let expected = mesh.nodes_per_level();
        for f in [&self.phi, &self.u, &self.chi, &self.v] {
            if f.len() != expected {
                return Err(InitDataError::SizeMismatch { expected, got: f.len() });
            }
        }
        Ok(())
    }
}

/// How colored-noise modes pick their propagation sign `s_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPolicy {
    /// `s_n = -1` for every mode.
    #[default]
    Counter,
    /// `s_n = +1` for every mode.
    Co,
    /// `s_n = (-1)^n`.
    Alternating,
    /// Fair coin per mode, drawn after the phases.
    Random,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDataSpec {
    PlaneWave {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "C")]
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_phi: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_chi: Option<f64>,
        #[serde(default = "one")]
        sign_phi: f64,
        #[serde(default = "minus_one")]
        sign_chi: f64,
    },
    GaussianPacket {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "C")]
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_phi: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_chi: Option<f64>,
        #[serde(default = "one")]
        c_phi: f64,
        #[serde(default = "minus_one")]
        c_chi: f64,
    },
    ColoredNoise {
        #[serde(rename = "A")]
        a: f64,
        n1: u32,
        n2: u32,
        n_s: f64,
        rng_seed: u64,
        #[serde(default, skip_serializing_if = "is_zero")]
        delta_phase: f64,
        #[serde(default)]
        s_policy: SignPolicy,
    },
    PhaseCorrelated {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "C")]
        c: f64,
        #[serde(default = "one")]
        r: f64,
        #[serde(default)]
        delta_phi: f64,
        #[serde(default = "one")]
        sigma_prop: f64,
        #[serde(default)]
        x_phi: f64,
        #[serde(default)]
        x_chi: f64,
    },
    OscillonSeed {
        #[serde(rename = "A")]
        a: f64,
        width_sigma: f64,
        #[serde(default = "one")]
        r: f64,
        #[serde(default)]
        delta_phi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<f64>,
        #[serde(default)]
        k0: f64,
    },
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        InitialDataSpec::PlaneWave { a: 0.6, c: 1.0, x_phi: None, x_chi: None, sign_phi: 1.0, sign_chi: -1.0 }
    }
}

fn unit_sign(name: &str, s: f64) -> Result<(), InitDataError> {
    if s == 1.0 || s == -1.0 {
        Ok(())
    } else {
        Err(InitDataError::Invalid(format!("{name} must be +1 or -1, got {s}")))
    }
}

fn finite(name: &str, x: f64) -> Result<(), InitDataError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(InitDataError::Invalid(format!("{name} must be finite, got {x}")))
    }
}

fn positive(name: &str, x: f64) -> Result<(), InitDataError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(InitDataError::Invalid(format!("{name} must be > 0, got {x}")))
    }
}

impl InitialDataSpec {
    pub fn family(&self) -> &'static str {
        match self {
            InitialDataSpec::PlaneWave { .. } => "plane_wave",
            InitialDataSpec::GaussianPacket { .. } => "gaussian_packet",
            InitialDataSpec::ColoredNoise { .. } => "colored_noise",
            InitialDataSpec::PhaseCorrelated { .. } => "phase_correlated",
            InitialDataSpec::OscillonSeed { .. } => "oscillon_seed",
        }
    }

    pub fn validate(&self) -> Result<(), InitDataError> {
        match *self {
            InitialDataSpec::PlaneWave { a, c, x_phi, x_chi, sign_phi, sign_chi } => {
                finite("A", a)?;
                positive("C", c)?;
                finite("x_phi", x_phi.unwrap_or(0.0))?;
                finite("x_chi", x_chi.unwrap_or(0.0))?;
                unit_sign("sign_phi", sign_phi)?;
                unit_sign("sign_chi", sign_chi)?;
                let twice = 2.0 * c;
                if (twice - twice.round()).abs() > 1e-12 {
                    return Err(InitDataError::Incommensurate(c));
                }
            }
            InitialDataSpec::GaussianPacket { a, c, x_phi, x_chi, c_phi, c_chi } => {
                finite("A", a)?;
                positive("C", c)?;
                finite("x_phi", x_phi.unwrap_or(0.0))?;
                finite("x_chi", x_chi.unwrap_or(0.0))?;
                unit_sign("c_phi", c_phi)?;
                unit_sign("c_chi", c_chi)?;
            }
            InitialDataSpec::ColoredNoise { a, n1, n2, n_s, rng_seed, delta_phase, .. } => {
                finite("A", a)?;
                if rng_seed > i64::MAX as u64 {
                    return Err(InitDataError::Invalid(format!("rng_seed must be <= {}, got {rng_seed}", i64::MAX)));
                }
                finite("n_s", n_s)?;
                finite("delta_phase", delta_phase)?;
                if n1 < 1 || n2 < n1 {
                    return Err(InitDataError::Invalid(format!("need 1 <= n1 <= n2, got n1 = {n1}, n2 = {n2}")));
                }
            }
            InitialDataSpec::PhaseCorrelated { a, c, r, delta_phi, sigma_prop, x_phi, x_chi } => {
                finite("A", a)?;
                positive("C", c)?;
                positive("r", r)?;
                finite("delta_phi", delta_phi)?;
                finite("x_phi", x_phi)?;
                finite("x_chi", x_chi)?;
                unit_sign("sigma_prop", sigma_prop)?;
            }
            InitialDataSpec::OscillonSeed { a, width_sigma, r, delta_phi, x0, k0 } => {
                finite("A", a)?;
                positive("width_sigma", width_sigma)?;
                finite("r", r)?;
                finite("delta_phi", delta_phi)?;
                finite("x0", x0.unwrap_or(0.0))?;
                finite("k0", k0)?;
            }
        }
        Ok(())
    }
}

/// Periodic displacement `x - x0` wrapped into `[-L/2, L/2)`.
pub fn wrapped_displacement(x: f64, x0: f64, length: f64) -> f64 {
    let d = (x - x0).rem_euclid(length);
    if d >= 0.5 * length {
        d - length
    } else {
        d
    }
}

/// Dispersion `omega(k) = sqrt(k^2 + m^2)`.
pub fn omega(k: f64, m: f64) -> f64 {
    (k * k + m * m).sqrt()
}

/// Phase-velocity factor `sign * sqrt((k^2 + m^2) / k^2)`.
pub fn phase_speed(k: f64, m: f64, sign: f64) -> f64 {
    sign * omega(k, m) / k
}

/// Evaluates the family at every spatial node of `mesh`.
pub fn build_slice(spec: &InitialDataSpec, mesh: &MeshSpec, model: &ModelParams) -> Result<TimeSlice, InitDataError> {
    spec.validate()?;
    mesh.validate().map_err(|e| InitDataError::Invalid(e.to_string()))?;
    let l = mesh.length;
    let (mp, mc) = (model.m_phi, model.m_chi);
    // one row of values along x, then extruded
    let mut row = TimeSlice::zeros(mesh.nx);
    let xs: Vec<f64> = (0..mesh.nx).map(|i| mesh.x(i)).collect();
    match *spec {
        InitialDataSpec::PlaneWave { a, c, x_phi, x_chi, sign_phi, sign_chi } => {
            let k = 2.0 * PI * c / l;
            let (kp, kc) = (k, 2.0 * k);
            let (xp, xc) = (x_phi.unwrap_or(0.0), x_chi.unwrap_or(l / 3.0));
            let (cp, cc) = (phase_speed(kp, mp, sign_phi), phase_speed(kc, mc, sign_chi));
            for (i, &x) in xs.iter().enumerate() {
                row.phi[i] = a * (kp * (x - xp)).sin();
                row.u[i] = -cp * kp * a * (kp * (x - xp)).cos();
                row.chi[i] = a * (kc * (x - xc)).sin();
                row.v[i] = -cc * kc * a * (kc * (x - xc)).cos();
            }
        }
        InitialDataSpec::GaussianPacket { a, c, x_phi, x_chi, c_phi, c_chi } => {
            let k = 2.0 * PI * c / l;
            let ell = 1.0 / (4.0 * k);
            let (xp, xc) = (x_phi.unwrap_or(0.3 * l), x_chi.unwrap_or(0.7 * l));
            let packet = |x: f64, x0: f64, sgn: f64| {
                let d = wrapped_displacement(x, x0, l);
                let g = a * (-d * d / (2.0 * ell * ell)).exp();
                (g, sgn * d / (ell * ell) * g)
            };
            for (i, &x) in xs.iter().enumerate() {
                (row.phi[i], row.u[i]) = packet(x, xp, c_phi);
                (row.chi[i], row.v[i]) = packet(x, xc, c_chi);
            }
        }
        InitialDataSpec::ColoredNoise { a, n1, n2, n_s, rng_seed, delta_phase, s_policy } => {
            let modes: Vec<u32> = (n1..=n2).collect();
            let ks: Vec<f64> = modes.iter().map(|&n| 2.0 * PI * n as f64 / l).collect();
            let norm = a / (0.5 * ks.iter().map(|k| k.powf(n_s)).sum::<f64>()).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let theta_phi: Vec<f64> = modes.iter().map(|_| rng.random::<f64>() * 2.0 * PI).collect();
            let theta_chi: Vec<f64> = modes.iter().map(|_| rng.random::<f64>() * 2.0 * PI + delta_phase).collect();
            let signs: Vec<f64> = modes
                .iter()
                .map(|&n| match s_policy {
                    SignPolicy::Counter => -1.0,
                    SignPolicy::Co => 1.0,
                    SignPolicy::Alternating => {
                        if n % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    SignPolicy::Random => {
                        if rng.random_bool(0.5) {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                })
                .collect();
            for (i, &x) in xs.iter().enumerate() {
                for (j, &k) in ks.iter().enumerate() {
                    let amp = norm * k.powf(0.5 * n_s);
                    let (sp, cp) = (k * x + theta_phi[j]).sin_cos();
                    let (sc, cc) = (k * x + theta_chi[j]).sin_cos();
                    row.phi[i] += amp * cp;
                    row.u[i] += signs[j] * omega(k, mp) * amp * sp;
                    row.chi[i] += amp * cc;
                    row.v[i] += signs[j] * omega(k, mc) * amp * sc;
                }
            }
        }
        InitialDataSpec::PhaseCorrelated { a, c, r, delta_phi, sigma_prop, x_phi, x_chi } => {
            let k = 2.0 * PI * c / l;
            let (wp, wc) = (omega(k, mp), omega(k, mc));
            for (i, &x) in xs.iter().enumerate() {
                let (sp, cp) = (k * (x - x_phi)).sin_cos();
                let (sc, cc) = (k * (x - x_chi) + delta_phi).sin_cos();
                row.phi[i] = a * cp;
                row.u[i] = wp * a * sp;
                row.chi[i] = a * r * cc;
                row.v[i] = sigma_prop * wc * a * r * sc;
            }
        }
        InitialDataSpec::OscillonSeed { a, width_sigma, r, delta_phi, x0, k0 } => {
            let x0 = x0.unwrap_or(0.5 * l);
            let cos_dphi = if delta_phi == 0.5 * PI { 0.0 } else { delta_phi.cos() };
            for (i, &x) in xs.iter().enumerate() {
                let d = wrapped_displacement(x, x0, l);
                let carrier = if k0 != 0.0 { (k0 * d).cos() } else { 1.0 };
                let profile = a * carrier / (d / width_sigma).cosh();
                row.phi[i] = profile;
                row.chi[i] = profile * r * cos_dphi;
            }
        }
    }
    let ny = mesh.ny_eff();
    let extrude = |f: &[f64]| -> Vec<f64> { (0..ny).flat_map(|_| f.iter().copied()).collect() };
    Ok(TimeSlice { phi: extrude(&row.phi), u: extrude(&row.u), chi: extrude(&row.chi), v: extrude(&row.v) })
}

/// Newton starting guess: the slice copied onto every time level.
pub fn seed_slab(slice: &TimeSlice, mesh: &MeshSpec) -> Result<SlabState, InitDataError> {
    slice.check(mesh)?;
    let npl = mesh.nodes_per_level();
    let mut values = Vec::with_capacity(mesh.ndof());
    for _ in 0..mesh.nt {
        for n in 0..npl {
            values.extend_from_slice(&[slice.phi[n], slice.u[n], slice.chi[n], slice.v[n]]);
        }
    }
    Ok(SlabState { values })
}
