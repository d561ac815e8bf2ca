//! Physical model: field masses, the sign of the second kinetic term, and the
//! interaction potentials `V(phi, chi)` with their first and second derivatives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("operation `{0}` is not available for the manufactured-solution potential")]
    UnsupportedForMms(&'static str),
    #[error("manufactured-solution potential is singular at phi = {phi}, chi = {chi}")]
    SingularPotential { phi: f64, chi: f64 },
    #[error("invalid model parameter: {0}")]
    Invalid(String),
}

/// Sign in front of the `chi` kinetic term. `Ghost` is the negative-energy case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum KineticSign {
    Normal,
    Ghost,
}

impl KineticSign {
    pub fn value(self) -> f64 {
        match self {
            KineticSign::Normal => 1.0,
            KineticSign::Ghost => -1.0,
        }
    }
}

impl TryFrom<i64> for KineticSign {
    type Error = String;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(KineticSign::Normal),
            -1 => Ok(KineticSign::Ghost),
            other => Err(format!("gamma must be +1 or -1, got {other}")),
        }
    }
}

impl From<KineticSign> for i64 {
    fn from(s: KineticSign) -> i64 {
        match s {
            KineticSign::Normal => 1,
            KineticSign::Ghost => -1,
        }
    }
}

/// Interaction potential between the two fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "potential", rename_all = "snake_case")]
pub enum Potential {
    /// Free fields.
    None,
    /// `lambda22 * phi^2 * chi^2`.
    V22 { lambda22: f64 },
    /// `m^2 W / 2 - lambda W^2 / 4 + g W^3 / 6` with `W = phi^2 + chi^2`.
    LiftedPhi6 { m: f64, lambda: f64, g: f64 },
    /// Gradient-only potential used by the manufactured-solution runs.
    Mms { lambda: f64 },
}

/// Second derivatives of a potential. The cross term is shared.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hessian {
    pub phi_phi: f64,
    pub phi_chi: f64,
    pub chi_chi: f64,
}

/// `V = self_phi(phi) + self_chi(chi) + interaction(phi, chi)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PotentialSplit {
    pub self_phi: f64,
    pub self_chi: f64,
    pub interaction: f64,
}

/// Pieces `A`, `B`, `C` of the manufactured-solution potential.
#[inline]
fn mms_terms(phi: f64, chi: f64) -> Result<(f64, f64, f64), ModelError> {
    let d = phi * phi - chi * chi;
    let a = d + 1.0;
    let c = d - 1.0;
    let b = c * c + 4.0 * phi * phi;
    // b >= 1 for real arguments; this only trips on NaN input.
    if !(b > 0.0) || !b.is_finite() {
        return Err(ModelError::SingularPotential { phi, chi });
    }
    Ok((a, b, c))
}

impl Potential {
    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::Invalid(format!("{name} must be finite")))
            }
        };
        match *self {
            Potential::None => Ok(()),
            Potential::V22 { lambda22 } => finite("lambda22", lambda22),
            Potential::LiftedPhi6 { m, lambda, g } => {
                finite("m", m)?;
                finite("lambda", lambda)?;
                finite("g", g)?;
                if g > 0.0 {
                    Ok(())
                } else {
                    Err(ModelError::Invalid("lifted phi^6 potential requires g > 0".into()))
                }
            }
            Potential::Mms { lambda } => finite("lambda", lambda),
        }
    }

    pub fn is_mms(&self) -> bool {
        matches!(self, Potential::Mms { .. })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Potential::None)
    }

    pub fn value(&self, phi: f64, chi: f64) -> Result<f64, ModelError> {
        Ok(match *self {
            Potential::None => 0.0,
            Potential::V22 { lambda22 } => lambda22 * phi * phi * chi * chi,
            Potential::LiftedPhi6 { m, lambda, g } => {
                let w = phi * phi + chi * chi;
                0.5 * m * m * w - 0.25 * lambda * w * w + g * w * w * w / 6.0
            }
            Potential::Mms { .. } => return Err(ModelError::UnsupportedForMms("potential_value")),
        })
    }

    /// `(dV/dphi, dV/dchi)`.
    #[inline]
    pub fn grad(&self, phi: f64, chi: f64) -> Result<(f64, f64), ModelError> {
        Ok(match *self {
            Potential::None => (0.0, 0.0),
            Potential::V22 { lambda22 } => {
                (2.0 * lambda22 * phi * chi * chi, 2.0 * lambda22 * phi * phi * chi)
            }
            Potential::LiftedPhi6 { m, lambda, g } => {
                let w = phi * phi + chi * chi;
                let dv_dw = 0.5 * m * m - 0.5 * lambda * w + 0.5 * g * w * w;
                (2.0 * phi * dv_dw, 2.0 * chi * dv_dw)
            }
            Potential::Mms { lambda } => {
                let (a, b, c) = mms_terms(phi, chi)?;
                let b32 = b * b.sqrt();
                (-2.0 * lambda * phi * a / b32, 2.0 * lambda * chi * c / b32)
            }
        })
    }

    #[inline]
    pub fn hess(&self, phi: f64, chi: f64) -> Result<Hessian, ModelError> {
        Ok(match *self {
            Potential::None => Hessian::default(),
            Potential::V22 { lambda22 } => Hessian {
                phi_phi: 2.0 * lambda22 * chi * chi,
                phi_chi: 4.0 * lambda22 * phi * chi,
                chi_chi: 2.0 * lambda22 * phi * phi,
            },
            Potential::LiftedPhi6 { m, lambda, g } => {
                let w = phi * phi + chi * chi;
                let dv_dw = 0.5 * m * m - 0.5 * lambda * w + 0.5 * g * w * w;
                let d2v_dw2 = -0.5 * lambda + g * w;
                Hessian {
                    phi_phi: 2.0 * dv_dw + 4.0 * phi * phi * d2v_dw2,
                    phi_chi: 4.0 * phi * chi * d2v_dw2,
                    chi_chi: 2.0 * dv_dw + 4.0 * chi * chi * d2v_dw2,
                }
            }
            Potential::Mms { lambda } => {
                let (a, b, c) = mms_terms(phi, chi)?;
                let b52 = b * b * b.sqrt();
                Hessian {
                    phi_phi: -2.0 * lambda * ((a + 2.0 * phi * phi) * b - 6.0 * phi * phi * a * a) / b52,
                    phi_chi: 4.0 * lambda * phi * chi * (b - 3.0 * a * c) / b52,
                    chi_chi: 2.0 * lambda * ((c - 2.0 * chi * chi) * b + 6.0 * chi * chi * c * c) / b52,
                }
            }
        })
    }

    /// Splits `V` into the two self-interactions and the cross term.
    pub fn split(&self, phi: f64, chi: f64) -> Result<PotentialSplit, ModelError> {
        if self.is_mms() {
            return Err(ModelError::UnsupportedForMms("split_potential"));
        }
        let total = self.value(phi, chi)?;
        let self_phi = self.value(phi, 0.0)?;
        let self_chi = self.value(0.0, chi)?;
        Ok(PotentialSplit {
            self_phi,
            self_chi,
            interaction: total - self_phi - self_chi,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m_phi: f64,
    pub m_chi: f64,
    pub gamma: KineticSign,
    pub potential: Potential,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            m_phi: 1.0,
            m_chi: 1.0,
            gamma: KineticSign::Ghost,
            potential: Potential::V22 { lambda22: 1.0 },
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, m) in [("m_phi", self.m_phi), ("m_chi", self.m_chi)] {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(ModelError::Invalid(format!("{name} must be finite and >= 0, got {m}")));
            }
        }
        self.potential.validate()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.value()
    }
}
