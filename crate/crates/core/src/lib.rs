//! Spacetime finite elements for two coupled scalar fields, one of which may
//! carry a negative kinetic term.

pub mod assembly;
pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod driver;
pub mod initdata;
pub mod mms;
pub mod model;
pub mod solver;

pub use assembly::{Mode, SlabProblem, SlabState};
pub use config::{parse_config, parse_config_str, write_config, ConfigError, RunConfig};
pub use diagnostics::{energies, EnergyRecord};
pub use discretization::{Dims, MeshSpec};
pub use driver::{evolve, phi6_amplitude_scan, sweep, DriverError, RunReport, SweepPoint, Termination};
pub use initdata::{InitialDataSpec, SignPolicy, TimeSlice};
pub use mms::{convergence_study, ConvergenceRow, MmsError};
pub use model::{KineticSign, ModelParams, Potential};
pub use solver::{FailureReason, LineSearch, NewtonOptions, NewtonReport, SolverError};
