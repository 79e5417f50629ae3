//! Motion planning and safe tracking control for the one-phase Stefan problem
//! with second-order interface dynamics.
//!
//! The numerical core ([`jet`], [`reference`], [`planner`], [`solver`],
//! [`controller`], [`diagnostics`]) is generic over [`Real`]; scenario files,
//! CSV records and the verification suite work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod controller;
pub mod diagnostics;
pub mod error;
pub mod jet;
pub mod planner;
pub mod records;
pub mod reference;
pub mod scalar;
pub mod scenario;
pub mod solver;
pub mod tridiag;
pub mod verify;

pub use controller::{control_flux, EnergyShapingController, SafetyFlags, SafetyMonitor};
pub use error::{Result, StefanError};
pub use jet::Jet;
pub use planner::{PhysicalParams, Planner, SeriesPlan};
pub use records::TrajectoryRecord;
pub use reference::{GevreyCertificate, ReferenceParams, ReferenceTrajectory};
pub use scalar::Real;
pub use scenario::{Scenario, ScenarioConfig};
pub use solver::{SimState, SolverConfig, StefanSolver};

pub type Jet64 = Jet<f64>;
pub type Jet32 = Jet<f32>;
pub type Planner64 = Planner<f64>;
pub type SeriesPlan64 = SeriesPlan<f64>;
pub type Reference64 = ReferenceTrajectory<f64>;
pub type Solver64 = StefanSolver<f64>;
pub type State64 = SimState<f64>;
pub type Physical64 = PhysicalParams<f64>;
