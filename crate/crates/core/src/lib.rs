//! Short-pulse shock formation for the radial quasilinear wave equation
//! `-(1 + (d_t phi)^p) d_t^2 phi + lap phi = 0`.
//!
//! The crate builds short-pulse data, evolves it with a method-of-lines
//! solver, traces outgoing characteristics to follow the inverse foliation
//! density `mu`, and compares the measured blow-up with leading-order
//! predictions.

pub mod acoustic_geometry;
pub mod asymptotics;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod profile;
pub mod pulse_data;
pub mod radial_solver;

pub use acoustic_geometry::{CharacteristicFan, FanPoint, FanSample, FanTracker, MuSample, NullFrame};
pub use asymptotics::{CriticalData, Prediction};
pub use diagnostics::{Psi, ResidualReport};
pub use error::{Error, Result};
pub use grid::RadialGrid;
pub use harness::{BlowupReport, RunConfig};
pub use profile::{make_profile, Profile, ProfileKind};
pub use pulse_data::{PulseParams, ShockMargin};
pub use radial_solver::{BlowupEvent, BlowupThresholds, BlowupTrigger, FieldState, StepRule};
