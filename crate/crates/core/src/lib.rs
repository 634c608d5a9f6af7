//! Market-clearing simulation and recovery of confidential offer prices from
//! published schedules and nodal prices.
//!
//! The forward side ([`market`], [`scuc`]) clears a day-ahead market on a
//! [`grid::Grid`]: commitment by branch and bound, then a fixed-commitment
//! DC-OPF whose multipliers give the nodal prices. The inverse side
//! ([`inverse`], [`gio`]) turns published prices back into offer estimates.

pub mod error;
pub mod grid;
pub mod market;
pub mod scenario;

pub use error::{ExperimentError, GridError, InverseError, MarketError, ScenarioError};
pub mod dataset;
pub mod inverse;
pub mod gio;
pub mod scuc;
pub mod experiments;
