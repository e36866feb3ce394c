//! Event-driven agent-based simulator of indoor air quality.
//!
//! Agents follow schedule-driven activities across the rooms of a building
//! over one simulated day; each room carries a well-mixed box model of CO₂
//! and airborne quanta, and each agent accumulates inhaled CO₂ and quanta.
//! On top of the single-day engine sit a seeded Monte Carlo batch runner and
//! a statistical pipeline comparing experiment configurations against a
//! baseline.

pub mod aerosol;
pub mod batch;
pub mod behavior;
pub mod cli;
pub mod config;
pub mod engine;
pub mod history;
pub mod metrics;
pub mod plot;
pub mod scenario;
pub mod stats;

pub use config::{parse_config, serialize_config, SimulationConfig};
pub use engine::run_day;
pub use history::RunHistory;

/// Entry point for the `iaqsim` binary; returns the process exit code.
pub fn cli_main() -> i32 {
    cli::main()
}
