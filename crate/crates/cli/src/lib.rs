//! Configuration-driven runs of the biot-mrfem solver: single solves, time
//! loops, convergence studies and preconditioner sweeps.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{load_config, run, CliError};
