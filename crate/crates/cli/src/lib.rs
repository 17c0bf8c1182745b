//! Batch driver for the `dualdet` library: JSON experiment configs in,
//! CSV / JSON / whitespace-delimited tables out.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_config_for, parse_config_str, ConfigError, ExperimentConfig, Kind};
pub use report::{emit_report, render, Format, Report};
pub use run::run_experiment;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const TOLERANCE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NONCONVERGENCE: u8 = 3;
}

/// Maps an error chain onto an exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return exit::CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<dualdet::Error>() {
            return match e {
                dualdet::Error::NonConvergence(_) | dualdet::Error::NearPole(_) | dualdet::Error::IllConditioned(_) => exit::NONCONVERGENCE,
                _ => exit::CONFIG,
            };
        }
    }
    exit::CONFIG
}
