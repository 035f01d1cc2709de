//! Scenario files, seeded Monte Carlo sweeps and result files.

pub mod config;
pub mod csv;
pub mod theory;
pub mod trial;

pub use config::{ChannelConfig, ChannelModel, DetectorList, ScenarioConfig};
pub use csv::{emit_csv, read_csv, CSV_HEADER};
pub use theory::qpsk_ber;
pub use trial::{
    run_scenario, run_scenario_with, run_trial, run_trial_with, trial_rng, BerRecord, TrialCounts,
};
