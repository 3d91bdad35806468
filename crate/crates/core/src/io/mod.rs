//! Configuration, snapshots, CSV output and run orchestration.

pub mod config;
pub mod csv;
pub mod run;
pub mod snapshot;

pub use config::{parse_config, SimConfig, TimeStep};
pub use csv::{DiagRecord, DiagTable, DiagWriter};
pub use run::{
    run_diagnose, run_dispersion, run_simulate, run_sweep, DispersionResult, RunSummary, Simulation, SweepAxis,
    SweepEntry,
};
pub use snapshot::Snapshot;
