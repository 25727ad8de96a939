//! Experiment orchestration: configuration, pipeline, output.

pub mod compare;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod selftest;

pub use compare::{
    compare_propagators, emit_comparison, u1_unitary, u2_unitary, ComparisonReport, ComparisonRow,
};
pub use config::{
    time_grid, ExperimentConfig, MitigationConfig, ModelConfig, NoiseConfig, Propagator,
};
pub use output::{emit_series, format_significant, read_bundle, Manifest, OutputFormat};
pub use pipeline::{
    prepare_state, run_experiment, step_circuit, CircuitInfo, PreparedState, ResultsBundle,
};
pub use selftest::{mitigation_selftest, tomography_selftest, SelfTestCheck};
