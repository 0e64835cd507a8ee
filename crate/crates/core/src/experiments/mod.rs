//! Config-driven experiment runs that write JSON reports and CSV sweeps.

mod config;
mod runs;

pub use config::{
    config_hash, BackendChoice, ExperimentConfig, ExperimentKind, GeneratorSpec, LoadedConfig, LocalizeConfig, MeasurementConfig, ModelConfig,
    ModelKindConfig, RepresentationConfig, SweepConfig,
};
pub use runs::{
    describe_files, run_decay, run_experiment, run_index, run_localize, run_measure_sweep, run_string_order, CocycleRow, DecayRow, ElementLabel,
    IndexReport, IndexTable, LocalizeReport, MeasureRow, Meta, RunContext, RunOutput, StringOrderRow, TrialKind, TruncationTrial,
};
