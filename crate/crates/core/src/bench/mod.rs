//! Batch benchmark driver behind the `attriq` binary: run configuration,
//! the four commands (explain, evaluate, benchmark, validate), report
//! files, and the exit-code contract.

pub mod config;
pub mod runner;

pub use config::{
    select_metric_columns, DataOptions, ExplainerConfig, InstanceSelection, MetricOptions,
    Modality, RunConfig, ScoreSpace, Task, IMAGE_METHODS, TABULAR_METHODS,
};
pub use runner::{
    execute, Command, Invocation, EXIT_COMPUTE, EXIT_CONFIG, EXIT_INTERNAL, EXIT_IO, EXIT_OK,
};
