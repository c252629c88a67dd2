//! Experiment harness: configuration, sweeps and result files.

mod config;
mod emit;
mod sweep;

pub use config::{
    BetaSpec, Cell, ExperimentConfig, Family, GraphSpec, K0Spec, OutputSpec, Protocol, ScheduleSpec, StopSpec,
    SweepAxes, YSource,
};
pub use emit::{
    compare_rows, write_compare_csv, write_report, write_summary_csv, CompareRow, COMPARE_HEADER, SUMMARY_HEADER,
};
pub use sweep::{
    build_cell_graph, build_observations, run_experiment, CellOutcome, ExperimentReport, RunArtifact, RunMode,
    SummaryRow,
};
