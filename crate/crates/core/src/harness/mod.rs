//! Experiment runner: parameter sweeps over the stabilization parameter and
//! the permeability, randomized variants, `K_dr` calibration, and output
//! files.

pub mod cases;
pub mod config;
pub mod output;
pub mod sweep;

pub use cases::{build_problem, manufactured_solution, Modification, TestCase};
pub use config::{BetaMode, DeltaGrid, ExperimentConfig, KdrExpression, RandomMode};
pub use output::{
    emit_outputs, read_csv, read_sweep_csv, render_svg, run_json, write_csv, write_csv_string,
    OutputPaths,
};
pub use sweep::{
    calibrate_kdr, draw_realization, empirical_argmin, run_randomized, run_sweep,
    CalibrationResult, CalibrationSettings, ResolvedConstants, SweepResult, SweepRow,
};
