//! Synthetic data, experiment grids and report files.

pub mod experiment;
pub mod synthetic;

pub use experiment::{cell_targets, prepare, run_experiment, run_grid, DataSource, ExperimentConfig, ExperimentResult, InstanceRecord, MapMode, VictimSource};
pub use synthetic::{gen_synthetic, SyntheticSpec};
