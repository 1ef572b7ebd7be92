//! Experiment driver for sparse packetized predictive control: JSON config in,
//! run manifest, per-step traces and Monte Carlo aggregates out.
//!
//! Output files:
//!
//! - `manifest.json`: resolved config, plant realization, synthesis values and
//!   every invariant check.
//! - `trace.csv`: `k,norm_x,l0_u,dropped,input,design_time_us`, one row per
//!   step including `k = 0`.
//! - `aggregate.csv`: `k,mean_norm_x_omp,mean_l0_omp` and, for the ℓ¹
//!   baseline, `mean_norm_x_l1,mean_l1_l0`.
//! - `summary.json`: per solver, decay slope of `ln(mean_norm_x)` over the
//!   final half, mean sparsity and mean design time.
//!
//! Floats are written with 17 significant digits. `design_time_us` is wall
//! clock and the only field that differs between identical runs.

pub mod config;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, ExplicitPlant, PlantSpec, PolePlant, PoleSpec, SolverChoice, WeightSpec};
pub use error::CliError;
pub use run::{cmd_montecarlo, cmd_simulate, cmd_synthesize, MonteCarloReport, Parallelism, Prepared};
