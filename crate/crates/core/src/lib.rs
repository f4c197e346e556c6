//! Gradient descent with bounded, possibly non-diminishing gradient errors.
//!
//! The recursion `x_{n+1} = x_n - γ(n) g(x_n)` is run with a gradient sample
//! `g(x_n)` drawn from the ball `∇f(x_n) + B̄_ε(0)`. The crate provides:
//!
//! - [`objective`]: random positive definite quadratics `f(x) = xᵀQx`.
//! - [`gradient_sources`]: exact, constant-error, bounded-noise, SPSA with a
//!   constant sensitivity parameter, Newton-direction and linear-field oracles.
//! - [`schedules`]: step-size sequences and the square-summability checker.
//! - [`engine`]: the iteration itself, with divergence guards and run records.
//! - [`diagnostics`]: interpolated trajectories, time windows, rescaling,
//!   contraction reports and the scaled-field limit.
//! - [`harness`]: deterministic experiment sweeps and CSV output.
//!
//! Runnable walkthroughs of each capability live under `examples/`:
//!
//! ```bash
//! cargo run --release --example spsa_constant_c
//! ```

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod gradient_sources;
pub mod harness;
pub mod objective;
pub mod schedules;

pub use diagnostics::{
    contraction_report, interpolate, neighborhood_check, partition_windows, rescale,
    scaled_field, InterpolatedTrajectory, StabilityReport, Verdict, WindowPartition,
};
pub use engine::{run, run_sweep, RunConfig, RunRecord, RunStatus};
pub use error::{Error, Result};
pub use gradient_sources::{GradientOracle, Perturbation};
pub use harness::{CellSummary, Experiment, SweepSpec};
pub use objective::{QuadraticObjective, SpectrumSpec};
pub use schedules::{A2Report, A2Verdict, StepSchedule};

/// Vector type used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix type used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
