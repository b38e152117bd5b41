//! Variable importance as the drop in population predictiveness when a
//! feature group is removed, with cross-fitted and sample-split estimators,
//! a one-sided test of `ψ ≤ β`, and coarsened-data extensions.
//!
//! Each capability has a runnable program under `examples/`; start with
//! `cargo run --example crossfit_vim`.

pub mod cli;
pub mod coarsened;
pub mod data;
pub mod error;
pub mod estimators;
pub mod folds;
pub mod inference;
pub mod learners;
pub mod measures;
pub mod result;
pub mod rng;
pub mod simulation;

pub use data::{Dataset, FeatureSet, OutcomeKind};
pub use error::{ErrorClass, Result, VimError};
pub use measures::{Measure, MeasureKind};
pub use result::{PredictivenessEstimate, VimResult};
