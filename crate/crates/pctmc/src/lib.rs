//! Parameter estimation for parametric continuous-time Markov chains.
//!
//! A parametric chain assigns each transition a polynomial rate with
//! nonnegative coefficients over a set of parameters. This crate builds
//! such chains directly ([`ParametricCtmc::new`]) or from a guarded-command
//! model source ([`prism`]), simulates them, and estimates parameter values
//! from partially observable executions: sequences of state labels, with or
//! without the dwell time spent between jumps.
//!
//! Estimation maximizes the observed-data likelihood by an
//! expectation-style ascent: a forward-backward sweep over each sequence
//! yields expected dwell times and jump counts ([`estimation::accumulate`]),
//! and a closed-form or single-polynomial-root update lifts every free
//! parameter ([`estimation::fit`] drives the loop). Each step provably does
//! not decrease the likelihood, so the trace is monotone up to roundoff.

pub mod ctmc;
pub mod error;
pub mod estimation;
pub mod observations;
pub mod params;
pub mod polysolve;
pub mod prism;
pub mod rate;

#[cfg(feature = "test-support")]
pub mod testing;

pub use ctmc::{ConcreteCtmc, Label, ParametricCtmc, Transition};
pub use error::{Error, Result};
pub use estimation::{fit, EstimationResult, EstimatorConfig, InitSpec};
pub use observations::{Dataset, ObservationKind, TimedObservation, UntimedObservation};
pub use params::ParamSpace;
pub use rate::{Monomial, RateExpr};
