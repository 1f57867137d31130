//! Post-hoc explanations for tabular black-box models.
//!
//! The crate is organised around a black-box [`Model`](model::Model):
//!
//! - [`surrogate`]: linear attributions over the anchor/baseline hypercube
//!   (single-flip edges, Shapley, Banzhaf, kernel-weighted fits), gradient
//!   sensitivity, a distilled global tree and case-based neighbours.
//! - [`counterfactual`]: penalty-schedule search for the nearest input that
//!   reaches a target score or class, with a brute-force grid oracle.
//! - [`fidelity`]: where a surrogate can be trusted: agreement against the
//!   model as the neighbourhood grows, per-feature analogy classes, and
//!   scheme-versus-scheme divergence.
//! - [`service`] and [`cli`]: a session-based HTTP facade with an audit
//!   log, and a batch command line over the same calls.

// `!(a < b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod counterfactual;
pub mod dataset;
pub mod error;
pub mod fidelity;
pub mod fixtures;
pub mod model;
pub mod schema;
pub mod service;
pub mod surrogate;

pub use dataset::{compute_stats, Dataset, FeatureStats};
pub use error::{Error, Result};
pub use model::{load_model, Model, OutputSelector, PredictionOutput};
pub use schema::{DataPoint, FeatureKind, FeatureSpec, Schema};

/// Version string stamped into every output document.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
