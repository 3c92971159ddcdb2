//! Two-party Bell-pair ensemble simulator and statistics toolkit.
//!
//! Bob measures his halves of shared Bell pairs and thereby prepares
//! ensembles of collapsed qubits on Alice's side. The crate models what
//! finite ensembles actually look like (their density matrices fluctuate),
//! the classical pruning message that makes two preparations agree exactly,
//! the collective fluctuation statistic that then tells them apart, and the
//! event timelines showing that every successful distinction waited for a
//! classical message.
//!
//! Modules:
//! - [`quantum`]: states, axes, Born probabilities, pair collapse
//! - [`ensemble`]: ensemble preparation, density matrices, imbalance, pruning
//! - [`protocols`]: two-party protocols over a finite-latency channel
//! - [`stats`]: exact binomial oracle and the estimators used to score runs
//! - [`experiment`]: seeded batch experiment runner behind the CLI

pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod protocols;
pub mod quantum;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
