//! Reputation-weighted robust aggregation for federated learning.
//!
//! The crate is `no_std` (with `alloc`): every routine here is a pure
//! computation over parameter vectors and per-client state. IO, timing,
//! configuration files and the experiment loop live in `flare-sim`.
//!
//! Module map:
//!
//! - [`vector`] dense parameter vectors and cosine similarity
//! - [`rng`] seeded substreams keyed by purpose, client and round
//! - [`config`] hyperparameters and their invariants
//! - [`client`] per-client persistent state
//! - [`reputation`] consistency / anomaly / temporal evidence and dynamic weights
//! - [`assessment`] adaptive threshold, classification, decay and recovery
//! - [`aggregation`] clipping, local DP, FLARE and baseline aggregators
//! - [`adversary`] the six attack behaviours
//! - [`simenv`] synthetic non-IID classification task
//! - [`metrics`] detection, robustness and convergence measurements

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod aggregation;
pub mod assessment;
pub mod client;
pub mod config;
mod error;
pub(crate) mod math;
pub mod metrics;
pub mod reputation;
pub mod rng;
pub mod simenv;
pub mod vector;

pub use adversary::{AttackSpec, CollusionPool, SmSchedule};
pub use aggregation::AggregatorKind;
pub use assessment::{AttackPattern, Class, Classification, ThresholdState};
pub use client::{ClientState, Role};
pub use config::HyperParams;
pub use error::{Error, Result};
pub use reputation::{DynamicWeights, VarianceTracker};
pub use rng::{Purpose, RngStream, SubStream};
pub use vector::{cosine_similarity, ModelVector};
