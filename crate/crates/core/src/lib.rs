//! Core algorithms for an offline/online recommender evaluation laboratory.
//!
//! Everything in this crate is pure computation over in-memory data: corpus
//! filtering and temporal splitting, item embedding training, content-based
//! similarity, recommendation pipelines with novelty/diversity re-ranking,
//! offline ranking metrics, grid analysis (correlations, Pareto front,
//! candidate selection), online click/visit accounting, and meta-regression
//! from offline metrics to online rates.
//!
//! The crate is `no_std` (with `alloc`); file formats, configuration and the
//! command-line front end live in the companion `reclab` crate.

#![no_std]
// Index loops are the clearer idiom in the numeric kernels here.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cbsim;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod grid;
pub mod math;
pub mod meta;
pub mod metrics;
pub mod online;
pub mod recommender;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod text;

pub use error::CoreError;

/// Seconds in one day; timestamps throughout are UTC epoch seconds.
pub const SECS_PER_DAY: i64 = 86_400;
