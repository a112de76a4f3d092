//! File formats, configuration and pipeline orchestration around
//! `reclab-core`: the std companion of the evaluation laboratory.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod interner;
pub mod manifest;
pub mod pipeline;
pub mod timefmt;

pub use error::{LabError, Result};
