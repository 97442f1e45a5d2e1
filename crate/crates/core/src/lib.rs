//! Episode-level sample filtering for offline reinforcement learning
//! datasets, with small tabular environments, three policy-constraint
//! learners and an evaluation harness.
//!
//! The usual flow: [`env::generate_dataset`] (or [`dataset::load_dataset`]),
//! [`filter::partition`] + [`filter::apply_filter`], [`learn::train`], then
//! [`eval::rollout_return`].

pub mod dataset;
pub mod env;
pub mod error;
pub mod eval;
pub mod filter;
mod fsutil;
pub mod learn;
pub mod rng;

pub use error::{Error, Result};
