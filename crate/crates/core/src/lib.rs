//! Joint 3D UAV placement and NOMA power allocation with a dueling deep-Q
//! agent.
//!
//! The crate is layered bottom-up: [`channel`] and [`noma`] hold the link
//! physics, [`env`] the decision process, [`nn`] and [`agent`] the learner,
//! [`harness`] and [`baselines`] the experiments, and [`config`] the file
//! format shared with the `uavnoma` binary.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
mod linalg;
pub mod manifest;
pub mod nn;
pub mod noma;
pub mod rng;

pub use error::{Error, Result};
