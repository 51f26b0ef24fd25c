//! Multi-classifier interactive learning (MCIL).
//!
//! Several small, architecturally different classifiers are trained on the
//! clearest labeled samples, vote ambiguous labels onto an unlabeled pool,
//! and are then fine-tuned on those label distributions with a KL
//! objective. The crate also carries the psychometric model of optimally
//! interacting observers and the accuracy/consistency metrics used to
//! evaluate the approach.

pub mod cli;
pub mod data;
pub mod error;
pub mod labeling;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod psychometric;

pub use error::{Error, Result};
