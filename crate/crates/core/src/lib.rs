//! Multi-specialist answering with self-verification and calibrated fusion
//! for medical multiple-choice questions.

pub mod agents;
pub mod backend;
pub mod config;
pub mod dataset;
pub mod fusion;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod verification;

#[cfg(any(test, feature = "fixtures"))]
pub mod fixtures;
