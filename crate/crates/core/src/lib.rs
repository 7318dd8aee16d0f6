//! Active continual learning laboratory.
//!
//! A desk-scale library and harness for studying active learning (AL)
//! under continual learning (CL): an MLP engine with analytic gradients,
//! a catalog of CL update rules (finetuning, EWC, experience replay,
//! AGEM, GDumb, DER/DER++, iCaRL) and AL acquisition functions (random,
//! entropy, min-margin, BADGE, coreset, embedding k-means), the training
//! loop that interleaves per-task annotation rounds with continual
//! updates, and the forgetting/learning metric suite.
//!
//! Everything is deterministic given a master seed: identical inputs
//! produce byte-identical run logs.

pub mod al;
pub mod cl;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod report;
pub mod seeds;
pub mod streams;

pub use error::{Error, Result};
