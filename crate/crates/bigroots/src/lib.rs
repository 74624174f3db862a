//! Offline root-cause analysis of stragglers in big-data task traces.
//!
//! A *straggler* is a task whose duration exceeds a multiple (default 1.5x)
//! of the median task duration within its stage. This crate ingests a task
//! event log together with node-level resource utilization samples, computes
//! a per-task feature vector (framework counters plus windowed resource
//! means), and applies statistical identification rules to name the feature
//! responsible for each straggler:
//!
//! - numeric features (byte-counter factors) must exceed both a global
//!   quantile of the stage and a multiple of their peer-group aggregate,
//!   evaluated separately against same-node and other-node peers;
//! - time features (GC / serialization factors) additionally need a fixed
//!   lower bound so insignificant blocking time is never blamed;
//! - resource features (CPU / disk / network) pass an edge filter that
//!   discards utilization the task itself generated (rises at task start,
//!   falls at task end);
//! - the locality feature is blamed only when the straggler reads remotely
//!   while normal tasks mostly read locally.
//!
//! A Pearson-correlation baseline ([`pcc`]), a seeded synthetic trace
//! generator with resource-anomaly injection ([`synth`]), and a ground-truth
//! evaluation harness with ROC/AUC sweeps ([`eval`]) support head-to-head
//! verification of the rule set.
//!
//! See the crate examples for end-to-end walkthroughs of each capability,
//! and the `bigroots` binary for the batch CLI (`analyze`, `gen-trace`,
//! `evaluate`, `sweep`).

pub mod cli;
pub mod detect;
mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod model;
pub mod pcc;
pub mod report;
pub mod rootcause;
pub mod synth;

pub use error::{Error, Result};
