//! Detects unnecessary stubbings in class-based test suites and rewrites the
//! suite source to remove them, preserving test outcomes.
//!
//! The pipeline: run the suite under an instrumented stubbing harness,
//! collect an execution-info trace, group and classify the stubbing
//! definitions that led to unnecessary stubbings, edit the suite source per
//! classification, and report the changes together with LOC and cognitive
//! complexity deltas.

pub mod classify;
pub mod lang;
pub mod metrics;
pub mod pipeline;
pub mod refactor;
pub mod report;
pub mod runner;
pub mod shim;
pub mod suite;
pub mod trace;
