//! Command-line driver around the `reachloop` verifier: scenario loading,
//! parallel batch execution over initial cells, JSONL result persistence and
//! CSV report emission.

pub mod batch;
pub mod config;
pub mod report;
