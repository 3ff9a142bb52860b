//! Grammar-aware coverage-guided fuzzing.

pub mod coverage;
pub mod grammar;
pub mod harness;
pub mod trim;
pub mod mutate;
pub mod campaign;
pub mod report;
