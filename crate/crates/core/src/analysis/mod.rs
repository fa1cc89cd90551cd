//! Experiments: overhead sweeps, lower-bound gaps and tail-bound checks.

pub mod experiment;
pub mod gf256;
pub mod lower_bound;
pub mod oracle;
pub mod report;
pub mod stats;
pub mod sweep;
pub mod tail;
