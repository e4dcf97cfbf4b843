//! Config parsing, experiment running and report emission for `maxlab`.

// `!(x > 0.0)` rejects NaN config values as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod gridio;
pub mod report;
pub mod runner;
