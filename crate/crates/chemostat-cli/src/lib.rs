//! Command-line front end for the chemostat toolkit: JSON run configs,
//! frozen study presets, CSV time-series export, batch sweeps, golden-file
//! regression comparison, and renewal-equation diagnostics.
//!
//! Exit codes: 0 success, 1 config or file-system problem, 2 numerical
//! abort during a run, 3 golden-file divergence.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
