//! Config-driven runner for the noisebath pipeline: one JSON document per
//! experiment, presets for the three worked examples, and file outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod presets;
