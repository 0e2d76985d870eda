//! Batch pipeline around the active speaker detection toolkit: synthetic
//! fixtures, training, per-participant detection, evaluation, and
//! cross-validation.

pub mod commands;
pub mod crossval;
pub mod dataset;
pub mod detect;
pub mod error;
pub mod manifest;
pub mod outputs;
pub mod runconfig;
pub mod synth;
