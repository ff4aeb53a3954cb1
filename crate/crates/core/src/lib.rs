//! Spatiotemporal event privacy for released location traces.

pub mod bench;
pub mod checker;
pub mod commands;
pub mod config;
pub mod error;
pub mod event;
pub mod experiment;
pub mod lppm;
pub mod markov;
pub mod oracle;
pub mod runtime;
pub mod simkit;
pub mod stats;

pub use error::{Error, Result};
