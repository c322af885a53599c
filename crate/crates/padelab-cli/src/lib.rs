//! Command-line front end: experiment configs, the on-disk cache, and the
//! sweep runner. The binary in `main.rs` is a thin clap wrapper over these.

pub mod cache;
pub mod config;
pub mod runner;
