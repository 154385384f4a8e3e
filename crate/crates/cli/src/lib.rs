//! Experiment runner behind the `fracdose` binary.

pub mod commands;
pub mod config;
pub mod io;
pub mod manifest;
pub mod policy;
pub mod report;
