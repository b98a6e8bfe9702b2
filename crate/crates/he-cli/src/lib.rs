//! The `he` experiment runner: JSON configs in, JSON reports and CSV traces
//! out.

pub mod commands;
pub mod config;
pub mod report;
pub mod self_test;
