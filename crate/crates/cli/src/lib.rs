//! Command-line front end and benchmark harness.

pub mod app;
pub mod bench;
