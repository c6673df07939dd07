//! Verification suites, reports and commands behind the `conelab` binary.

pub mod chart_ref;
pub mod commands;
pub mod report;
pub mod settings;
pub mod suites;
