//! Library side of the `lurecons` binary: scenario files, subcommands and
//! the artifacts they write.

pub mod commands;
pub mod exit;
pub mod report;
pub mod scenario;
