//! Library side of the `stie` binary: configuration schema, subcommand
//! implementations, and output-file writers, exposed so integration tests
//! can drive them directly.

pub mod commands;
pub mod config;
pub mod output;
