//! Config parsing, file formats and subcommands for the `linksched` binary.

pub mod commands;
pub mod config;
pub mod instance;
