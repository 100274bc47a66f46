//! Command-line front end for `simdiv`: CSV ingestion, configuration and the
//! `validate`, `entropy`, `vendi`, `spectrum`, `sweep`, `search` and `bench`
//! commands.

pub mod bench;
pub mod commands;
pub mod config;
pub mod io;

pub use commands::{Report, Status};
pub use config::Options;
