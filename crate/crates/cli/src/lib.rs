//! Command-line front end: configuration, CSV ingestion, the `simulate`,
//! `fit`, `forecast`, `evaluate` and `montecarlo` commands, and artifact
//! writers.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;

pub use args::Cli;
pub use commands::run;
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use ingest::{ingest_csv, Alignment, DateConvention, DatedPanel, IngestError, IngestSpec};
