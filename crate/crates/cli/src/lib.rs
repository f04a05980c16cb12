//! Library half of the `freshcrawl` binary: crawl-log ingestion, the TOML
//! config, and the subcommands.

// `!(x > 0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;

pub use error::{CliError, CliResult};
pub use ingest::{ingest_crawl_log, ingest_crawl_log_path, CrawlLogRecord, IngestReport};
