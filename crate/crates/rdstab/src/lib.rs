//! Command-line front end for `rdstab-core`: JSON model ingestion, command
//! dispatch and report/CSV output.

pub mod config;
pub mod output;
pub mod run;
