//! Std companion to `endpointbench-core`: canonical CSV formats for the
//! registry, simulated fleet and snapshots, the append-only store, the
//! simulation pipeline, the reproducible fixture, report tables, the HTTP
//! service and the `epbench` command line.

pub mod api;
pub mod canon;
pub mod cli;
pub mod error;
pub mod fixture;
pub mod fleet_io;
pub mod pipeline;
pub mod registry_io;
pub mod report;
pub mod snapshot_io;
pub mod store;

pub use error::{Error, Result};
