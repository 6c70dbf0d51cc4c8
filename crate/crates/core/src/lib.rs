//! Allocation-only core of the endpoint benchmarking engine.
//!
//! Everything in this crate is pure computation over in-memory values: the
//! endpoint registry model and its built-in catalogs, the deterministic
//! simulated fleet, probe and eval harnesses written against the
//! [`client::EndpointClient`] trait, output-distribution fidelity, modeled
//! energy, composite scoring and the robustness analyses. File formats, the
//! persistent store, the HTTP service and the CLI live in the `endpointbench`
//! companion crate.
//!
//! The crate is `#![no_std]` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod client;
pub mod energy;
pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod probe;
pub mod registry;
pub mod rng;
pub mod scoring;
pub mod sim;
pub mod snapshot;
pub mod stats;
pub mod time;

pub use error::{Error, Result};
pub use registry::{
    Decoding, Endpoint, EndpointId, Factor, FactorWeights, HardwareClass, ModelFamily, Precision,
    Provider, ProviderCategory, Region, Registry, RegistryParts, WorkloadPreset,
};
pub use time::{TimeWindow, Timestamp};
