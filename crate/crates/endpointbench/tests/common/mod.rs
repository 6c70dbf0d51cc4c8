#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use endpointbench::fixture;
use endpointbench::registry_io::RegistryBundle;
use endpointbench::snapshot_io;
use endpointbench_core::snapshot::Snapshot;

pub struct Fixture {
    pub bundle: RegistryBundle,
    pub snapshot: Snapshot,
}

pub fn snapshot_dir() -> PathBuf {
    fixture::committed().snapshot(fixture::VERSION)
}

pub fn registry_dir() -> PathBuf {
    fixture::committed().registry()
}

pub fn load() -> Fixture {
    let bundle = RegistryBundle::load(&registry_dir()).unwrap();
    let snapshot = snapshot_io::import(&snapshot_dir(), &bundle).unwrap();
    Fixture { bundle, snapshot }
}

/// The committed fixture, loaded once per test binary.
pub fn shared() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(load)
}
