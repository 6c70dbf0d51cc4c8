//! The committed chat ranking is checked against the Rust scorer here and
//! against an independent Python recomputation when python3 is available.

mod common;

use std::process::Command;

use endpointbench::canon::CsvFile;
use endpointbench::fixture;
use endpointbench_core::scoring::{rank_leaderboard, Scope, ScoringConfig};

fn golden_path() -> std::path::PathBuf {
    fixture::committed().root.join("golden/chat_full.csv")
}

#[test]
fn scorer_matches_golden() {
    let f = common::shared();
    let chat = f.bundle.registry.preset("chat").unwrap();
    let ranked = rank_leaderboard(&f.bundle.registry, &f.snapshot, chat, &Scope::Full, &ScoringConfig::default()).unwrap();
    let golden = CsvFile::read(&golden_path()).unwrap();
    assert_eq!(ranked.len(), golden.len());
    for (s, g) in ranked.iter().zip(golden.rows()) {
        let cols = ["provider", "model", "sku", "precision", "decoding", "region"];
        let gid = cols.map(|c| g.str(c).unwrap()).join("/");
        assert_eq!(s.endpoint.to_string(), gid, "rank {}", s.rank);
        assert!((s.score - g.f64("score").unwrap()).abs() < 1e-9, "{gid}");
    }
}

#[test]
fn oracle_reproduces_golden() {
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/oracle/chat_golden.py");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chat_full.csv");
    let status = Command::new("python3")
        .arg(script)
        .arg(common::registry_dir())
        .arg(common::snapshot_dir())
        .arg(&out)
        .status();
    match status {
        Ok(s) => assert!(s.success()),
        Err(e) => {
            eprintln!("skipping oracle comparison, python3 unavailable: {e}");
            return;
        }
    }
    assert_eq!(std::fs::read(out).unwrap(), std::fs::read(golden_path()).unwrap());
}
