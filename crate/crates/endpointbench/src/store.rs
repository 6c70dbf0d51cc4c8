//! Append-only measurement store: one NDJSON log per record kind, replayed
//! into an in-memory per-endpoint index on open.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use endpointbench_core::eval::EvalRun;
use endpointbench_core::fingerprint::Fingerprint;
use endpointbench_core::probe::{ProbeConditions, ProbeRecord};
use endpointbench_core::{EndpointId, Registry, TimeWindow, Timestamp};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Probe,
    Eval,
    Fingerprint,
}

impl RecordKind {
    fn file_name(self) -> &'static str {
        match self {
            RecordKind::Probe => "probe_records.ndjson",
            RecordKind::Eval => "eval_runs.ndjson",
            RecordKind::Fingerprint => "fingerprints.ndjson",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Probe(ProbeRecord),
    Eval(EvalRun),
    Fingerprint(Fingerprint),
}

impl Record {
    pub fn kind(&self) -> RecordKind {
        match self {
            Record::Probe(_) => RecordKind::Probe,
            Record::Eval(_) => RecordKind::Eval,
            Record::Fingerprint(_) => RecordKind::Fingerprint,
        }
    }
}

trait Keyed {
    fn endpoint(&self) -> &EndpointId;
    fn time(&self) -> Timestamp;
}

impl Keyed for ProbeRecord {
    fn endpoint(&self) -> &EndpointId {
        &self.endpoint
    }
    fn time(&self) -> Timestamp {
        self.request_time
    }
}

impl Keyed for EvalRun {
    fn endpoint(&self) -> &EndpointId {
        &self.endpoint
    }
    fn time(&self) -> Timestamp {
        self.window.start
    }
}

impl Keyed for Fingerprint {
    fn endpoint(&self) -> &EndpointId {
        &self.endpoint
    }
    fn time(&self) -> Timestamp {
        self.capture_time
    }
}

struct Log<T> {
    rows: Vec<T>,
    by_endpoint: BTreeMap<EndpointId, Vec<usize>>,
    sink: Option<(PathBuf, BufWriter<File>)>,
}

impl<T: Keyed + Serialize + DeserializeOwned + Clone> Log<T> {
    fn empty() -> Self {
        Log {
            rows: Vec::new(),
            by_endpoint: BTreeMap::new(),
            sink: None,
        }
    }

    fn open(path: PathBuf) -> Result<Self> {
        let mut log = Log::empty();
        if path.exists() {
            let file = File::open(&path).map_err(Error::io(&path))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(Error::io(&path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: i as u64 + 1,
                    column: "record".into(),
                    msg: e.to_string(),
                })?;
                log.index(row);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(Error::io(&path))?;
        log.sink = Some((path, BufWriter::new(file)));
        Ok(log)
    }

    fn index(&mut self, row: T) {
        self.by_endpoint.entry(row.endpoint().clone()).or_default().push(self.rows.len());
        self.rows.push(row);
    }

    fn append(&mut self, rows: Vec<T>) -> Result<()> {
        if let Some((path, w)) = &mut self.sink {
            for r in &rows {
                serde_json::to_writer(&mut *w, r).map_err(|e| Error::format(path, e.to_string()))?;
                w.write_all(b"\n").map_err(Error::io(path))?;
            }
            w.flush().map_err(Error::io(path))?;
        }
        for r in rows {
            self.index(r);
        }
        Ok(())
    }

    fn window<'a>(&'a self, endpoint: &EndpointId, window: TimeWindow) -> impl Iterator<Item = &'a T> + 'a {
        self.by_endpoint
            .get(endpoint)
            .into_iter()
            .flatten()
            .map(|&i| &self.rows[i])
            .filter(move |r| window.contains(r.time()))
    }
}

/// Durable, append-only record store. Appends to different kinds do not
/// contend; appends of one kind are serialized.
pub struct Store {
    dir: Option<PathBuf>,
    registry: Registry,
    probes: Mutex<Log<ProbeRecord>>,
    evals: Mutex<Log<EvalRun>>,
    fingerprints: Mutex<Log<Fingerprint>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl Store {
    /// A store that keeps everything in memory.
    pub fn in_memory(registry: Registry) -> Self {
        Store {
            dir: None,
            registry,
            probes: Mutex::new(Log::empty()),
            evals: Mutex::new(Log::empty()),
            fingerprints: Mutex::new(Log::empty()),
        }
    }

    /// Opens (creating if needed) a store directory and replays its logs.
    pub fn open(dir: &Path, registry: Registry) -> Result<Self> {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let path = |k: RecordKind| dir.join(k.file_name());
        Ok(Store {
            dir: Some(dir.to_path_buf()),
            registry,
            probes: Mutex::new(Log::open(path(RecordKind::Probe))?),
            evals: Mutex::new(Log::open(path(RecordKind::Eval))?),
            fingerprints: Mutex::new(Log::open(path(RecordKind::Fingerprint))?),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    fn check(&self, record: &Record) -> Result<()> {
        match record {
            Record::Probe(p) => {
                self.registry.endpoint(&p.endpoint)?;
                p.validate()?;
            }
            Record::Eval(e) => e.validate(self.registry.endpoint(&e.endpoint)?)?,
            Record::Fingerprint(f) => {
                self.registry.endpoint(&f.endpoint)?;
                f.validate()?;
            }
        }
        Ok(())
    }

    pub fn append(&self, record: Record) -> Result<()> {
        self.append_all(vec![record])
    }

    /// Validates every record first; nothing is written if any is invalid.
    pub fn append_all(&self, records: Vec<Record>) -> Result<()> {
        for r in &records {
            self.check(r)?;
        }
        let mut probes = Vec::new();
        let mut evals = Vec::new();
        let mut fps = Vec::new();
        for r in records {
            match r {
                Record::Probe(p) => probes.push(p),
                Record::Eval(e) => evals.push(e),
                Record::Fingerprint(f) => fps.push(f),
            }
        }
        if !probes.is_empty() {
            lock(&self.probes).append(probes)?;
        }
        if !evals.is_empty() {
            lock(&self.evals).append(evals)?;
        }
        if !fps.is_empty() {
            lock(&self.fingerprints).append(fps)?;
        }
        Ok(())
    }

    /// Records of `kind` for `endpoint` whose time falls in the half-open
    /// `window`, in append order. `conditions` narrows probe records.
    pub fn query_window(
        &self,
        kind: RecordKind,
        endpoint: &EndpointId,
        conditions: Option<&ProbeConditions>,
        window: TimeWindow,
    ) -> Vec<Record> {
        match kind {
            RecordKind::Probe => lock(&self.probes)
                .window(endpoint, window)
                .filter(|p| conditions.is_none_or(|c| &p.conditions == c))
                .cloned()
                .map(Record::Probe)
                .collect(),
            RecordKind::Eval => lock(&self.evals).window(endpoint, window).cloned().map(Record::Eval).collect(),
            RecordKind::Fingerprint => lock(&self.fingerprints)
                .window(endpoint, window)
                .cloned()
                .map(Record::Fingerprint)
                .collect(),
        }
    }

    pub fn probe_records(&self) -> Vec<ProbeRecord> {
        lock(&self.probes).rows.clone()
    }

    pub fn eval_runs(&self) -> Vec<EvalRun> {
        lock(&self.evals).rows.clone()
    }

    pub fn fingerprints(&self) -> Vec<Fingerprint> {
        lock(&self.fingerprints).rows.clone()
    }

    pub fn len(&self, kind: RecordKind) -> usize {
        match kind {
            RecordKind::Probe => lock(&self.probes).rows.len(),
            RecordKind::Eval => lock(&self.evals).rows.len(),
            RecordKind::Fingerprint => lock(&self.fingerprints).rows.len(),
        }
    }
}
