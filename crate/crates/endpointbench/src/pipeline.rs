//! Day-by-day measurement pipeline over a simulated fleet: probes on the
//! cadence grid, one eval pass and one fingerprint capture per endpoint per
//! day, then derivation of a snapshot from the store.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use endpointbench_core::eval::{context_suite, run_eval_suite, synthetic_suite, EvalContext, EvalRun, EvalTask};
use endpointbench_core::fingerprint::{capture_fingerprint, ReferenceSet};
use endpointbench_core::probe::ProbePlan;
use endpointbench_core::rng::mix_all;
use endpointbench_core::scoring::ScoringConfig;
use endpointbench_core::sim::{spawn_fleet, SimFleet};
use endpointbench_core::snapshot::{derive, DeriveParams, Snapshot};
use endpointbench_core::time::MILLIS_PER_DAY;
use endpointbench_core::{EndpointId, TimeWindow, Timestamp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet_io::FleetSpec;
use crate::registry_io::RegistryBundle;
use crate::store::{Record, Store};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPlan {
    pub max_tokens: u32,
    pub retries: u32,
    /// Tasks per quality suite.
    pub suites: BTreeMap<String, u32>,
    /// Long-context sweep levels, ascending.
    pub context_levels: Vec<u32>,
    pub context_tasks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefsetPlan {
    pub prompts: u32,
    pub positions: u32,
    pub top_k: u32,
    pub seed: u64,
}

impl RefsetPlan {
    pub fn build(&self) -> ReferenceSet {
        ReferenceSet::synthetic(self.prompts, self.positions, self.top_k, self.seed)
    }
}

/// Contents of `pipeline.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub version: String,
    /// First simulated day, in days since the Unix epoch.
    pub start_day: i64,
    pub seed: u64,
    /// Fidelity normalizer.
    pub z: f64,
    pub probe: ProbePlan,
    pub eval: EvalPlan,
    pub fingerprint: RefsetPlan,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let cfg: PipelineConfig = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        fs::write(path, text).map_err(Error::io(path))
    }

    pub fn validate(&self) -> endpointbench_core::Result<()> {
        self.probe.validate()?;
        self.fingerprint.build().validate()?;
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(endpointbench_core::Error::Invalid {
                field: "z".into(),
                rule: "must be > 0".into(),
            });
        }
        Ok(())
    }

    pub fn day_window(&self, day_offset: u32) -> TimeWindow {
        let start = Timestamp::start_of_day(self.start_day + i64::from(day_offset));
        TimeWindow {
            start,
            end: start.plus_millis(MILLIS_PER_DAY),
        }
    }
}

/// Maps simulated time onto the wall clock.
pub trait Clock: Sync {
    fn wait_until(&self, t: Timestamp);
}

/// Runs as fast as possible.
pub struct VirtualClock;

impl Clock for VirtualClock {
    fn wait_until(&self, _t: Timestamp) {}
}

/// Sleeps so that simulated time `origin` lines up with the moment the clock
/// was created. Slots already in the past run immediately.
pub struct WallClock {
    origin: Timestamp,
    started: Instant,
}

impl WallClock {
    pub fn new(origin: Timestamp) -> Self {
        WallClock {
            origin,
            started: Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn wait_until(&self, t: Timestamp) {
        let offset = Duration::from_millis((t.millis() - self.origin.millis()).max(0) as u64);
        if let Some(left) = offset.checked_sub(self.started.elapsed()) {
            thread::sleep(left);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimulationReport {
    pub days: u32,
    pub probes: usize,
    pub eval_runs: usize,
    pub fingerprints: usize,
}

/// Spawns the simulated fleet for the registry's endpoints, in registry
/// order. Every registry endpoint needs a fleet entry.
pub fn fleet_for(bundle: &RegistryBundle, spec: &FleetSpec) -> Result<SimFleet> {
    let by_id: BTreeMap<&EndpointId, _> = spec.endpoints.iter().map(|s| (&s.endpoint_id, s)).collect();
    let mut specs = Vec::with_capacity(bundle.registry.endpoints().len());
    for e in bundle.registry.endpoints() {
        let s = by_id.get(&e.id).ok_or_else(|| endpointbench_core::Error::Unknown {
            kind: "simulated endpoint",
            id: e.id.to_string(),
        })?;
        specs.push((*s).clone());
    }
    Ok(spawn_fleet(specs, spec.families.clone())?)
}

fn day_tasks(cfg: &PipelineConfig, day: i64) -> (Vec<Vec<EvalTask>>, Vec<Vec<EvalTask>>) {
    let seed = mix_all(&[cfg.seed, day as u64]);
    let quality = cfg
        .eval
        .suites
        .iter()
        .map(|(suite, n)| synthetic_suite(suite, *n, seed, 0))
        .collect();
    let context = cfg
        .eval
        .context_levels
        .iter()
        .map(|l| synthetic_suite(&context_suite(*l), cfg.eval.context_tasks, seed, *l))
        .collect();
    (quality, context)
}

/// Runs `days` simulated days starting at `cfg.start_day` and appends every
/// record to `store`, day by day and in deterministic order.
pub fn simulate(
    bundle: &RegistryBundle,
    fleet: &SimFleet,
    cfg: &PipelineConfig,
    days: u32,
    clock: &dyn Clock,
    store: &Store,
) -> Result<SimulationReport> {
    let registry = &bundle.registry;
    let ids: Vec<EndpointId> = registry.endpoints().iter().map(|e| e.id.clone()).collect();
    let refset = cfg.fingerprint.build();
    let mut report = SimulationReport::default();

    for d in 0..days {
        let window = cfg.day_window(d);
        let jobs = cfg.probe.jobs(&ids, window)?;
        for slot in jobs.chunk_by(|a, b| a.ctx.request_time == b.ctx.request_time) {
            clock.wait_until(slot[0].ctx.request_time);
            let records = slot
                .par_iter()
                .map(|j| cfg.probe.run_job(fleet, j).map(Record::Probe))
                .collect::<endpointbench_core::Result<Vec<_>>>()?;
            report.probes += records.len();
            store.append_all(records)?;
        }

        let (quality, context) = day_tasks(cfg, window.start.day());
        let mut ctx = EvalContext::new(window, mix_all(&[cfg.seed, window.start.day() as u64, 1]));
        ctx.max_tokens = cfg.eval.max_tokens;
        ctx.retries = cfg.eval.retries;
        clock.wait_until(window.start.plus_millis(MILLIS_PER_DAY / 2));
        let runs: Vec<Vec<EvalRun>> = registry
            .endpoints()
            .par_iter()
            .map(|e| {
                quality
                    .iter()
                    .chain(&context)
                    .map(|tasks| run_eval_suite(fleet, e, tasks, &ctx))
                    .collect()
            })
            .collect::<endpointbench_core::Result<_>>()?;
        let runs: Vec<Record> = runs.into_iter().flatten().map(Record::Eval).collect();
        report.eval_runs += runs.len();
        store.append_all(runs)?;

        let capture_at = window.start.plus_millis(MILLIS_PER_DAY / 2);
        let fps = ids
            .par_iter()
            .map(|id| capture_fingerprint(fleet, id, &refset, capture_at).map(Record::Fingerprint))
            .collect::<endpointbench_core::Result<Vec<_>>>()?;
        report.fingerprints += fps.len();
        store.append_all(fps)?;
        report.days += 1;
    }
    Ok(report)
}

/// Derives the snapshot as of the end of the last simulated day.
pub fn snapshot_from_store(bundle: &RegistryBundle, store: &Store, cfg: &PipelineConfig, days: u32) -> Result<Snapshot> {
    let as_of = cfg.day_window(days.saturating_sub(1)).end;
    let params = DeriveParams {
        version: cfg.version.clone(),
        as_of,
        registry_hash: bundle.hash(),
        z: cfg.z,
        scoring: ScoringConfig::default(),
        disclosures: bundle.disclosures.clone(),
    };
    Ok(derive(
        &bundle.registry,
        store.probe_records(),
        store.eval_runs(),
        store.fingerprints(),
        &params,
    )?)
}
