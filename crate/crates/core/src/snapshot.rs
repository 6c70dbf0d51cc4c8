//! The snapshot data model: raw measurement tables plus every derived
//! table, bound to one registry by hash.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::energy::{estimate, Disclosure, EnergyEstimate};
use crate::error::{Error, Result};
use crate::eval::{effective_context_from_runs, EvalRun, HEADLINE_SUITE};
use crate::fingerprint::{fidelity, select_reference, FidelityResult, Fingerprint};
use crate::probe::{summarize_in, LatencySummary, ProbeConditions, ProbeRecord};
use crate::registry::{EndpointId, Registry};
use crate::scoring::{blended_price, headline, rank_leaderboard, CompositeScore, HeadlineMetrics, Scope, ScoringConfig};
use crate::time::{TimeWindow, Timestamp};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: String,
    pub as_of: Timestamp,
    pub registry_hash: String,
    pub probe_records: Vec<ProbeRecord>,
    pub latency_summaries: Vec<LatencySummary>,
    pub eval_runs: Vec<EvalRun>,
    pub fingerprints: Vec<Fingerprint>,
    pub fidelity: Vec<FidelityResult>,
    pub energy_estimates: Vec<EnergyEstimate>,
    pub composite_scores: Vec<CompositeScore>,
    pub headline: Vec<HeadlineMetrics>,
}

fn latest_by<'a, T>(items: impl Iterator<Item = &'a T>, key: impl Fn(&T) -> Timestamp) -> Option<&'a T> {
    let mut best: Option<&T> = None;
    for it in items {
        if best.is_none_or(|b| key(it) >= key(b)) {
            best = Some(it);
        }
    }
    best
}

impl Snapshot {
    pub fn latest_summary(&self, endpoint: &EndpointId, conditions: &ProbeConditions) -> Option<&LatencySummary> {
        latest_by(
            self.latency_summaries
                .iter()
                .filter(|s| &s.endpoint == endpoint && &s.conditions == conditions),
            |s| s.window.end,
        )
    }

    pub fn summaries_for<'a>(&'a self, endpoint: &'a EndpointId) -> impl Iterator<Item = &'a LatencySummary> + 'a {
        self.latency_summaries.iter().filter(move |s| &s.endpoint == endpoint)
    }

    pub fn eval_runs_for<'a>(&'a self, endpoint: &'a EndpointId) -> impl Iterator<Item = &'a EvalRun> + 'a {
        self.eval_runs.iter().filter(move |r| &r.endpoint == endpoint)
    }

    pub fn latest_run(&self, endpoint: &EndpointId, suite: &str) -> Option<&EvalRun> {
        latest_by(
            self.eval_runs.iter().filter(|r| &r.endpoint == endpoint && r.suite == suite),
            |r| r.window.end,
        )
    }

    pub fn probes_in<'a>(
        &'a self,
        endpoint: &'a EndpointId,
        conditions: &'a ProbeConditions,
        window: TimeWindow,
    ) -> impl Iterator<Item = &'a ProbeRecord> + 'a {
        self.probe_records.iter().filter(move |r| {
            &r.endpoint == endpoint && &r.conditions == conditions && window.contains(r.request_time)
        })
    }

    pub fn fingerprint_for(&self, endpoint: &EndpointId) -> Option<&Fingerprint> {
        latest_by(self.fingerprints.iter().filter(|f| &f.endpoint == endpoint), |f| f.capture_time)
    }

    pub fn fidelity_for(&self, endpoint: &EndpointId) -> Option<&FidelityResult> {
        self.fidelity.iter().rev().find(|f| &f.endpoint == endpoint)
    }

    pub fn energy_for(&self, endpoint: &EndpointId) -> Option<&EnergyEstimate> {
        self.energy_estimates.iter().rev().find(|e| &e.endpoint == endpoint)
    }

    pub fn headline_for(&self, endpoint: &EndpointId) -> Option<&HeadlineMetrics> {
        self.headline.iter().rev().find(|h| &h.endpoint == endpoint)
    }

    /// Checks that every record resolves against `registry` and that no
    /// record postdates `as_of`.
    pub fn validate(&self, registry: &Registry) -> Result<()> {
        let ids = self
            .probe_records
            .iter()
            .map(|r| (&r.endpoint, r.request_time))
            .chain(self.latency_summaries.iter().map(|s| (&s.endpoint, s.window.start)))
            .chain(self.eval_runs.iter().map(|r| (&r.endpoint, r.window.start)))
            .chain(self.fingerprints.iter().map(|f| (&f.endpoint, f.capture_time)));
        for (id, t) in ids {
            registry.endpoint(id)?;
            if t > self.as_of {
                return Err(Error::invalid(
                    format!("record for {id} at {}", t.millis()),
                    format!("is later than snapshot as_of {}", self.as_of.millis()),
                ));
            }
        }
        let derived = self
            .fidelity
            .iter()
            .map(|f| &f.endpoint)
            .chain(self.energy_estimates.iter().map(|e| &e.endpoint))
            .chain(self.composite_scores.iter().map(|c| &c.endpoint))
            .chain(self.headline.iter().map(|h| &h.endpoint));
        for id in derived {
            registry.endpoint(id)?;
        }
        for r in &self.probe_records {
            r.validate()?;
        }
        Ok(())
    }
}

/// Inputs for deriving the summary, fidelity, energy, composite and
/// headline tables from raw measurements.
#[derive(Debug, Clone)]
pub struct DeriveParams {
    pub version: String,
    pub as_of: Timestamp,
    pub registry_hash: String,
    pub z: f64,
    pub scoring: ScoringConfig,
    pub disclosures: BTreeMap<EndpointId, Disclosure>,
}

/// Builds a complete snapshot from raw probe records, eval runs and
/// fingerprints. Latency summaries cover the 24 hours before `as_of`.
pub fn derive(
    registry: &Registry,
    probe_records: Vec<ProbeRecord>,
    eval_runs: Vec<EvalRun>,
    fingerprints: Vec<Fingerprint>,
    params: &DeriveParams,
) -> Result<Snapshot> {
    let window = TimeWindow::day_ending(params.as_of);
    let mut snap = Snapshot {
        version: params.version.clone(),
        as_of: params.as_of,
        registry_hash: params.registry_hash.clone(),
        probe_records,
        eval_runs,
        fingerprints,
        ..Snapshot::default()
    };

    let mut groups: BTreeMap<(&EndpointId, &ProbeConditions), Vec<ProbeRecord>> = BTreeMap::new();
    for r in snap.probe_records.iter().filter(|r| window.contains(r.request_time)) {
        groups.entry((&r.endpoint, &r.conditions)).or_default().push(r.clone());
    }
    let mut summaries = Vec::with_capacity(groups.len());
    for records in groups.values() {
        summaries.push(summarize_in(records, window)?);
    }
    snap.latency_summaries = summaries;

    let mut fidelity_rows = Vec::new();
    for model in registry.models() {
        let cohort = registry.cohort(&model.id)?;
        let with_fp: Vec<_> = cohort
            .iter()
            .filter_map(|e| snap.fingerprint_for(&e.id).map(|fp| (*e, fp)))
            .collect();
        if with_fp.iter().all(|(e, _)| !e.id.precision.is_full_precision()) {
            continue;
        }
        let (ref_id, second_tier) = select_reference(&with_fp, params.z)?;
        let reference = snap.fingerprint_for(&ref_id).ok_or(Error::Empty("reference fingerprint"))?;
        let results = with_fp
            .iter()
            .map(|(_, fp)| fidelity(fp, reference, params.z, second_tier))
            .collect::<Result<Vec<_>>>()?;
        fidelity_rows.extend(results);
    }

    snap.fidelity = fidelity_rows;

    let default = &params.scoring.conditions;
    for e in registry.endpoints() {
        let Some(speed) = snap.latest_summary(&e.id, default).and_then(|s| s.output_speed) else {
            continue;
        };
        let disclosure = params.disclosures.get(&e.id).copied().unwrap_or_default();
        snap.energy_estimates.push(estimate(registry, e, &disclosure, speed)?);
    }

    let mut scopes = alloc::vec![Scope::Full];
    scopes.extend(registry.models().map(|m| Scope::Cohort(m.id.clone())));
    for preset in registry.presets() {
        for scope in &scopes {
            if crate::scoring::scope_endpoints(registry, scope)?.is_empty() {
                continue;
            }
            let ranked = rank_leaderboard(registry, &snap, preset, scope, &params.scoring)?;
            snap.composite_scores.extend(ranked);
        }
    }

    let price_preset = registry.preset(&params.scoring.headline_preset)?;
    for e in registry.endpoints() {
        let (Some(energy), Some(run)) = (snap.energy_for(&e.id), snap.latest_run(&e.id, HEADLINE_SUITE)) else {
            continue;
        };
        let p = blended_price(e, price_preset, params.scoring.cache_hit) / 1e6;
        let mut h = headline(energy.j_per_token, p, run)?;
        h.effective_context = effective_context_from_runs(snap.eval_runs_for(&e.id));
        snap.headline.push(h);
    }
    Ok(snap)
}
