//! Blended prices, min-max normalization, workload composites and the
//! per-correct-answer headline metrics.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{quality_composite, uniform_suite_weights, EvalRun};
use crate::probe::{LatencySummary, ProbeConditions};
use crate::registry::{Endpoint, EndpointId, Factor, Registry, WorkloadPreset};
use crate::snapshot::Snapshot;

/// Workload-weighted USD per 1M tokens.
pub fn blended_price(endpoint: &Endpoint, preset: &WorkloadPreset, cache_hit: f64) -> f64 {
    let ri = preset.input_share();
    let ro = 1.0 - ri;
    ri * ((1.0 - cache_hit) * endpoint.price_input + cache_hit * endpoint.cached_input_price())
        + ro * endpoint.price_output
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl Factor {
    pub const fn orientation(self) -> Orientation {
        match self {
            Factor::Ttft | Factor::Price => Orientation::LowerBetter,
            _ => Orientation::HigherBetter,
        }
    }
}

/// Min-max scaling onto [0, 1], flipped for lower-is-better factors. A
/// degenerate range maps every value to 1.
pub fn minmax_normalize(values: &[f64], orientation: Orientation) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    values
        .iter()
        .map(|v| {
            if !(span > 0.0) {
                return 1.0;
            }
            let x = ((v - min) / span).clamp(0.0, 1.0);
            match orientation {
                Orientation::HigherBetter => x,
                Orientation::LowerBetter => 1.0 - x,
            }
        })
        .collect()
}

/// Completion rate discounted by tail dispersion:
/// `completion × (1 − min(1, (p99/p50 − 1)/9))`.
pub fn default_reliability(summary: &LatencySummary) -> f64 {
    match (summary.ttft_p50, summary.ttft_p99) {
        (Some(p50), Some(p99)) if p50 > 0.0 => {
            let spread = ((p99 / p50 - 1.0) / 9.0).clamp(0.0, 1.0);
            summary.completion_rate * (1.0 - spread)
        }
        _ => 0.0,
    }
}

pub type ReliabilityFn = fn(&LatencySummary) -> f64;

/// Which latency figure feeds the TTFT factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyBasis {
    Ttft,
    /// Time to first visible token where reported, TTFT otherwise.
    Ttfv,
}

#[derive(Debug, Clone)]
pub struct ScoringConfig {
    pub latency_basis: LatencyBasis,
    pub reliability: ReliabilityFn,
    pub cache_hit: f64,
    pub suite_weights: Vec<(String, f64)>,
    pub conditions: ProbeConditions,
    /// Preset whose blend prices tokens in the dollars-per-correct metric.
    pub headline_preset: String,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            latency_basis: LatencyBasis::Ttft,
            reliability: default_reliability,
            cache_hit: 0.0,
            suite_weights: uniform_suite_weights(),
            conditions: ProbeConditions::leaderboard_default(),
            headline_preset: "chat".to_string(),
        }
    }
}

/// Preset-independent raw factors of one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawInputs {
    pub speed: f64,
    pub ttft: f64,
    pub quality: f64,
    pub reliability: f64,
}

pub fn raw_from_parts(summary: &LatencySummary, runs: &[EvalRun], cfg: &ScoringConfig) -> Result<RawInputs> {
    let missing = |what| Error::MissingFactor {
        endpoint: summary.endpoint.to_string(),
        what,
    };
    let speed = summary.output_speed.ok_or_else(|| missing("output speed"))?;
    let ttft = match cfg.latency_basis {
        LatencyBasis::Ttft => summary.ttft_p50,
        LatencyBasis::Ttfv => summary.ttfv_p50.or(summary.ttft_p50),
    }
    .ok_or_else(|| missing("TTFT P50"))?;
    if runs.is_empty() {
        return Err(missing("quality eval runs"));
    }
    let quality = quality_composite(runs, &cfg.suite_weights)?.q;
    Ok(RawInputs {
        speed,
        ttft,
        quality,
        reliability: (cfg.reliability)(summary),
    })
}

/// Raw factors from the snapshot's latest summary at the configured
/// condition and latest eval run per suite.
pub fn raw_inputs(snapshot: &Snapshot, endpoint: &EndpointId, cfg: &ScoringConfig) -> Result<RawInputs> {
    let summary = snapshot
        .latest_summary(endpoint, &cfg.conditions)
        .ok_or_else(|| Error::MissingFactor {
            endpoint: endpoint.to_string(),
            what: "a latency summary at the leaderboard condition",
        })?;
    let runs: Vec<EvalRun> = snapshot.eval_runs_for(endpoint).cloned().collect();
    raw_from_parts(summary, &runs, cfg)
}

/// Scope of a normalization and ranking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Full,
    Cohort(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Full => f.write_str("full"),
            Scope::Cohort(m) => write!(f, "cohort:{m}"),
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scope::Full),
            _ => match s.strip_prefix("cohort:") {
                Some(m) if !m.is_empty() => Ok(Scope::Cohort(m.to_string())),
                _ => Err(Error::invalid("scope", format!("`{s}` is neither `full` nor `cohort:<model>`"))),
            },
        }
    }
}

impl Serialize for Scope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorVector {
    pub endpoint: EndpointId,
    /// (speed tok/s, TTFT s, blended USD/1M, quality 0-100, reliability).
    pub raw: [f64; 5],
    pub normalized: [f64; 5],
    pub scope: Scope,
    pub preset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeScore {
    pub endpoint: EndpointId,
    pub preset: String,
    pub scope: Scope,
    pub score: f64,
    pub rank: u32,
    pub normalized: [f64; 5],
    pub raw: [f64; 5],
}

pub fn composite(factors: &FactorVector, preset: &WorkloadPreset) -> Result<f64> {
    if factors.preset != preset.name {
        return Err(Error::Mismatch(format!(
            "factors for {} were normalized under preset {}, not {}",
            factors.endpoint, factors.preset, preset.name
        )));
    }
    Ok(preset.weights.dot(&factors.normalized))
}

/// Normalizes one scope under `preset` and returns its factor vectors in
/// input order.
pub fn factor_vectors(
    entries: &[(&Endpoint, RawInputs)],
    preset: &WorkloadPreset,
    scope: &Scope,
    cache_hit: f64,
) -> Vec<FactorVector> {
    let raws: Vec<[f64; 5]> = entries
        .iter()
        .map(|(e, r)| [r.speed, r.ttft, blended_price(e, preset, cache_hit), r.quality, r.reliability])
        .collect();
    let columns: Vec<Vec<f64>> = Factor::ALL
        .iter()
        .map(|f| {
            let col: Vec<f64> = raws.iter().map(|r| r[f.index()]).collect();
            minmax_normalize(&col, f.orientation())
        })
        .collect();
    entries
        .iter()
        .enumerate()
        .map(|(i, (e, _))| FactorVector {
            endpoint: e.id.clone(),
            raw: raws[i],
            normalized: core::array::from_fn(|f| columns[f][i]),
            scope: scope.clone(),
            preset: preset.name.clone(),
        })
        .collect()
}

/// Descending score, ties broken by endpoint id; ranks are 1-based.
pub fn rank_vectors(vectors: Vec<FactorVector>, preset: &WorkloadPreset) -> Vec<CompositeScore> {
    let mut scores: Vec<CompositeScore> = vectors
        .into_iter()
        .map(|v| CompositeScore {
            score: preset.weights.dot(&v.normalized),
            endpoint: v.endpoint,
            preset: v.preset,
            scope: v.scope,
            rank: 0,
            normalized: v.normalized,
            raw: v.raw,
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.endpoint.cmp(&b.endpoint)));
    for (i, s) in scores.iter_mut().enumerate() {
        s.rank = i as u32 + 1;
    }
    scores
}

pub fn score_scope(
    entries: &[(&Endpoint, RawInputs)],
    preset: &WorkloadPreset,
    scope: &Scope,
    cache_hit: f64,
) -> Vec<CompositeScore> {
    rank_vectors(factor_vectors(entries, preset, scope, cache_hit), preset)
}

pub fn scope_endpoints<'r>(registry: &'r Registry, scope: &Scope) -> Result<Vec<&'r Endpoint>> {
    match scope {
        Scope::Full => Ok(registry.endpoints().iter().collect()),
        Scope::Cohort(model) => registry.cohort(model),
    }
}

/// Ranks every scoped endpoint of the snapshot under `preset`.
pub fn rank_leaderboard(
    registry: &Registry,
    snapshot: &Snapshot,
    preset: &WorkloadPreset,
    scope: &Scope,
    cfg: &ScoringConfig,
) -> Result<Vec<CompositeScore>> {
    preset.validate_with(1e-6)?;
    let endpoints = scope_endpoints(registry, scope)?;
    let entries = endpoints
        .into_iter()
        .map(|e| Ok((e, raw_inputs(snapshot, &e.id, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(score_scope(&entries, preset, scope, cfg.cache_hit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineMetrics {
    pub endpoint: EndpointId,
    /// Joules per correct answer; infinite when accuracy is zero.
    pub j_ca: f64,
    /// USD per correct answer; infinite when accuracy is zero.
    pub c_ca: f64,
    pub j_per_token: f64,
    pub price_per_token: f64,
    pub tokens_to_solution: f64,
    pub accuracy: f64,
    /// Largest context length passing the long-context suite, if measured.
    pub effective_context: Option<u32>,
}

/// `J = j·T/A`, `C = p·T/A`, with `A = 0` mapping to infinity.
pub fn headline_values(j: f64, p: f64, t: f64, a: f64) -> (f64, f64) {
    if a <= 0.0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (j * t / a, p * t / a)
    }
}

pub fn headline(j_per_token: f64, price_per_token: f64, eval: &EvalRun) -> Result<HeadlineMetrics> {
    let t = match eval.tokens_to_solution {
        Some(t) => t,
        None if eval.accuracy == 0.0 => 0.0,
        None => {
            return Err(Error::MissingFactor {
                endpoint: eval.endpoint.to_string(),
                what: "tokens to solution on a reasoning suite",
            })
        }
    };
    let (j_ca, c_ca) = headline_values(j_per_token, price_per_token, t, eval.accuracy);
    Ok(HeadlineMetrics {
        endpoint: eval.endpoint.clone(),
        j_ca,
        c_ca,
        j_per_token,
        price_per_token,
        tokens_to_solution: t,
        accuracy: eval.accuracy,
        effective_context: None,
    })
}
