//! Cross-endpoint analyses over a snapshot: within-model ranges, fidelity
//! by SKU, preset overlap, weight sensitivity, factor ablation, bootstrap
//! intervals and leave-one-out stability.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{AIME_SUITE, CODE_SUITE, HEADLINE_SUITE};
use crate::probe::{summarize_in, ProbeRecord};
use crate::registry::{Endpoint, EndpointId, Factor, FactorWeights, Registry, WorkloadPreset};
use crate::rng::{mix, rng_from};
use crate::scoring::{
    blended_price, raw_inputs, rank_leaderboard, score_scope, CompositeScore, RawInputs, Scope, ScoringConfig,
};
use crate::snapshot::Snapshot;
use crate::stats::{nearest_rank_sorted, spearman, topk_overlap};
use crate::time::TimeWindow;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_RESAMPLES: u32 = 1000;
pub const DEFAULT_DELTA: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapKind {
    Ratio,
    Points,
}

/// The twelve within-model axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Speed,
    TtftP50,
    TtftP99,
    BlendedPrice,
    Quality,
    AimeAccuracy,
    CodeAccuracy,
    EffectiveContext,
    Fidelity,
    JoulesPerToken,
    JoulesPerCorrect,
    DollarsPerCorrect,
}

impl Axis {
    pub const ALL: [Axis; 12] = [
        Axis::Speed,
        Axis::TtftP50,
        Axis::TtftP99,
        Axis::BlendedPrice,
        Axis::Quality,
        Axis::AimeAccuracy,
        Axis::CodeAccuracy,
        Axis::EffectiveContext,
        Axis::Fidelity,
        Axis::JoulesPerToken,
        Axis::JoulesPerCorrect,
        Axis::DollarsPerCorrect,
    ];

    pub const fn label(self) -> &'static str {
        match self {
            Axis::Speed => "Output speed (tokens/sec, 10K input)",
            Axis::TtftP50 => "TTFT P50 (s)",
            Axis::TtftP99 => "TTFT P99 (s)",
            Axis::BlendedPrice => "Blended price ($ / 1M tokens, 3:1)",
            Axis::Quality => "Quality composite (0-100)",
            Axis::AimeAccuracy => "AIME-proxy accuracy",
            Axis::CodeAccuracy => "Code-proxy accuracy",
            Axis::EffectiveContext => "Effective context (K tokens, >= 90%)",
            Axis::Fidelity => "Endpoint fidelity (F)",
            Axis::JoulesPerToken => "Modeled J/token",
            Axis::JoulesPerCorrect => "J / correct answer",
            Axis::DollarsPerCorrect => "$ / correct answer",
        }
    }

    pub const fn key(self) -> &'static str {
        match self {
            Axis::Speed => "speed",
            Axis::TtftP50 => "ttft_p50",
            Axis::TtftP99 => "ttft_p99",
            Axis::BlendedPrice => "blended_price",
            Axis::Quality => "quality",
            Axis::AimeAccuracy => "aime_accuracy",
            Axis::CodeAccuracy => "code_accuracy",
            Axis::EffectiveContext => "effective_context",
            Axis::Fidelity => "fidelity",
            Axis::JoulesPerToken => "j_per_token",
            Axis::JoulesPerCorrect => "j_per_correct",
            Axis::DollarsPerCorrect => "usd_per_correct",
        }
    }

    pub const fn gap_kind(self) -> GapKind {
        match self {
            Axis::Quality | Axis::AimeAccuracy | Axis::CodeAccuracy | Axis::Fidelity => GapKind::Points,
            _ => GapKind::Ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisRow {
    pub axis: Axis,
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub gap: f64,
    pub gap_kind: GapKind,
}

impl AxisRow {
    /// `12.0×` or `8.2 pts`, rounding half away from zero.
    pub fn gap_display(&self) -> String {
        let r = libm::round(self.gap * 10.0) / 10.0;
        match self.gap_kind {
            GapKind::Ratio if self.gap.is_infinite() => "inf×".to_string(),
            GapKind::Ratio => format!("{r:.1}×"),
            GapKind::Points => format!("{r:.1} pts"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinModelRange {
    pub model: String,
    pub n_endpoints: usize,
    pub rows: Vec<AxisRow>,
}

pub fn gap(kind: GapKind, min: f64, max: f64) -> f64 {
    match kind {
        GapKind::Points => max - min,
        GapKind::Ratio if min > 0.0 => max / min,
        GapKind::Ratio if max == min => 1.0,
        GapKind::Ratio => f64::INFINITY,
    }
}

fn axis_row(axis: Axis, values: &[f64]) -> AxisRow {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    AxisRow {
        axis,
        label: axis.label().to_string(),
        min,
        max,
        gap: gap(axis.gap_kind(), min, max),
        gap_kind: axis.gap_kind(),
    }
}

/// Per-axis values of every endpoint in `model`'s cohort, in cohort order.
pub fn axis_values(
    registry: &Registry,
    snapshot: &Snapshot,
    model: &str,
    cfg: &ScoringConfig,
) -> Result<(Vec<EndpointId>, Vec<(Axis, Vec<f64>)>)> {
    let cohort = registry.cohort(model)?;
    if cohort.is_empty() {
        return Err(Error::Empty("cohort"));
    }
    let blend = WorkloadPreset::new("3:1", 3.0, 1.0, FactorWeights::new(0.2, 0.3, 0.2, 0.2, 0.1));
    let mut columns: Vec<(Axis, Vec<f64>)> = Axis::ALL.iter().map(|a| (*a, Vec::new())).collect();
    for e in &cohort {
        let id = &e.id;
        let missing = |what| Error::MissingFactor {
            endpoint: id.to_string(),
            what,
        };
        let summary = snapshot
            .latest_summary(id, &cfg.conditions)
            .ok_or_else(|| missing("a latency summary at the leaderboard condition"))?;
        let quality = raw_inputs(snapshot, id, cfg)?.quality;
        let acc = |suite: &'static str, what| {
            snapshot.latest_run(id, suite).map(|r| 100.0 * r.accuracy).ok_or_else(|| missing(what))
        };
        let headline = snapshot.headline_for(id).ok_or_else(|| missing("headline metrics"))?;
        let values = [
            summary.output_speed.ok_or_else(|| missing("output speed"))?,
            summary.ttft_p50.ok_or_else(|| missing("TTFT P50"))?,
            summary.ttft_p99.ok_or_else(|| missing("TTFT P99"))?,
            blended_price(e, &blend, cfg.cache_hit),
            quality,
            acc(AIME_SUITE, "AIME-proxy accuracy")?,
            acc(CODE_SUITE, "code-proxy accuracy")?,
            headline.effective_context.ok_or_else(|| missing("effective context"))? as f64 / 1000.0,
            snapshot.fidelity_for(id).ok_or_else(|| missing("fidelity"))?.f,
            snapshot.energy_for(id).ok_or_else(|| missing("energy estimate"))?.j_per_token,
            headline.j_ca,
            headline.c_ca,
        ];
        for (col, v) in columns.iter_mut().zip(values) {
            col.1.push(v);
        }
    }
    Ok((cohort.iter().map(|e| e.id.clone()).collect(), columns))
}

pub fn within_model(
    registry: &Registry,
    snapshot: &Snapshot,
    model: &str,
    cfg: &ScoringConfig,
) -> Result<WithinModelRange> {
    let (ids, columns) = axis_values(registry, snapshot, model, cfg)?;
    Ok(WithinModelRange {
        model: model.to_string(),
        n_endpoints: ids.len(),
        rows: columns.iter().map(|(a, v)| axis_row(*a, v)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub presets: Vec<String>,
    pub k: usize,
    pub cells: Vec<Vec<usize>>,
}

pub fn ordering(scores: &[CompositeScore]) -> Vec<EndpointId> {
    scores.iter().map(|s| s.endpoint.clone()).collect()
}

pub fn overlap_matrix(
    registry: &Registry,
    snapshot: &Snapshot,
    presets: &[&str],
    k: usize,
    cfg: &ScoringConfig,
) -> Result<OverlapMatrix> {
    if presets.len() < 2 {
        return Err(Error::invalid("presets", "need at least two presets"));
    }
    let rankings = presets
        .iter()
        .map(|p| Ok(ordering(&rank_leaderboard(registry, snapshot, registry.preset(p)?, &Scope::Full, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let n = presets.len();
    let mut cells = alloc::vec![alloc::vec![0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = topk_overlap(&rankings[i], &rankings[j], k)?;
            cells[i][j] = v;
            cells[j][i] = v;
        }
    }
    Ok(OverlapMatrix {
        presets: presets.iter().map(|p| p.to_string()).collect(),
        k,
        cells,
    })
}

/// Moves `factor` by `delta` and rescales the other weights by
/// `(1 − w − delta) / (1 − w)` so the vector still sums to one.
pub fn perturb_weights(preset: &WorkloadPreset, factor: Factor, delta: f64) -> Result<WorkloadPreset> {
    let w = preset.weights.get(factor);
    let target = w + delta;
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::invalid(
            format!("perturbed w_{factor} of {}", preset.name),
            format!("{w} {delta:+} = {target} leaves [0, 1]"),
        ));
    }
    if w >= 1.0 {
        return Err(Error::invalid(format!("w_{factor} of {}", preset.name), "is 1; nothing to redistribute"));
    }
    let scale = (1.0 - target) / (1.0 - w);
    let weights = FactorWeights(core::array::from_fn(|i| {
        if i == factor.index() {
            target
        } else {
            preset.weights.0[i] * scale
        }
    }));
    Ok(WorkloadPreset {
        weights,
        ..preset.clone()
    })
}

/// Zeroes `factor` and renormalizes the rest proportionally.
pub fn ablated_weights(preset: &WorkloadPreset, factor: Factor) -> Result<WorkloadPreset> {
    let w = preset.weights.get(factor);
    perturb_weights(preset, factor, -w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub preset: String,
    pub factor: Factor,
    pub sign: Sign,
    pub delta: f64,
    /// False when the perturbation would push the weight outside [0, 1].
    pub feasible: bool,
    pub max_top_k_shift: u32,
    pub leader_changed: bool,
}

fn rank_of(order: &[EndpointId]) -> BTreeMap<&EndpointId, usize> {
    order.iter().enumerate().map(|(i, id)| (id, i)).collect()
}

/// Re-ranks under every `(preset, factor, sign)` perturbation and reports
/// the largest rank move among the baseline top `k` and whether the leader
/// changed.
pub fn sensitivity_report(
    registry: &Registry,
    snapshot: &Snapshot,
    presets: &[&str],
    delta: f64,
    signs: &[Sign],
    k: usize,
    scope: &Scope,
    cfg: &ScoringConfig,
) -> Result<Vec<SensitivityRow>> {
    let endpoints = crate::scoring::scope_endpoints(registry, scope)?;
    let entries = endpoints
        .into_iter()
        .map(|e| Ok((e, raw_inputs(snapshot, &e.id, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for name in presets {
        let preset = registry.preset(name)?;
        let base = ordering(&score_scope(&entries, preset, scope, cfg.cache_hit));
        let base_rank = rank_of(&base);
        for factor in Factor::ALL {
            for &sign in signs {
                let d = match sign {
                    Sign::Plus => delta,
                    Sign::Minus => -delta,
                };
                let mut row = SensitivityRow {
                    preset: preset.name.clone(),
                    factor,
                    sign,
                    delta: d,
                    feasible: false,
                    max_top_k_shift: 0,
                    leader_changed: false,
                };
                if let Ok(p) = perturb_weights(preset, factor, d) {
                    let order = ordering(&score_scope(&entries, &p, scope, cfg.cache_hit));
                    let new_rank = rank_of(&order);
                    row.feasible = true;
                    row.max_top_k_shift = base
                        .iter()
                        .take(k)
                        .map(|id| new_rank[id].abs_diff(base_rank[id]) as u32)
                        .max()
                        .unwrap_or(0);
                    row.leader_changed = base.first() != order.first();
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `None` for the full-composite baseline row.
    pub ablated: Option<Factor>,
    pub weights: FactorWeights,
    pub spearman_rho: f64,
    pub top_k_overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub preset: String,
    pub k: usize,
    pub rows: Vec<AblationRow>,
}

fn scores_by_id(scores: &[CompositeScore]) -> BTreeMap<&EndpointId, f64> {
    scores.iter().map(|s| (&s.endpoint, s.score)).collect()
}

/// One ablation row: Spearman correlation of composite scores and top-k
/// overlap between the ablated and the full ranking.
pub fn ablate(
    entries: &[(&Endpoint, RawInputs)],
    preset: &WorkloadPreset,
    factor: Factor,
    k: usize,
    scope: &Scope,
    cache_hit: f64,
) -> Result<AblationRow> {
    let weights = ablated_weights(preset, factor)?;
    let full = score_scope(entries, preset, scope, cache_hit);
    let abl = score_scope(entries, &weights, scope, cache_hit);
    let fs = scores_by_id(&full);
    let as_ = scores_by_id(&abl);
    let ids: Vec<&EndpointId> = fs.keys().copied().collect();
    let a: Vec<f64> = ids.iter().map(|id| fs[id]).collect();
    let b: Vec<f64> = ids.iter().map(|id| as_[id]).collect();
    Ok(AblationRow {
        ablated: Some(factor),
        weights: weights.weights,
        spearman_rho: spearman(&a, &b)?,
        top_k_overlap: topk_overlap(&ordering(&full), &ordering(&abl), k.min(full.len()))?,
    })
}

pub fn ablation_report(
    registry: &Registry,
    snapshot: &Snapshot,
    preset: &str,
    k: usize,
    scope: &Scope,
    cfg: &ScoringConfig,
) -> Result<AblationReport> {
    let preset = registry.preset(preset)?;
    let entries = crate::scoring::scope_endpoints(registry, scope)?
        .into_iter()
        .map(|e| Ok((e, raw_inputs(snapshot, &e.id, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let k = k.min(entries.len());
    let mut rows = alloc::vec![AblationRow {
        ablated: None,
        weights: preset.weights,
        spearman_rho: 1.0,
        top_k_overlap: k,
    }];
    for f in Factor::ALL {
        rows.push(ablate(&entries, preset, f, k, scope, cfg.cache_hit)?);
    }
    Ok(AblationReport {
        preset: preset.name.clone(),
        k,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCI {
    pub endpoint: EndpointId,
    pub preset: String,
    pub n_resamples: u32,
    pub seed: u64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Raw data behind one endpoint's composite: its probe window and its eval
/// runs grouped by suite.
#[derive(Debug, Clone)]
pub struct ResamplePools<'a> {
    pub probes: Vec<&'a ProbeRecord>,
    pub window: TimeWindow,
    pub runs: Vec<(String, f64, Vec<f64>)>,
}

impl<'a> ResamplePools<'a> {
    pub fn from_snapshot(snapshot: &'a Snapshot, endpoint: &'a EndpointId, cfg: &'a ScoringConfig) -> Result<Self> {
        let window = TimeWindow::day_ending(snapshot.as_of);
        let probes: Vec<&ProbeRecord> = snapshot.probes_in(endpoint, &cfg.conditions, window).collect();
        let mut runs = Vec::new();
        for (suite, w) in &cfg.suite_weights {
            let acc: Vec<f64> = snapshot
                .eval_runs_for(endpoint)
                .filter(|r| &r.suite == suite)
                .map(|r| r.accuracy)
                .collect();
            runs.push((suite.clone(), *w, acc));
        }
        Ok(ResamplePools { probes, window, runs })
    }
}

/// Three-step bootstrap: resample the probe window, resample the eval-run
/// pool, recompute the composite against the rest of the scope held fixed.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_ci(
    registry: &Registry,
    snapshot: &Snapshot,
    endpoint: &EndpointId,
    preset: &str,
    n: u32,
    seed: u64,
    scope: &Scope,
    cfg: &ScoringConfig,
) -> Result<BootstrapCI> {
    let pools = ResamplePools::from_snapshot(snapshot, endpoint, cfg)?;
    let preset = registry.preset(preset)?;
    let members = crate::scoring::scope_endpoints(registry, scope)?;
    let target = members
        .iter()
        .position(|e| &e.id == endpoint)
        .ok_or_else(|| Error::unknown("endpoint in scope", endpoint.to_string()))?;
    let mut entries = members
        .iter()
        .map(|e| Ok((*e, raw_inputs(snapshot, &e.id, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    bootstrap_with(&mut entries, target, &pools, preset, n, seed, scope, cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn bootstrap_with(
    entries: &mut [(&Endpoint, RawInputs)],
    target: usize,
    pools: &ResamplePools<'_>,
    preset: &WorkloadPreset,
    n: u32,
    seed: u64,
    scope: &Scope,
    cfg: &ScoringConfig,
) -> Result<BootstrapCI> {
    if pools.probes.is_empty() {
        return Err(Error::Empty("probe window"));
    }
    if pools.runs.iter().any(|(_, _, r)| r.is_empty()) {
        return Err(Error::Empty("eval-run pool"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be > 0"));
    }
    let id = entries[target].0.id.clone();
    let mut scores = Vec::with_capacity(n as usize);
    let mut sample: Vec<ProbeRecord> = Vec::with_capacity(pools.probes.len());
    for i in 0..n {
        let mut rng = rng_from(mix(seed, u64::from(i)));
        sample.clear();
        for _ in 0..pools.probes.len() {
            sample.push(pools.probes[rng.gen_range(0..pools.probes.len())].clone());
        }
        let summary = summarize_in(&sample, pools.window)?;
        let mut q = 0.0;
        for (_, w, accs) in &pools.runs {
            q += w * accs[rng.gen_range(0..accs.len())];
        }
        let base = entries[target].1;
        entries[target].1 = RawInputs {
            speed: summary.output_speed.unwrap_or(0.0),
            ttft: match cfg.latency_basis {
                crate::scoring::LatencyBasis::Ttft => summary.ttft_p50,
                crate::scoring::LatencyBasis::Ttfv => summary.ttfv_p50.or(summary.ttft_p50),
            }
            .unwrap_or(base.ttft),
            quality: 100.0 * q,
            reliability: (cfg.reliability)(&summary),
        };
        let ranked = score_scope(entries, preset, scope, cfg.cache_hit);
        entries[target].1 = base;
        let s = ranked.iter().find(|s| s.endpoint == id).map(|s| s.score).unwrap_or(0.0);
        scores.push(s);
    }
    scores.sort_by(f64::total_cmp);
    Ok(BootstrapCI {
        endpoint: id,
        preset: preset.name.clone(),
        n_resamples: n,
        seed,
        median: nearest_rank_sorted(&scores, 0.5)?,
        lower: nearest_rank_sorted(&scores, 0.025)?,
        upper: nearest_rank_sorted(&scores, 0.975)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooRow {
    pub axis: Axis,
    pub gap_full: f64,
    /// Largest `|gap_without_e − gap_full| / gap_full` over single drops;
    /// `None` when the full gap is zero or infinite.
    pub max_relative_change: Option<f64>,
    pub worst_drop: Option<EndpointId>,
}

/// Max relative change of one axis gap under single-endpoint drops.
pub fn leave_one_out_values(kind: GapKind, values: &[f64]) -> Result<(f64, Option<(f64, usize)>)> {
    if values.len() < 3 {
        return Err(Error::invalid("cohort", format!("{} endpoints; leave-one-out needs at least 3", values.len())));
    }
    let span = |v: &mut dyn Iterator<Item = f64>| {
        v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let (lo, hi) = span(&mut values.iter().copied());
    let full = gap(kind, lo, hi);
    if !(full.is_finite() && full != 0.0) {
        return Ok((full, None));
    }
    let mut worst: Option<(f64, usize)> = None;
    for drop in 0..values.len() {
        let (lo, hi) = span(&mut values.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, v)| *v));
        let change = (gap(kind, lo, hi) - full).abs() / full.abs();
        if worst.is_none_or(|(w, _)| change > w) {
            worst = Some((change, drop));
        }
    }
    Ok((full, worst))
}

pub fn leave_one_out(
    registry: &Registry,
    snapshot: &Snapshot,
    model: &str,
    cfg: &ScoringConfig,
) -> Result<Vec<LooRow>> {
    let (ids, columns) = axis_values(registry, snapshot, model, cfg)?;
    columns
        .iter()
        .map(|(axis, values)| {
            let (gap_full, worst) = leave_one_out_values(axis.gap_kind(), values)?;
            Ok(LooRow {
                axis: *axis,
                gap_full,
                max_relative_change: worst.map(|(c, _)| c),
                worst_drop: worst.map(|(_, i)| ids[i].clone()),
            })
        })
        .collect()
}

/// Headline suite accuracies, for the fidelity-by-SKU deltas.
pub fn suite_accuracies(snapshot: &Snapshot, registry: &Registry) -> BTreeMap<EndpointId, BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for e in registry.endpoints() {
        let mut m = BTreeMap::new();
        for suite in [HEADLINE_SUITE, AIME_SUITE, CODE_SUITE] {
            if let Some(r) = snapshot.latest_run(&e.id, suite) {
                m.insert(suite.to_string(), r.accuracy);
            }
        }
        out.insert(e.id.clone(), m);
    }
    out
}
