//! Read-only JSON service over one loaded snapshot.
//!
//! The loaded snapshot sits behind an `Arc` that handlers clone once per
//! request, so swapping in a new snapshot never affects a response that is
//! already being built.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use endpointbench_core::analysis::{axis_values, within_model, AxisRow};
use endpointbench_core::energy::EnergyEstimate;
use endpointbench_core::eval::{EvalRun, HEADLINE_SUITE, AIME_SUITE, CODE_SUITE};
use endpointbench_core::fingerprint::{fidelity_by_sku, FidelityFlag, FidelityResult};
use endpointbench_core::probe::LatencySummary;
use endpointbench_core::scoring::{
    blended_price, rank_leaderboard, raw_inputs, CompositeScore, HeadlineMetrics, Scope, ScoringConfig,
};
use endpointbench_core::snapshot::Snapshot;
use endpointbench_core::{EndpointId, Factor, FactorWeights, ProviderCategory, WorkloadPreset};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::registry_io::RegistryBundle;
use crate::snapshot_io;

/// A registry together with a snapshot that was checked against it.
pub struct Loaded {
    pub bundle: RegistryBundle,
    pub snapshot: Snapshot,
}

impl Loaded {
    pub fn open(registry_dir: &Path, snapshot_dir: &Path) -> crate::Result<Self> {
        let bundle = RegistryBundle::load(registry_dir)?;
        let snapshot = snapshot_io::import(snapshot_dir, &bundle)?;
        Ok(Loaded { bundle, snapshot })
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    current: Arc<RwLock<Option<Arc<Loaded>>>>,
}

impl AppState {
    pub fn new(loaded: Option<Loaded>) -> Self {
        AppState {
            current: Arc::new(RwLock::new(loaded.map(Arc::new))),
        }
    }

    /// Atomically replaces the served snapshot.
    pub fn replace(&self, loaded: Loaded) {
        *self.current.write().unwrap_or_else(|p| p.into_inner()) = Some(Arc::new(loaded));
    }

    pub fn current(&self) -> Option<Arc<Loaded>> {
        self.current.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn loaded(&self) -> Result<Arc<Loaded>, ApiError> {
        self.current().ok_or(ApiError {
            status: StatusCode::CONFLICT,
            code: "no_snapshot",
            message: "no snapshot is loaded".into(),
        })
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            message: message.into(),
        }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: "invalid_request",
            message: message.into(),
        }
    }
}

impl From<endpointbench_core::Error> for ApiError {
    fn from(e: endpointbench_core::Error) -> Self {
        use endpointbench_core::Error as E;
        let (status, code) = match &e {
            E::Unknown { .. } => (StatusCode::NOT_FOUND, "not_found"),
            E::Invalid { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            E::MissingFactor { .. } | E::Empty(_) => (StatusCode::CONFLICT, "incomplete_snapshot"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// The five factors keyed by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    pub speed: f64,
    pub ttft: f64,
    pub price: f64,
    pub quality: f64,
    pub reliability: f64,
}

impl From<[f64; 5]> for Factors {
    fn from(v: [f64; 5]) -> Self {
        Factors {
            speed: v[Factor::Speed.index()],
            ttft: v[Factor::Ttft.index()],
            price: v[Factor::Price.index()],
            quality: v[Factor::Quality.index()],
            reliability: v[Factor::Reliability.index()],
        }
    }
}

impl From<Factors> for [f64; 5] {
    fn from(f: Factors) -> Self {
        [f.speed, f.ttft, f.price, f.quality, f.reliability]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetView {
    pub name: String,
    pub input_ratio: f64,
    pub output_ratio: f64,
    pub weights: Factors,
}

impl From<&WorkloadPreset> for PresetView {
    fn from(p: &WorkloadPreset) -> Self {
        PresetView {
            name: p.name.clone(),
            input_ratio: p.input_ratio,
            output_ratio: p.output_ratio,
            weights: p.weights.0.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: u32,
    pub endpoint: EndpointId,
    pub score: f64,
    pub normalized: Factors,
    pub raw: Factors,
    /// Joules per correct answer; `null` when unavailable or infinite.
    pub j_ca: Option<f64>,
    pub c_ca: Option<f64>,
    pub fidelity_flag: Option<FidelityFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardResponse {
    pub version: String,
    pub as_of: i64,
    pub preset: PresetView,
    pub scope: Scope,
    pub rows: Vec<LeaderboardRow>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn leaderboard_response(loaded: &Loaded, preset: &WorkloadPreset, scope: Scope) -> Result<LeaderboardResponse, ApiError> {
    let snap = &loaded.snapshot;
    let scores = rank_leaderboard(&loaded.bundle.registry, snap, preset, &scope, &ScoringConfig::default())?;
    let rows = scores
        .into_iter()
        .map(|s: CompositeScore| {
            let h = snap.headline_for(&s.endpoint);
            LeaderboardRow {
                rank: s.rank,
                score: s.score,
                normalized: s.normalized.into(),
                raw: s.raw.into(),
                j_ca: h.and_then(|h| finite(h.j_ca)),
                c_ca: h.and_then(|h| finite(h.c_ca)),
                fidelity_flag: snap.fidelity_for(&s.endpoint).map(|f| f.flag),
                endpoint: s.endpoint,
            }
        })
        .collect();
    Ok(LeaderboardResponse {
        version: snap.version.clone(),
        as_of: snap.as_of.millis(),
        preset: preset.into(),
        scope,
        rows,
    })
}

fn parse_scope(loaded: &Loaded, raw: Option<&str>) -> Result<Scope, ApiError> {
    let scope: Scope = match raw {
        None => Scope::Full,
        Some(s) => s.parse().map_err(|e: endpointbench_core::Error| ApiError::unprocessable(e.to_string()))?,
    };
    if let Scope::Cohort(m) = &scope {
        loaded.bundle.registry.model(m)?;
    }
    Ok(scope)
}

#[derive(Debug, Deserialize)]
pub struct LeaderboardQuery {
    pub preset: Option<String>,
    pub scope: Option<String>,
}

async fn leaderboard(State(state): State<AppState>, Query(q): Query<LeaderboardQuery>) -> ApiResult<LeaderboardResponse> {
    let loaded = state.loaded()?;
    let name = q.preset.as_deref().unwrap_or("chat");
    let preset = loaded
        .bundle
        .registry
        .preset(name)
        .map_err(|_| ApiError::not_found(format!("unknown preset `{name}`")))?
        .clone();
    let scope = parse_scope(&loaded, q.scope.as_deref())?;
    Ok(Json(leaderboard_response(&loaded, &preset, scope)?))
}

/// Five weights given either as an array in factor order or as an object.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WeightsInput {
    List([f64; 5]),
    Named(Factors),
}

#[derive(Debug, Clone, Deserialize)]
pub struct CustomScoreRequest {
    pub weights: WeightsInput,
    pub input_ratio: f64,
    pub output_ratio: f64,
    pub scope: Option<String>,
    pub name: Option<String>,
}

pub const CUSTOM_WEIGHT_TOLERANCE: f64 = 1e-6;

async fn score_custom(
    State(state): State<AppState>,
    body: Result<Json<CustomScoreRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<LeaderboardResponse> {
    let Json(req) = body.map_err(|e| ApiError::unprocessable(e.body_text()))?;
    let loaded = state.loaded()?;
    let w: [f64; 5] = match req.weights {
        WeightsInput::List(w) => w,
        WeightsInput::Named(f) => f.into(),
    };
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(ApiError::unprocessable("weights must be finite and non-negative"));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > CUSTOM_WEIGHT_TOLERANCE {
        return Err(ApiError::unprocessable(format!("weights sum to {sum}, expected 1 within {CUSTOM_WEIGHT_TOLERANCE}")));
    }
    for (name, r) in [("input_ratio", req.input_ratio), ("output_ratio", req.output_ratio)] {
        if !(r.is_finite() && r > 0.0) {
            return Err(ApiError::unprocessable(format!("{name} must be > 0")));
        }
    }
    let preset = WorkloadPreset::new(
        req.name.as_deref().unwrap_or("custom"),
        req.input_ratio,
        req.output_ratio,
        FactorWeights(w),
    );
    let scope = parse_scope(&loaded, req.scope.as_deref())?;
    Ok(Json(leaderboard_response(&loaded, &preset, scope)?))
}

async fn presets(State(state): State<AppState>) -> ApiResult<Vec<PresetView>> {
    let loaded = state.loaded()?;
    Ok(Json(loaded.bundle.registry.presets().iter().map(PresetView::from).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderView {
    pub id: String,
    pub name: String,
    pub category: ProviderCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointDetail {
    pub endpoint: EndpointId,
    pub provider: ProviderView,
    pub hardware_class: String,
    pub first_party: bool,
    pub disclosed_quantization: bool,
    pub price_input: f64,
    pub price_output: f64,
    pub price_cached_input: f64,
    pub advertised_context: u32,
    /// Raw factors, with price blended under the chat preset.
    pub factors: Option<Factors>,
    pub latency: Vec<LatencySummary>,
    pub eval_runs: Vec<EvalRun>,
    pub fidelity: Option<FidelityResult>,
    pub energy: Option<EnergyEstimate>,
    pub headline: Option<HeadlineView>,
}

/// Headline metrics with infinite costs mapped to `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineView {
    pub j_ca: Option<f64>,
    pub c_ca: Option<f64>,
    pub j_per_token: f64,
    pub price_per_token: f64,
    pub tokens_to_solution: f64,
    pub accuracy: f64,
    pub effective_context: Option<u32>,
}

impl From<&HeadlineMetrics> for HeadlineView {
    fn from(h: &HeadlineMetrics) -> Self {
        HeadlineView {
            j_ca: finite(h.j_ca),
            c_ca: finite(h.c_ca),
            j_per_token: h.j_per_token,
            price_per_token: h.price_per_token,
            tokens_to_solution: h.tokens_to_solution,
            accuracy: h.accuracy,
            effective_context: h.effective_context,
        }
    }
}

async fn endpoint_detail(State(state): State<AppState>, UrlPath(raw): UrlPath<String>) -> ApiResult<EndpointDetail> {
    let loaded = state.loaded()?;
    let id: EndpointId = raw
        .parse()
        .map_err(|e: endpointbench_core::Error| ApiError::not_found(format!("`{raw}` is not an endpoint id: {e}")))?;
    let reg = &loaded.bundle.registry;
    let e = reg.endpoint(&id)?;
    let p = reg.provider(&id.provider)?;
    let snap = &loaded.snapshot;
    let cfg = ScoringConfig::default();
    let factors = raw_inputs(snap, &id, &cfg).ok().map(|r| {
        let price = reg.preset(&cfg.headline_preset).map(|chat| blended_price(e, chat, cfg.cache_hit));
        Factors {
            speed: r.speed,
            ttft: r.ttft,
            price: price.unwrap_or(f64::NAN),
            quality: r.quality,
            reliability: r.reliability,
        }
    });
    Ok(Json(EndpointDetail {
        provider: ProviderView {
            id: p.id.clone(),
            name: p.name.clone(),
            category: p.category,
        },
        hardware_class: e.hardware_class.clone(),
        first_party: e.first_party,
        disclosed_quantization: e.disclosed_quantization,
        price_input: e.price_input,
        price_output: e.price_output,
        price_cached_input: e.cached_input_price(),
        advertised_context: e.advertised_context,
        factors,
        latency: snap.summaries_for(&id).cloned().collect(),
        eval_runs: snap.eval_runs_for(&id).cloned().collect(),
        fidelity: snap.fidelity_for(&id).cloned(),
        energy: snap.energy_for(&id).cloned(),
        headline: snap.headline_for(&id).map(HeadlineView::from),
        endpoint: id,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisView {
    #[serde(flatten)]
    pub row: AxisRow,
    pub key: String,
    pub gap_display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointAxes {
    pub endpoint: EndpointId,
    pub values: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinModelResponse {
    pub model: String,
    pub n_endpoints: usize,
    pub rows: Vec<AxisView>,
    pub endpoints: Vec<EndpointAxes>,
}

async fn within_model_view(State(state): State<AppState>, UrlPath(model): UrlPath<String>) -> ApiResult<WithinModelResponse> {
    let loaded = state.loaded()?;
    let reg = &loaded.bundle.registry;
    reg.model(&model)?;
    let cfg = ScoringConfig::default();
    let r = within_model(reg, &loaded.snapshot, &model, &cfg)?;
    let (ids, columns) = axis_values(reg, &loaded.snapshot, &model, &cfg)?;
    let endpoints = ids
        .into_iter()
        .enumerate()
        .map(|(i, endpoint)| EndpointAxes {
            endpoint,
            values: columns.iter().map(|(a, v)| (a.key().to_string(), finite(v[i]))).collect(),
        })
        .collect();
    Ok(Json(WithinModelResponse {
        model: r.model,
        n_endpoints: r.n_endpoints,
        rows: r
            .rows
            .into_iter()
            .map(|row| AxisView {
                key: row.axis.key().into(),
                gap_display: row.gap_display(),
                row,
            })
            .collect(),
        endpoints,
    }))
}

#[derive(Debug, Deserialize)]
pub struct FidelityQuery {
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkuGroupView {
    pub precision: endpointbench_core::Precision,
    pub n: usize,
    pub mean_f: f64,
    pub flag: FidelityFlag,
    pub accuracy_deltas: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityResponse {
    pub model: String,
    pub reference_endpoint: Option<EndpointId>,
    pub second_tier: bool,
    pub groups: Vec<SkuGroupView>,
    pub results: Vec<FidelityResult>,
}

/// The model with the most endpoints; ties go to the smaller model id.
pub fn largest_cohort(loaded: &Loaded) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in loaded.bundle.registry.endpoints() {
        *counts.entry(e.id.model.as_str()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(m, _)| m.to_string())
}

async fn fidelity_view(State(state): State<AppState>, Query(q): Query<FidelityQuery>) -> ApiResult<FidelityResponse> {
    let loaded = state.loaded()?;
    let reg = &loaded.bundle.registry;
    let model = match q.model {
        Some(m) => m,
        None => largest_cohort(&loaded).ok_or_else(|| ApiError::not_found("registry has no models"))?,
    };
    let cohort: Vec<EndpointId> = reg.cohort(&model)?.into_iter().map(|e| e.id.clone()).collect();
    let results: Vec<FidelityResult> = loaded
        .snapshot
        .fidelity
        .iter()
        .filter(|r| cohort.contains(&r.endpoint))
        .cloned()
        .collect();
    let suites = [HEADLINE_SUITE, AIME_SUITE, CODE_SUITE];
    let acc = endpointbench_core::analysis::suite_accuracies(&loaded.snapshot, reg);
    let groups = fidelity_by_sku(&results, reg, &acc, &suites)?
        .into_iter()
        .map(|g| SkuGroupView {
            precision: g.precision,
            n: g.n,
            mean_f: g.mean_f,
            flag: FidelityFlag::from_score(g.mean_f),
            accuracy_deltas: g.deltas.into_iter().collect(),
        })
        .collect();
    Ok(Json(FidelityResponse {
        reference_endpoint: results.first().map(|r| r.reference_endpoint.clone()),
        second_tier: results.first().is_some_and(|r| r.second_tier),
        model,
        groups,
        results,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: Option<String>,
    pub as_of: Option<i64>,
    pub registry_hash: Option<String>,
    pub endpoints: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let loaded = state.current();
    Json(Health {
        status: "ok".into(),
        version: loaded.as_ref().map(|l| l.snapshot.version.clone()),
        as_of: loaded.as_ref().map(|l| l.snapshot.as_of.millis()),
        registry_hash: loaded.as_ref().map(|l| l.snapshot.registry_hash.clone()),
        endpoints: loaded.as_ref().map_or(0, |l| l.bundle.registry.endpoints().len()),
    })
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such route")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/presets", get(presets))
        .route("/v1/leaderboard", get(leaderboard))
        .route("/v1/score/custom", post(score_custom))
        .route("/v1/endpoints/{*id}", get(endpoint_detail))
        .route("/v1/models/{id}/within-model", get(within_model_view))
        .route("/v1/fidelity", get(fidelity_view))
        .fallback(fallback)
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Usage(format!("cannot listen on {addr}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| Error::Usage(e.to_string()))?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Usage(format!("server error: {e}")))
}
