#![allow(dead_code)]

use std::collections::BTreeSet;

use endpointbench_core::eval::{EvalRun, QUALITY_SUITES};
use endpointbench_core::probe::{LatencySummary, ProbeConditions};
use endpointbench_core::registry::{builtin_hardware_table, builtin_presets, builtin_regions};
use endpointbench_core::snapshot::Snapshot;
use endpointbench_core::time::MILLIS_PER_DAY;
use endpointbench_core::{
    Decoding, Endpoint, EndpointId, ModelFamily, Precision, Provider, ProviderCategory, Registry, RegistryParts,
    TimeWindow, Timestamp,
};

pub const AS_OF: Timestamp = Timestamp(20_000 * MILLIS_PER_DAY);

pub fn id(provider: &str, model: &str, precision: Precision) -> EndpointId {
    EndpointId::new(provider, model, "standard", precision, Decoding::Standard, "us-east")
}

pub fn endpoint(id: EndpointId, price_in: f64, price_out: f64) -> Endpoint {
    Endpoint {
        id,
        price_input: price_in,
        price_output: price_out,
        price_cached_input: None,
        batch_discount: 0.0,
        advertised_context: 131_072,
        hardware_class: "NVIDIA H100 SXM5".into(),
        first_party: false,
        disclosed_quantization: false,
    }
}

pub fn registry(endpoints: Vec<Endpoint>) -> Registry {
    let providers: BTreeSet<String> = endpoints.iter().map(|e| e.id.provider.clone()).collect();
    let models: BTreeSet<String> = endpoints.iter().map(|e| e.id.model.clone()).collect();
    Registry::new(RegistryParts {
        providers: providers
            .into_iter()
            .map(|p| Provider {
                name: p.clone(),
                id: p,
                category: ProviderCategory::ServerlessGpu,
            })
            .collect(),
        models: models
            .into_iter()
            .map(|m| ModelFamily {
                name: m.clone(),
                id: m,
                first_party_provider: None,
                open_weights: true,
            })
            .collect(),
        endpoints,
        hardware: builtin_hardware_table(),
        regions: builtin_regions(),
        presets: builtin_presets(),
    })
    .unwrap()
}

/// `n` single-model endpoints `p00..` with prices rising with the index.
pub fn cohort(n: usize) -> Registry {
    registry(
        (0..n)
            .map(|i| endpoint(id(&format!("p{i:02}"), "m", Precision::Bf16), 0.1 + 0.05 * i as f64, 0.4 + 0.1 * i as f64))
            .collect(),
    )
}

pub fn window() -> TimeWindow {
    TimeWindow::day_ending(AS_OF)
}

pub fn summary(id: &EndpointId, speed: f64, ttft: f64, ttft_p99: f64, completion: f64) -> LatencySummary {
    LatencySummary {
        endpoint: id.clone(),
        conditions: ProbeConditions::leaderboard_default(),
        window: window(),
        ttft_p50: Some(ttft),
        ttft_p95: Some(ttft_p99),
        ttft_p99: Some(ttft_p99),
        ttfv_p50: None,
        output_speed: Some(speed),
        jitter: Some(0.0),
        completion_rate: completion,
        error_rate: 1.0 - completion,
        n_probes: 100,
    }
}

pub fn run(id: &EndpointId, suite: &str, solved: u32, n: u32) -> EvalRun {
    EvalRun {
        endpoint: id.clone(),
        suite: suite.into(),
        window: window(),
        accuracy: f64::from(solved) / f64::from(n),
        tokens_to_solution: Some(100.0),
        input_tokens: 0,
        output_tokens: 0,
        thinking_tokens: 0,
        wall_clock: 1.0,
        dollar_cost: 0.0,
        n_tasks: n,
        n_solved: solved,
        eval_errors: 0,
    }
}

/// Row per registry endpoint, in registry order:
/// `(speed, ttft_p50, solved out of 100 on every suite, completion)`.
pub fn snapshot(registry: &Registry, rows: &[(f64, f64, u32, f64)]) -> Snapshot {
    assert_eq!(rows.len(), registry.endpoints().len());
    let mut snap = Snapshot {
        version: "test".into(),
        as_of: AS_OF,
        ..Snapshot::default()
    };
    for (e, &(speed, ttft, solved, completion)) in registry.endpoints().iter().zip(rows) {
        snap.latency_summaries.push(summary(&e.id, speed, ttft, 2.0 * ttft, completion));
        for s in QUALITY_SUITES {
            snap.eval_runs.push(run(&e.id, s, solved, 100));
        }
    }
    snap
}
