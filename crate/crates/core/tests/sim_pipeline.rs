mod common;

use std::time::Instant;

use endpointbench_core::client::{EndpointClient, StreamEvent, StreamRequest};
use endpointbench_core::eval::{
    context_suite, effective_context, effective_context_from_runs, run_eval_suite, synthetic_suite, EvalContext,
};
use endpointbench_core::fingerprint::{
    capture_fingerprint, fidelity, mean_sym_kl, sym_kl, FidelityFlag, ReferenceSet,
};
use endpointbench_core::probe::{summarize, ProbeConditions, ProbePlan, ProbeRecord};
use endpointbench_core::sim::{spawn_fleet, SimEndpointSpec, SimFamily};
use endpointbench_core::stats::percentile;
use endpointbench_core::{Precision, TimeWindow, Timestamp};
use proptest::prelude::*;

fn plan(cadence_secs: u32, input_length: u32) -> ProbePlan {
    ProbePlan {
        cadence_secs,
        conditions: vec![ProbeConditions::new(input_length, 1, "us-east").unwrap()],
        rotation_seed: 11,
        prompts_per_day: 50,
        max_tokens: 64,
        deadline_secs: 120.0,
    }
}

#[test]
fn six_endpoint_recovery() {
    let planted = [(0.18, 2988.0, 0.0), (0.25, 1200.0, 0.02), (0.36, 248.0, 0.05), (0.30, 600.0, 0.10), (0.22, 900.0, 0.20), (0.40, 450.0, 0.01)];
    let specs: Vec<SimEndpointSpec> = planted
        .iter()
        .enumerate()
        .map(|(i, &(ttft, tps, err))| {
            let mut s = SimEndpointSpec::new(common::id(&format!("p{i}"), "m", Precision::Bf16), ttft, tps, 100 + i as u64);
            s.ttft_log_sigma = 0.3;
            s.jitter_cv = 0.2;
            s.error_rate = err;
            s
        })
        .collect();
    let fleet = spawn_fleet(specs.clone(), vec![]).unwrap();
    let start = Instant::now();
    let p = plan(60, 1_000);
    let window = TimeWindow::new(Timestamp(0), Timestamp(500 * 60_000)).unwrap();
    let ids: Vec<_> = specs.iter().map(|s| s.endpoint_id.clone()).collect();
    let records: Vec<ProbeRecord> = p.jobs(&ids, window).unwrap().iter().map(|j| p.run_job(&fleet, j).unwrap()).collect();
    assert!(start.elapsed().as_secs_f64() < 30.0);
    for (spec, &(ttft, tps, err)) in specs.iter().zip(&planted) {
        let mine: Vec<ProbeRecord> = records.iter().filter(|r| r.endpoint == spec.endpoint_id).cloned().collect();
        assert_eq!(mine.len(), 500);
        let s = summarize(&mine).unwrap();
        assert!((s.ttft_p50.unwrap() / ttft - 1.0).abs() < 0.05, "{s:?}");
        assert!((s.output_speed.unwrap() / tps - 1.0).abs() < 0.05, "{s:?}");
        assert!((s.error_rate - err).abs() <= 0.05, "{s:?}");
        assert!(s.ttft_p50 <= s.ttft_p95 && s.ttft_p95 <= s.ttft_p99);
    }
}

#[test]
fn timing_recovered_over_300_tokens() {
    let mut spec = SimEndpointSpec::new(common::id("p", "m", Precision::Bf16), 0.2, 850.0, 5);
    spec.jitter_cv = 0.3;
    let fleet = spawn_fleet(vec![spec.clone()], vec![]).unwrap();
    let req = StreamRequest::new("hello".into(), 320);
    let events: Vec<StreamEvent> = fleet.open_stream(&spec.endpoint_id, &req).unwrap().collect();
    let first = events.first().unwrap().elapsed();
    let last = events.last().unwrap().elapsed();
    let tokens = events.len() - 1;
    assert_eq!(tokens, 320);
    let rate = tokens as f64 / (last - first);
    assert!((rate / 850.0 - 1.0).abs() < 0.05, "{rate}");
}

#[test]
fn summarize_is_permutation_invariant() {
    let mut spec = SimEndpointSpec::new(common::id("p", "m", Precision::Bf16), 0.2, 500.0, 9);
    spec.ttft_log_sigma = 0.5;
    spec.error_rate = 0.1;
    let fleet = spawn_fleet(vec![spec.clone()], vec![]).unwrap();
    let p = plan(300, 1_000);
    let window = TimeWindow::day_ending(Timestamp(86_400_000 * 3));
    let mut recs: Vec<ProbeRecord> =
        p.jobs(&[spec.endpoint_id.clone()], window).unwrap().iter().map(|j| p.run_job(&fleet, j).unwrap()).collect();
    assert_eq!(recs.len(), 288);
    let a = summarize(&recs).unwrap();
    recs.reverse();
    recs.rotate_left(101);
    assert_eq!(summarize(&recs).unwrap(), a);
}

fn fp_fleet(eps: &[f64]) -> endpointbench_core::sim::SimFleet {
    let specs = eps
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut s = SimEndpointSpec::new(common::id(&format!("p{i}"), "m", Precision::Fp8), 0.2, 500.0, 40 + i as u64);
            s.perturbation_epsilon = *e;
            // Same noise draw for every ε so the comparison isolates ε.
            s.seed = 40;
            s
        })
        .collect();
    spawn_fleet(specs, vec![]).unwrap()
}

#[test]
fn fidelity_monotone_in_epsilon() {
    let eps = [0.0, 0.05, 0.1, 0.2, 0.3];
    let fleet = fp_fleet(&eps);
    let refset = ReferenceSet::synthetic(8, 4, 8, 3);
    let fps: Vec<_> = (0..eps.len())
        .map(|i| capture_fingerprint(&fleet, &common::id(&format!("p{i}"), "m", Precision::Fp8), &refset, Timestamp(0)).unwrap())
        .collect();
    let kls: Vec<f64> = fps.iter().map(|fp| mean_sym_kl(fp, &fps[0]).unwrap()).collect();
    assert_eq!(kls[0], 0.0);
    for w in kls.windows(2) {
        assert!(w[0] < w[1], "{kls:?}");
    }
    let fs: Vec<f64> = fps.iter().map(|fp| fidelity(fp, &fps[0], 1.0, false).unwrap().f).collect();
    assert_eq!(fs[0], 100.0);
    for w in fs.windows(2) {
        assert!(w[0] >= w[1]);
    }
    for fp in &fps {
        let r = fidelity(fp, fp, 0.5, false).unwrap();
        assert_eq!((r.f, r.flag), (100.0, FidelityFlag::Faithful));
    }
}

#[test]
fn eval_on_sim_tracks_planted_accuracy() {
    let mut fam = SimFamily::derived("m");
    fam.thinking_tokens = 25;
    fam.working_tokens = 0;
    fam.default_success = 0.97;
    fam.suite_success.insert("math-100".into(), 0.78);
    let mut spec = SimEndpointSpec::new(common::id("p", "m", Precision::Bf16), 0.2, 500.0, 1);
    spec.context_limit = Some(90_000);
    spec.error_rate = 0.05;
    let fleet = spawn_fleet(vec![spec.clone()], vec![fam]).unwrap();
    let reg = common::registry(vec![common::endpoint(spec.endpoint_id.clone(), 0.1, 0.5)]);
    let e = &reg.endpoints()[0];
    let ctx = EvalContext::new(common::window(), 3);
    let run = run_eval_suite(&fleet, e, &synthetic_suite("math-100", 100, 3, 0), &ctx).unwrap();
    assert!((run.accuracy - 0.78).abs() <= 0.02, "{run:?}");
    run.validate(e).unwrap();
    let t = run.tokens_to_solution.unwrap();
    assert!((25.0..=32.0).contains(&t), "{t}");
    assert!(run.eval_errors > 0);

    let levels = [8_000, 32_000, 90_000, 130_000];
    let tasks = |l: u32| synthetic_suite(&context_suite(l), 20, 3, l);
    assert_eq!(effective_context(&fleet, e, tasks, &levels, &ctx).unwrap(), 90_000);
    let runs: Vec<_> = levels.iter().map(|l| run_eval_suite(&fleet, e, &tasks(*l), &ctx).unwrap()).collect();
    assert_eq!(effective_context_from_runs(&runs), Some(90_000));
    assert_eq!(effective_context_from_runs(&runs[..2]), Some(32_000));
}

fn dist() -> impl Strategy<Value = Vec<(u32, f64)>> {
    prop::collection::btree_map(0u32..64, 0.001f64..1.0, 1..12).prop_map(|m| {
        let total: f64 = m.values().sum();
        m.into_iter().map(|(t, p)| (t, p / total * 0.95)).collect()
    })
}

proptest! {
    #[test]
    fn sym_kl_symmetric_nonnegative(p in dist(), q in dist()) {
        let a = sym_kl(&p, &q).unwrap();
        let b = sym_kl(&q, &p).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(sym_kl(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sim_streams_are_deterministic(seed in any::<u64>(), ordinal in any::<u64>(), prompt in "[a-z ]{1,80}") {
        let mut spec = SimEndpointSpec::new(common::id("p", "m", Precision::Bf16), 0.3, 400.0, seed);
        spec.ttft_log_sigma = 0.4;
        spec.jitter_cv = 0.3;
        spec.error_rate = 0.2;
        let fleet = spawn_fleet(vec![spec.clone()], vec![]).unwrap();
        let req = StreamRequest::new(prompt, 24).with_ordinal(ordinal).with_logprobs(4);
        let a: Vec<_> = fleet.open_stream(&spec.endpoint_id, &req).unwrap().collect();
        let b: Vec<_> = fleet.open_stream(&spec.endpoint_id, &req).unwrap().collect();
        prop_assert_eq!(&a, &b);
        let times: Vec<f64> = a.iter().map(|e| e.elapsed()).collect();
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn percentile_of_known_lognormal_median() {
    let mut spec = SimEndpointSpec::new(common::id("p", "m", Precision::Bf16), 0.5, 400.0, 77);
    spec.ttft_log_sigma = 0.25;
    let fleet = spawn_fleet(vec![spec.clone()], vec![]).unwrap();
    let ttfts: Vec<f64> = (0..2000u64)
        .map(|i| {
            let req = StreamRequest::new("x".into(), 2).with_ordinal(i);
            fleet.open_stream(&spec.endpoint_id, &req).unwrap().next().unwrap().elapsed()
        })
        .collect();
    assert!((percentile(&ttfts, 0.5).unwrap() / 0.5 - 1.0).abs() < 0.03);
}
