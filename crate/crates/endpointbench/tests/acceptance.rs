//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the report reads top to bottom; exits nonzero on any failure.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use endpointbench::canon::CsvFile;
use endpointbench::cli::main_with;
use endpointbench::fixture::{self, planted};
use endpointbench::registry_io::RegistryBundle;
use endpointbench::{report, snapshot_io};
use endpointbench_core::analysis::{
    ablation_report, bootstrap_ci, overlap_matrix, perturb_weights, within_model, Axis,
};
use endpointbench_core::energy::{joules_per_token, EnergyAssumptions};
use endpointbench_core::eval::{AIME_SUITE, CODE_SUITE, HEADLINE_SUITE};
use endpointbench_core::fingerprint::{capture_fingerprint, fidelity, fidelity_by_sku, FidelityFlag, ReferenceSet};
use endpointbench_core::probe::{summarize, ProbeConditions, ProbePlan, ProbeRecord};
use endpointbench_core::registry::{builtin_hardware_table, builtin_presets, OVERLAP_PRESETS};
use endpointbench_core::scoring::{headline_values, Scope, ScoringConfig};
use endpointbench_core::sim::{spawn_fleet, SimEndpointSpec};
use endpointbench_core::snapshot::Snapshot;
use endpointbench_core::stats::{spearman, topk_overlap};
use endpointbench_core::{Decoding, EndpointId, Factor, Precision, TimeWindow, Timestamp};
use rand::seq::SliceRandom;
use rand::SeedableRng;

/// Relative tolerance on planted headline ratios.
const RATIO_TOL: f64 = 0.01;
/// Absolute tolerance on the TTFT-ablated chat weights.
const ABLATION_TOL: f64 = 0.005;
/// Absolute tolerance on per-precision mean fidelity.
const FIDELITY_TOL: f64 = 0.05;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a / b - 1.0).abs() <= rel
}

fn energy_worked_example() -> Outcome {
    let hw = builtin_hardware_table().into_iter().find(|h| h.name == "Cerebras WSE-3").ok_or("no WSE-3 row")?;
    let a = EnergyAssumptions::modeled(&hw);
    let started = Instant::now();
    let j = joules_per_token(&hw, &a, 2988.0).map_err(e)?;
    let took = started.elapsed();
    let oracle = 23_000.0 * 0.70 * 1.20 / 2988.0;
    ensure((j - oracle).abs() < 1e-12, || format!("j = {j}, oracle {oracle}"))?;
    ensure((j - 6.4659).abs() < 5e-5, || format!("j = {j}"))?;
    ensure(close(j, 6.5, 0.01), || format!("j = {j} not within 1% of 6.5"))?;
    ensure(took < Duration::from_millis(1), || format!("took {took:?}"))?;
    Ok(format!("J/token = {j:.4} in {took:?}"))
}

fn headline_identity() -> Outcome {
    let (j, _) = headline_values(0.18, 1e-6, 2900.0, 0.78);
    ensure((j - 669.23).abs() <= 0.01, || format!("j_ca = {j}"))?;
    let (zj, zc) = headline_values(0.18, 1e-6, 2900.0, 0.0);
    ensure(zj == f64::INFINITY && zc == f64::INFINITY, || format!("A = 0 gave ({zj}, {zc})"))?;
    Ok(format!("j_ca = {j:.2}, A = 0 gives inf"))
}

fn preset_table() -> Outcome {
    let presets = builtin_presets();
    ensure(presets.len() == 10, || format!("{} presets", presets.len()))?;
    let get = |n: &str| presets.iter().find(|p| p.name == n).ok_or(format!("no `{n}` preset"));
    let chat = get("chat")?;
    ensure(chat.weights.0 == [0.2, 0.3, 0.2, 0.2, 0.1], || format!("chat = {:?}", chat.weights.0))?;
    let batch = get("batch")?;
    ensure(batch.weights.get(Factor::Price) == 0.65, || format!("batch w_P = {}", batch.weights.get(Factor::Price)))?;
    for p in &presets {
        ensure((p.weights.sum() - 1.0).abs() <= 1e-9, || format!("{} sums to {}", p.name, p.weights.sum()))?;
    }
    Ok("10 presets, chat (0.2, 0.3, 0.2, 0.2, 0.1), batch w_P 0.65".into())
}

fn hardware_table() -> Outcome {
    let hw = builtin_hardware_table();
    ensure(hw.len() == 10, || format!("{} rows", hw.len()))?;
    let tdp = |n: &str| hw.iter().find(|h| h.name == n).map(|h| h.tdp_watts).ok_or(format!("no `{n}` row"));
    ensure(tdp("Cerebras WSE-3")? == 23_000.0, || "WSE-3 TDP".into())?;
    ensure(tdp("Groq LPU")? == 215.0, || "Groq LPU TDP".into())?;
    Ok("10 classes, WSE-3 23000 W, Groq LPU 215 W".into())
}

fn six_endpoint_recovery() -> Outcome {
    let planted = [(0.18, 2988.0, 0.0), (0.25, 1200.0, 0.02), (0.36, 248.0, 0.05), (0.30, 600.0, 0.10), (0.22, 900.0, 0.20), (0.40, 450.0, 0.01)];
    let specs: Vec<SimEndpointSpec> = planted
        .iter()
        .enumerate()
        .map(|(i, &(ttft, tps, err))| {
            let id = EndpointId::new(format!("p{i}"), "m", "standard", Precision::Bf16, Decoding::Standard, "us-east");
            let mut s = SimEndpointSpec::new(id, ttft, tps, 100 + i as u64);
            s.ttft_log_sigma = 0.3;
            s.jitter_cv = 0.2;
            s.error_rate = err;
            s
        })
        .collect();
    let fleet = spawn_fleet(specs.clone(), vec![]).map_err(e)?;
    let plan = ProbePlan {
        cadence_secs: 60,
        conditions: vec![ProbeConditions::new(1_000, 1, "us-east").map_err(e)?],
        rotation_seed: 11,
        prompts_per_day: 50,
        max_tokens: 64,
        deadline_secs: 120.0,
    };
    let started = Instant::now();
    let window = TimeWindow::new(Timestamp(0), Timestamp(500 * 60_000)).map_err(e)?;
    let ids: Vec<_> = specs.iter().map(|s| s.endpoint_id.clone()).collect();
    let records: Vec<ProbeRecord> = plan
        .jobs(&ids, window)
        .map_err(e)?
        .iter()
        .map(|j| plan.run_job(&fleet, j))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let took = started.elapsed();
    let mut worst = 0.0f64;
    for (spec, &(ttft, tps, err)) in specs.iter().zip(&planted) {
        let mine: Vec<ProbeRecord> = records.iter().filter(|r| r.endpoint == spec.endpoint_id).cloned().collect();
        ensure(mine.len() == 500, || format!("{} probes for {}", mine.len(), spec.endpoint_id))?;
        let s = summarize(&mine).map_err(e)?;
        let t = s.ttft_p50.ok_or("no TTFT")? / ttft - 1.0;
        let v = s.output_speed.ok_or("no speed")? / tps - 1.0;
        worst = worst.max(t.abs()).max(v.abs());
        ensure(t.abs() < 0.05 && v.abs() < 0.05, || format!("{}: TTFT {t:+.3}, speed {v:+.3}", spec.endpoint_id))?;
        ensure((s.error_rate - err).abs() <= 0.05, || format!("{}: error rate {}", spec.endpoint_id, s.error_rate))?;
    }
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    Ok(format!("6 x 500 probes, worst relative error {worst:.3} in {took:.1?}"))
}

fn fidelity_groups(f: &Loaded) -> Outcome {
    let reg = &f.bundle.registry;
    let cohort: Vec<_> = reg.cohort(fixture::HEADLINE_MODEL).map_err(e)?.into_iter().map(|x| x.id.clone()).collect();
    let results: Vec<_> = f.snapshot.fidelity.iter().filter(|r| cohort.contains(&r.endpoint)).cloned().collect();
    let acc = endpointbench_core::analysis::suite_accuracies(&f.snapshot, reg);
    let groups = fidelity_by_sku(&results, reg, &acc, &[HEADLINE_SUITE, AIME_SUITE, CODE_SUITE]).map_err(e)?;
    let group = |p: Precision| groups.iter().find(|g| g.precision == p).ok_or(format!("no {p} group"));
    let (bf16, fp8) = (group(Precision::Bf16)?, group(Precision::Fp8)?);
    ensure(bf16.n == planted::BF16_COUNT && fp8.n == planted::FP8_COUNT, || format!("n = {} / {}", bf16.n, fp8.n))?;
    ensure((bf16.mean_f - planted::BF16_MEAN_F).abs() <= FIDELITY_TOL, || format!("BF16 mean {}", bf16.mean_f))?;
    ensure((fp8.mean_f - planted::FP8_MEAN_F).abs() <= FIDELITY_TOL, || format!("FP8 mean {}", fp8.mean_f))?;
    ensure(FidelityFlag::from_score(bf16.mean_f) == FidelityFlag::Faithful, || "BF16 flag".into())?;
    ensure(FidelityFlag::from_score(fp8.mean_f) == FidelityFlag::QuantizedOrModified, || "FP8 flag".into())?;

    let eps = [0.0, 0.05, 0.1, 0.2, 0.3];
    let specs: Vec<SimEndpointSpec> = eps
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let id = EndpointId::new(format!("p{i}"), "m", "standard", Precision::Fp8, Decoding::Standard, "us-east");
            let mut s = SimEndpointSpec::new(id, 0.2, 500.0, 40);
            s.perturbation_epsilon = *x;
            s
        })
        .collect();
    let fleet = spawn_fleet(specs.clone(), vec![]).map_err(e)?;
    let refset = ReferenceSet::synthetic(8, 4, 8, 3);
    let fps = specs
        .iter()
        .map(|s| capture_fingerprint(&fleet, &s.endpoint_id, &refset, Timestamp(0)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e)?;
    let fs = fps
        .iter()
        .map(|fp| fidelity(fp, &fps[0], fixture::Z, false).map(|r| r.f))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e)?;
    ensure(fidelity(&fps[0], &fps[0], fixture::Z, false).map_err(e)?.f == 100.0, || "f(fp, fp) != 100".into())?;
    ensure(fs.windows(2).all(|w| w[0] >= w[1]), || format!("not monotone: {fs:?}"))?;
    Ok(format!(
        "BF16 n={} mean {:.1}, FP8 n={} mean {:.1}; F over eps {:?}",
        bf16.n,
        bf16.mean_f,
        fp8.n,
        fp8.mean_f,
        fs.iter().map(|x| (x * 10.0).round() / 10.0).collect::<Vec<_>>()
    ))
}

fn golden_pipeline() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let started = Instant::now();
    let built = fixture::build(dir.path()).map_err(e)?;
    let f = Loaded::open(dir.path(), &built.snapshot_dir)?;
    let took = started.elapsed();
    let cfg = ScoringConfig::default();
    let reg = &f.bundle.registry;
    let r = within_model(reg, &f.snapshot, fixture::HEADLINE_MODEL, &cfg).map_err(e)?;
    let gap = |a: Axis| r.rows.iter().find(|row| row.axis == a).map(|row| row.gap).ok_or(format!("no {} row", a.key()));
    let checks = [
        ("speed", gap(Axis::Speed)?, planted::SPEED_RATIO),
        ("price", gap(Axis::BlendedPrice)?, planted::PRICE_RATIO),
        ("fidelity", gap(Axis::Fidelity)?, planted::FIDELITY_GAP),
        ("J/correct", gap(Axis::JoulesPerCorrect)?, planted::J_PER_CORRECT_RATIO),
    ];
    for (name, got, want) in checks {
        ensure(close(got, want, RATIO_TOL), || format!("{name} gap {got} vs planted {want}"))?;
    }

    let m = overlap_matrix(reg, &f.snapshot, &OVERLAP_PRESETS, 10, &cfg).map_err(e)?;
    for i in 0..m.cells.len() {
        ensure(m.cells[i][i] == 10, || format!("diagonal {i} = {}", m.cells[i][i]))?;
        for j in 0..m.cells.len() {
            ensure(m.cells[i][j] == m.cells[j][i], || format!("overlap asymmetric at ({i}, {j})"))?;
        }
    }

    let ab = ablation_report(reg, &f.snapshot, "chat", 10, &Scope::Full, &cfg).map_err(e)?;
    let w = ab.rows.iter().find(|row| row.ablated == Some(Factor::Ttft)).ok_or("no TTFT ablation row")?.weights.0;
    let want = [0.2 / 0.7, 0.0, 0.2 / 0.7, 0.2 / 0.7, 0.1 / 0.7];
    ensure(w.iter().zip(want).all(|(a, b)| (a - b).abs() <= ABLATION_TOL), || format!("without TTFT = {w:?}"))?;
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!(
        "speed {:.2}x, price {:.2}x, fidelity {:.1} pts, J/correct {:.2}x; overlap symmetric; in {took:.1?}",
        checks[0].1, checks[1].1, checks[2].1, checks[3].1
    ))
}

fn perturbation_and_bootstrap(f: &Loaded) -> Outcome {
    let reg = &f.bundle.registry;
    let chat = reg.preset("chat").map_err(e)?;
    let p = perturb_weights(chat, Factor::Price, 0.10).map_err(e)?.weights.0;
    let want = [0.175, 0.2625, 0.3, 0.175, 0.0875];
    ensure(p.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-12), || format!("chat price+ = {p:?}"))?;
    let mut feasible = 0;
    for name in OVERLAP_PRESETS {
        let preset = reg.preset(name).map_err(e)?;
        for factor in Factor::ALL {
            for d in [0.10, -0.10] {
                if let Ok(q) = perturb_weights(preset, factor, d) {
                    feasible += 1;
                    ensure((q.weights.sum() - 1.0).abs() <= 1e-12, || format!("{name} {factor:?} {d} sums to {}", q.weights.sum()))?;
                }
            }
        }
    }

    let cfg = ScoringConfig::default();
    let target = reg.endpoints()[0].id.clone();
    let degenerate = degenerate_copy(&f.snapshot, &target);
    let ci = bootstrap_ci(reg, &degenerate, &target, "chat", 200, 3, &Scope::Full, &cfg).map_err(e)?;
    ensure(ci.upper == ci.lower && ci.lower == ci.median, || format!("degenerate CI {ci:?}"))?;

    let a = bootstrap_ci(reg, &f.snapshot, &target, "chat", 200, 42, &Scope::Full, &cfg).map_err(e)?;
    let b = bootstrap_ci(reg, &f.snapshot, &target, "chat", 200, 42, &Scope::Full, &cfg).map_err(e)?;
    ensure(a == b, || "same seed gave different intervals".into())?;
    ensure(a.lower <= a.median && a.median <= a.upper, || format!("unordered CI {a:?}"))?;
    Ok(format!(
        "chat price+ exact, {feasible} feasible perturbations sum to 1, degenerate width 0, seeded CI [{:.4}, {:.4}] reproducible",
        a.lower, a.upper
    ))
}

/// Every probe of `target` made identical, and one eval run kept per suite.
fn degenerate_copy(snap: &Snapshot, target: &EndpointId) -> Snapshot {
    let mut s = snap.clone();
    let first = s.probe_records.iter().find(|p| &p.endpoint == target).cloned().expect("target has probes");
    for p in s.probe_records.iter_mut().filter(|p| &p.endpoint == target) {
        let t = p.request_time;
        *p = first.clone();
        p.request_time = t;
    }
    let mut seen = std::collections::BTreeSet::new();
    s.eval_runs.sort_by_key(|r| std::cmp::Reverse(r.window.end));
    s.eval_runs.retain(|r| &r.endpoint != target || seen.insert(r.suite.clone()));
    s
}

fn rank_statistics() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for trial in 0..100 {
        let n = 2 + trial % 60;
        let mut a: Vec<f64> = (0..n).map(|i| i as f64).collect();
        a.shuffle(&mut rng);
        let rev: Vec<f64> = a.iter().map(|x| -x).collect();
        let same = spearman(&a, &a).map_err(e)?;
        let opposite = spearman(&a, &rev).map_err(e)?;
        ensure((same - 1.0).abs() < 1e-12 && (opposite + 1.0).abs() < 1e-12, || format!("trial {trial}: {same}, {opposite}"))?;
    }
    for trial in 0..1000 {
        let n = 10 + trial % 31;
        let mut a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let k = trial % (n + 1);
        let brute = a[..k].iter().filter(|x| b[..k].contains(x)).count();
        let got = topk_overlap(&a, &b, k).map_err(e)?;
        ensure(got == brute, || format!("pair {trial}: {got} vs {brute}"))?;
    }
    Ok("rho = +/-1 over 100 trials; top-k overlap matches brute force over 1000 pairs".into())
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let started = Instant::now();
    let fleet = fixture::committed().root;
    let sim_out = dir.path().join("sim");
    cli(&["simulate", "--fleet", path(&fleet), "--days", "1", "--virtual-clock", "--out", path(&sim_out)])?;
    let snap = sim_out.join("snapshot").join(fixture::VERSION);
    let out = dir.path().join("reports");
    let s = path(&snap);
    cli(&["all", "--snapshot", s, "--out", path(&out)])?;
    let id = "cerebras/gpt-oss-120b/standard/BF16/standard/us-east";
    cli(&["bootstrap", "--endpoint", id, "--preset", "chat", "--n", "200", "--snapshot", s, "--out", path(&out)])?;
    let took = started.elapsed();

    let names = [
        report::WITHIN_MODEL,
        report::LOO,
        report::FINGERPRINT_BY_SKU,
        report::OVERLAP,
        report::ABLATION,
        report::SENSITIVITY,
        report::BOOTSTRAP,
        report::REGISTRY_SUMMARY,
        report::TDP_TABLE,
    ];
    for name in names {
        let t = CsvFile::read(&out.join(name)).map_err(e)?;
        ensure(t.len() > 0, || format!("{name} is empty"))?;
    }
    let bundle = RegistryBundle::load(&sim_out.join("registry")).map_err(e)?;
    snapshot_io::import(&snap, &bundle).map_err(e)?;
    ensure(took < Duration::from_secs(300), || format!("took {took:?}"))?;
    Ok(format!("simulate, {} reports and re-import in {took:.1?}", names.len()))
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with(std::iter::once("epbench").chain(args.iter().copied()), &mut out, &mut err);
    ensure(code == ExitCode::SUCCESS, || format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&err)))
}

struct Loaded {
    bundle: RegistryBundle,
    snapshot: Snapshot,
}

impl Loaded {
    fn open(root: &Path, snapshot: &Path) -> Result<Self, String> {
        let bundle = RegistryBundle::load(&fixture::Layout::new(root).registry()).map_err(e)?;
        let snapshot = snapshot_io::import(snapshot, &bundle).map_err(e)?;
        Ok(Loaded { bundle, snapshot })
    }
}

fn main() -> ExitCode {
    let committed = fixture::committed();
    let fixture = Loaded::open(&committed.root, &committed.snapshot(fixture::VERSION));
    let with_fixture = |check: fn(&Loaded) -> Outcome| -> Outcome {
        match &fixture {
            Ok(f) => check(f),
            Err(err) => Err(format!("fixture unavailable: {err}")),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("energy worked example", energy_worked_example()),
        ("headline J per correct answer", headline_identity()),
        ("workload preset table", preset_table()),
        ("hardware TDP table", hardware_table()),
        ("six-endpoint latency recovery", six_endpoint_recovery()),
        ("fidelity by precision and monotone in eps", with_fixture(fidelity_groups)),
        ("golden pipeline recovers planted gaps", golden_pipeline()),
        ("weight perturbation and bootstrap", with_fixture(perturbation_and_bootstrap)),
        ("rank statistics", rank_statistics()),
        ("end-to-end simulate and analyses", end_to_end()),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
