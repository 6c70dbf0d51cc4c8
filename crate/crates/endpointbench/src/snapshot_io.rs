//! Snapshot directories: `<root>/<version>/` holding one canonical CSV per
//! table plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use endpointbench_core::energy::{EnergyAssumptions, EnergyEstimate};
use endpointbench_core::eval::EvalRun;
use endpointbench_core::fingerprint::{FidelityResult, Fingerprint};
use endpointbench_core::probe::{LatencySummary, ProbeConditions, ProbeRecord};
use endpointbench_core::scoring::{CompositeScore, HeadlineMetrics};
use endpointbench_core::snapshot::Snapshot;
use endpointbench_core::{TimeWindow, Timestamp};
use serde::{Deserialize, Serialize};

use crate::canon::{id_cells, join_nums, num, opt, opt_num, split_nums, CsvFile, Row, Table};
use crate::error::{Error, Result};
use crate::registry_io::RegistryBundle;

pub const MANIFEST: &str = "manifest.json";

pub const TABLES: [&str; 8] = [
    "probe_records",
    "latency_summaries",
    "eval_runs",
    "fingerprints",
    "fidelity",
    "energy_estimates",
    "composite_scores",
    "headline",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub as_of: i64,
    pub as_of_utc: String,
    pub registry_hash: String,
    pub tables: Vec<String>,
}

fn utc(t: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp_millis(t.millis())
        .map(|d| d.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
        .unwrap_or_default()
}

fn conditions_cells(c: &ProbeConditions) -> [String; 3] {
    [c.input_length.to_string(), c.concurrency.to_string(), c.region.clone()]
}

fn conditions(r: &Row<'_>) -> Result<ProbeConditions> {
    let c = ProbeConditions {
        input_length: r.parse("input_length")?,
        concurrency: r.parse("concurrency")?,
        region: r.str("condition_region")?.into(),
    };
    c.validate().map_err(|e| r.error("input_length", e.to_string()))?;
    Ok(c)
}

fn window(r: &Row<'_>) -> Result<TimeWindow> {
    let w = TimeWindow::new(Timestamp(r.parse("window_start")?), Timestamp(r.parse("window_end")?));
    w.map_err(|e| r.error("window_end", e.to_string()))
}

const CONDITION_COLUMNS: [&str; 3] = ["input_length", "concurrency", "condition_region"];
const FACTORS: [&str; 5] = ["speed", "ttft", "price", "quality", "reliability"];

/// Every snapshot table in canonical form, keyed by file stem.
pub fn tables(snap: &Snapshot) -> Vec<(&'static str, Table)> {
    let mut probes = Table::with_id(
        "",
        CONDITION_COLUMNS.iter().copied().chain([
            "request_time",
            "ttft",
            "ttfv",
            "inter_token_gaps",
            "total_time",
            "output_tokens",
            "status",
            "response_hash",
            "prompt_set_day",
        ]),
    );
    for p in &snap.probe_records {
        let mut row = id_cells(&p.endpoint).to_vec();
        row.extend(conditions_cells(&p.conditions));
        row.extend([
            p.request_time.millis().to_string(),
            num(p.ttft),
            opt_num(p.ttfv),
            join_nums(&p.inter_token_gaps),
            num(p.total_time),
            p.output_tokens.to_string(),
            p.status.as_str().into(),
            p.response_hash.clone(),
            p.prompt_set_day.to_string(),
        ]);
        probes.push(row);
    }

    let mut summaries = Table::with_id(
        "",
        CONDITION_COLUMNS.iter().copied().chain([
            "window_start",
            "window_end",
            "ttft_p50",
            "ttft_p95",
            "ttft_p99",
            "ttfv_p50",
            "output_speed",
            "jitter",
            "completion_rate",
            "error_rate",
            "n_probes",
        ]),
    );
    for s in &snap.latency_summaries {
        let mut row = id_cells(&s.endpoint).to_vec();
        row.extend(conditions_cells(&s.conditions));
        row.extend([
            s.window.start.millis().to_string(),
            s.window.end.millis().to_string(),
            opt_num(s.ttft_p50),
            opt_num(s.ttft_p95),
            opt_num(s.ttft_p99),
            opt_num(s.ttfv_p50),
            opt_num(s.output_speed),
            opt_num(s.jitter),
            num(s.completion_rate),
            num(s.error_rate),
            s.n_probes.to_string(),
        ]);
        summaries.push(row);
    }

    let mut evals = Table::with_id(
        "",
        [
            "suite",
            "window_start",
            "window_end",
            "accuracy",
            "tokens_to_solution",
            "input_tokens",
            "output_tokens",
            "thinking_tokens",
            "wall_clock",
            "dollar_cost",
            "n_tasks",
            "n_solved",
            "eval_errors",
        ],
    );
    for e in &snap.eval_runs {
        let mut row = id_cells(&e.endpoint).to_vec();
        row.extend([
            e.suite.clone(),
            e.window.start.millis().to_string(),
            e.window.end.millis().to_string(),
            num(e.accuracy),
            opt_num(e.tokens_to_solution),
            e.input_tokens.to_string(),
            e.output_tokens.to_string(),
            e.thinking_tokens.to_string(),
            num(e.wall_clock),
            num(e.dollar_cost),
            e.n_tasks.to_string(),
            e.n_solved.to_string(),
            e.eval_errors.to_string(),
        ]);
        evals.push(row);
    }

    let mut fps = Table::with_id(
        "",
        ["refset_hash", "positions_per_prompt", "capture_time", "row", "distribution"],
    );
    for f in &snap.fingerprints {
        for (i, d) in f.distributions.iter().enumerate() {
            let cells: Vec<String> = d.iter().map(|(t, p)| format!("{t}:{}", num(*p))).collect();
            let mut row = id_cells(&f.endpoint).to_vec();
            row.extend([
                f.refset_hash.clone(),
                f.positions_per_prompt.to_string(),
                f.capture_time.millis().to_string(),
                i.to_string(),
                cells.join(";"),
            ]);
            fps.push(row);
        }
    }

    let mut fidelity = Table::with_id(
        "",
        [
            "ref_provider",
            "ref_model",
            "ref_sku",
            "ref_precision",
            "ref_decoding",
            "ref_region",
            "kl_sym",
            "f",
            "flag",
            "second_tier",
        ],
    );
    for f in &snap.fidelity {
        let mut row = id_cells(&f.endpoint).to_vec();
        row.extend(id_cells(&f.reference_endpoint));
        row.extend([num(f.kl_sym), num(f.f), f.flag.as_str().into(), f.second_tier.to_string()]);
        fidelity.push(row);
    }

    let mut energy = Table::with_id(
        "",
        [
            "j_per_token",
            "kwh_per_mtok",
            "gco2_per_mtok",
            "utilization",
            "utilization_provenance",
            "pue",
            "pue_provenance",
            "sparsity",
            "sparsity_provenance",
            "sharing_factor",
            "grid_intensity",
            "throughput_used",
        ],
    );
    for e in &snap.energy_estimates {
        let a = &e.assumptions;
        let mut row = id_cells(&e.endpoint).to_vec();
        row.extend([
            num(e.j_per_token),
            num(e.kwh_per_mtok),
            num(e.gco2_per_mtok),
            num(a.utilization),
            a.utilization_provenance.as_str().into(),
            num(a.pue),
            a.pue_provenance.as_str().into(),
            num(a.sparsity),
            a.sparsity_provenance.as_str().into(),
            num(e.sharing_factor),
            num(e.grid_intensity),
            num(e.throughput_used),
        ]);
        energy.push(row);
    }

    let mut composite = Table::with_id(
        "",
        ["preset", "scope", "rank", "score"]
            .into_iter()
            .map(String::from)
            .chain(FACTORS.iter().map(|f| format!("n_{f}")))
            .chain(FACTORS.iter().map(|f| format!("raw_{f}"))),
    );
    for c in &snap.composite_scores {
        let mut row = id_cells(&c.endpoint).to_vec();
        row.extend([c.preset.clone(), c.scope.to_string(), c.rank.to_string(), num(c.score)]);
        row.extend(c.normalized.iter().map(|v| num(*v)));
        row.extend(c.raw.iter().map(|v| num(*v)));
        composite.push(row);
    }

    let mut headline = Table::with_id(
        "",
        [
            "j_ca",
            "c_ca",
            "j_per_token",
            "price_per_token",
            "tokens_to_solution",
            "accuracy",
            "effective_context",
        ],
    );
    for h in &snap.headline {
        let mut row = id_cells(&h.endpoint).to_vec();
        row.extend([
            num(h.j_ca),
            num(h.c_ca),
            num(h.j_per_token),
            num(h.price_per_token),
            num(h.tokens_to_solution),
            num(h.accuracy),
            opt(h.effective_context),
        ]);
        headline.push(row);
    }

    vec![
        ("probe_records", probes),
        ("latency_summaries", summaries),
        ("eval_runs", evals),
        ("fingerprints", fps),
        ("fidelity", fidelity),
        ("energy_estimates", energy),
        ("composite_scores", composite),
        ("headline", headline),
    ]
}

/// Writes the snapshot under `root/<version>/` and returns that directory.
pub fn export(root: &Path, snap: &Snapshot) -> Result<PathBuf> {
    let dir = root.join(&snap.version);
    write_dir(&dir, snap)?;
    Ok(dir)
}

/// Writes the snapshot tables and manifest directly into `dir`.
pub fn write_dir(dir: &Path, snap: &Snapshot) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    for (stem, table) in tables(snap) {
        table.write(&dir.join(format!("{stem}.csv")))?;
    }
    let manifest = Manifest {
        version: snap.version.clone(),
        as_of: snap.as_of.millis(),
        as_of_utc: utc(snap.as_of),
        registry_hash: snap.registry_hash.clone(),
        tables: TABLES.iter().map(|t| format!("{t}.csv")).collect(),
    };
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(Error::io(&path))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

/// Reads a snapshot directory, refusing it when it was built against a
/// different registry than `bundle`.
pub fn import(dir: &Path, bundle: &RegistryBundle) -> Result<Snapshot> {
    let manifest = read_manifest(dir)?;
    let expected = bundle.hash();
    if manifest.registry_hash != expected {
        return Err(Error::RegistryMismatch {
            version: manifest.version,
            found: manifest.registry_hash,
            expected,
        });
    }
    let snap = read_tables(dir, &manifest)?;
    snap.validate(&bundle.registry)?;
    Ok(snap)
}

fn table(dir: &Path, stem: &str) -> Result<CsvFile> {
    CsvFile::read(&dir.join(format!("{stem}.csv")))
}

fn read_tables(dir: &Path, manifest: &Manifest) -> Result<Snapshot> {
    let mut snap = Snapshot {
        version: manifest.version.clone(),
        as_of: Timestamp(manifest.as_of),
        registry_hash: manifest.registry_hash.clone(),
        ..Snapshot::default()
    };

    let f = table(dir, "probe_records")?;
    for r in f.rows() {
        let gaps_cell = r.str("inter_token_gaps")?;
        let rec = ProbeRecord {
            endpoint: r.endpoint_id("")?,
            conditions: conditions(&r)?,
            request_time: Timestamp(r.parse("request_time")?),
            ttft: r.f64("ttft")?,
            ttfv: r.opt_f64("ttfv")?,
            inter_token_gaps: split_nums(gaps_cell)
                .ok_or_else(|| r.error("inter_token_gaps", "expected `;`-separated numbers"))?,
            total_time: r.f64("total_time")?,
            output_tokens: r.parse("output_tokens")?,
            status: r.parse("status")?,
            response_hash: r.str("response_hash")?.into(),
            prompt_set_day: r.parse("prompt_set_day")?,
        };
        rec.validate().map_err(|e| r.error("ttft", e.to_string()))?;
        snap.probe_records.push(rec);
    }

    let f = table(dir, "latency_summaries")?;
    for r in f.rows() {
        snap.latency_summaries.push(LatencySummary {
            endpoint: r.endpoint_id("")?,
            conditions: conditions(&r)?,
            window: window(&r)?,
            ttft_p50: r.opt_f64("ttft_p50")?,
            ttft_p95: r.opt_f64("ttft_p95")?,
            ttft_p99: r.opt_f64("ttft_p99")?,
            ttfv_p50: r.opt_f64("ttfv_p50")?,
            output_speed: r.opt_f64("output_speed")?,
            jitter: r.opt_f64("jitter")?,
            completion_rate: r.f64("completion_rate")?,
            error_rate: r.f64("error_rate")?,
            n_probes: r.parse("n_probes")?,
        });
    }

    let f = table(dir, "eval_runs")?;
    for r in f.rows() {
        snap.eval_runs.push(EvalRun {
            endpoint: r.endpoint_id("")?,
            suite: r.str("suite")?.into(),
            window: window(&r)?,
            accuracy: r.f64("accuracy")?,
            tokens_to_solution: r.opt_f64("tokens_to_solution")?,
            input_tokens: r.parse("input_tokens")?,
            output_tokens: r.parse("output_tokens")?,
            thinking_tokens: r.parse("thinking_tokens")?,
            wall_clock: r.f64("wall_clock")?,
            dollar_cost: r.f64("dollar_cost")?,
            n_tasks: r.parse("n_tasks")?,
            n_solved: r.parse("n_solved")?,
            eval_errors: r.parse("eval_errors")?,
        });
    }

    let f = table(dir, "fingerprints")?;
    for r in f.rows() {
        let endpoint = r.endpoint_id("")?;
        let capture_time = Timestamp(r.parse("capture_time")?);
        let index: usize = r.parse("row")?;
        let mut dist = Vec::new();
        for cell in r.str("distribution")?.split(';').filter(|c| !c.is_empty()) {
            let parsed = cell
                .split_once(':')
                .and_then(|(t, p)| Some((t.parse::<u32>().ok()?, crate::canon::parse_f64(p)?)));
            dist.push(parsed.ok_or_else(|| r.error("distribution", format!("`{cell}` is not token:probability")))?);
        }
        let continues = snap
            .fingerprints
            .last()
            .is_some_and(|fp: &Fingerprint| fp.endpoint == endpoint && fp.capture_time == capture_time);
        if continues {
            let fp = snap.fingerprints.last_mut().expect("checked above");
            if index != fp.distributions.len() {
                return Err(r.error("row", format!("expected row {}", fp.distributions.len())));
            }
            fp.distributions.push(dist);
        } else {
            if index != 0 {
                return Err(r.error("row", "a fingerprint must start at row 0"));
            }
            snap.fingerprints.push(Fingerprint {
                endpoint,
                refset_hash: r.str("refset_hash")?.into(),
                positions_per_prompt: r.parse("positions_per_prompt")?,
                distributions: vec![dist],
                capture_time,
            });
        }
    }
    for fp in &snap.fingerprints {
        fp.validate().map_err(|e| Error::format(&f.path, e.to_string()))?;
    }

    let f = table(dir, "fidelity")?;
    for r in f.rows() {
        snap.fidelity.push(FidelityResult {
            endpoint: r.endpoint_id("")?,
            reference_endpoint: r.endpoint_id("ref_")?,
            kl_sym: r.f64("kl_sym")?,
            f: r.f64("f")?,
            flag: r.parse("flag")?,
            second_tier: r.bool("second_tier")?,
        });
    }

    let f = table(dir, "energy_estimates")?;
    for r in f.rows() {
        let e = EnergyEstimate {
            endpoint: r.endpoint_id("")?,
            j_per_token: r.f64("j_per_token")?,
            kwh_per_mtok: r.f64("kwh_per_mtok")?,
            gco2_per_mtok: r.f64("gco2_per_mtok")?,
            assumptions: EnergyAssumptions {
                utilization: r.f64("utilization")?,
                utilization_provenance: r.parse("utilization_provenance")?,
                pue: r.f64("pue")?,
                pue_provenance: r.parse("pue_provenance")?,
                sparsity: r.f64("sparsity")?,
                sparsity_provenance: r.parse("sparsity_provenance")?,
            },
            sharing_factor: r.f64("sharing_factor")?,
            grid_intensity: r.f64("grid_intensity")?,
            throughput_used: r.f64("throughput_used")?,
        };
        e.validate().map_err(|err| r.error("kwh_per_mtok", err.to_string()))?;
        snap.energy_estimates.push(e);
    }

    let f = table(dir, "composite_scores")?;
    for r in f.rows() {
        let five = |prefix: &str| -> Result<[f64; 5]> {
            let mut out = [0.0; 5];
            for (o, f) in out.iter_mut().zip(FACTORS) {
                *o = r.f64(&format!("{prefix}{f}"))?;
            }
            Ok(out)
        };
        snap.composite_scores.push(CompositeScore {
            endpoint: r.endpoint_id("")?,
            preset: r.str("preset")?.into(),
            scope: r.parse("scope")?,
            score: r.f64("score")?,
            rank: r.parse("rank")?,
            normalized: five("n_")?,
            raw: five("raw_")?,
        });
    }

    let f = table(dir, "headline")?;
    for r in f.rows() {
        snap.headline.push(HeadlineMetrics {
            endpoint: r.endpoint_id("")?,
            j_ca: r.f64("j_ca")?,
            c_ca: r.f64("c_ca")?,
            j_per_token: r.f64("j_per_token")?,
            price_per_token: r.f64("price_per_token")?,
            tokens_to_solution: r.f64("tokens_to_solution")?,
            accuracy: r.f64("accuracy")?,
            effective_context: r.opt_parse("effective_context")?,
        });
    }
    Ok(snap)
}
