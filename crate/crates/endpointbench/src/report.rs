//! Analysis reports as CSV tables. Each builder returns the file name it
//! exports to together with the table.

use endpointbench_core::analysis::{
    ablation_report, bootstrap_ci, leave_one_out, overlap_matrix, perturb_weights, sensitivity_report,
    suite_accuracies, within_model, AxisRow, GapKind, Sign,
};
use endpointbench_core::eval::{AIME_SUITE, CODE_SUITE, HEADLINE_SUITE};
use endpointbench_core::fingerprint::fidelity_by_sku;
use endpointbench_core::registry::OVERLAP_PRESETS;
use endpointbench_core::scoring::{Scope, ScoringConfig};
use endpointbench_core::snapshot::Snapshot;
use endpointbench_core::{EndpointId, Factor, FactorWeights, Registry};

use crate::canon::{id_cells, num, opt_num, Table};
use crate::error::Result;

pub const WITHIN_MODEL: &str = "within_model.csv";
pub const FINGERPRINT_BY_SKU: &str = "fingerprint_by_sku.csv";
pub const OVERLAP: &str = "overlap.csv";
pub const ABLATION: &str = "ablation.csv";
pub const SENSITIVITY: &str = "sensitivity.csv";
pub const BOOTSTRAP: &str = "bootstrap.csv";
pub const LOO: &str = "loo.csv";
pub const REGISTRY_SUMMARY: &str = "registry_summary.csv";
pub const TDP_TABLE: &str = "tdp_table.csv";

fn weight_headers(prefix: &str) -> Vec<String> {
    Factor::ALL.iter().map(|f| format!("{prefix}{}", f.as_str())).collect()
}

fn weight_cells(w: &FactorWeights) -> Vec<String> {
    w.0.iter().map(|v| num(*v)).collect()
}

/// Axis values at the precision the axis is usually quoted with.
fn short(row: &AxisRow, v: f64) -> String {
    use endpointbench_core::analysis::Axis::*;
    let digits = match row.axis {
        Speed | EffectiveContext => 0,
        Quality | AimeAccuracy | CodeAccuracy | Fidelity | JoulesPerCorrect => 1,
        TtftP50 | TtftP99 | BlendedPrice | JoulesPerToken => 2,
        DollarsPerCorrect => 4,
    };
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.digits$}")
    }
}

pub fn within_model_table(registry: &Registry, snap: &Snapshot, model: &str) -> Result<Table> {
    let r = within_model(registry, snap, model, &ScoringConfig::default())?;
    let mut t = Table::new(["axis", "label", "min", "max", "gap", "gap_kind", "min_display", "max_display", "gap_display"]);
    for row in &r.rows {
        t.push(vec![
            row.axis.key().into(),
            row.label.clone(),
            num(row.min),
            num(row.max),
            num(row.gap),
            match row.gap_kind {
                GapKind::Ratio => "ratio".into(),
                GapKind::Points => "points".into(),
            },
            short(row, row.min),
            short(row, row.max),
            row.gap_display(),
        ]);
    }
    Ok(t)
}

pub fn loo_table(registry: &Registry, snap: &Snapshot, model: &str) -> Result<Table> {
    let rows = leave_one_out(registry, snap, model, &ScoringConfig::default())?;
    let mut t = Table::new(["axis", "gap_full", "max_relative_change", "worst_drop"]);
    for r in rows {
        t.push(vec![
            r.axis.key().into(),
            num(r.gap_full),
            opt_num(r.max_relative_change),
            r.worst_drop.map(|id| id.to_string()).unwrap_or_default(),
        ]);
    }
    Ok(t)
}

/// Fidelity grouped by precision class within `model`'s cohort, with mean
/// accuracy deltas to the reference endpoint.
pub fn fingerprint_by_sku_table(registry: &Registry, snap: &Snapshot, model: &str) -> Result<Table> {
    let cohort: Vec<&EndpointId> = registry.cohort(model)?.into_iter().map(|e| &e.id).collect();
    let results: Vec<_> = snap.fidelity.iter().filter(|r| cohort.contains(&&r.endpoint)).cloned().collect();
    let suites = [HEADLINE_SUITE, AIME_SUITE, CODE_SUITE];
    let groups = fidelity_by_sku(&results, registry, &suite_accuracies(snap, registry), &suites)?;
    let mut headers = vec!["model".to_string(), "precision".into(), "n".into(), "mean_f".into(), "flag".into()];
    headers.extend(suites.iter().map(|s| format!("delta_{s}")));
    let mut t = Table::new(headers);
    for g in groups {
        let mut row = vec![
            model.to_string(),
            g.precision.as_str().into(),
            g.n.to_string(),
            num(g.mean_f),
            endpointbench_core::fingerprint::FidelityFlag::from_score(g.mean_f).as_str().into(),
        ];
        row.extend(g.deltas.iter().map(|(_, d)| opt_num(*d)));
        t.push(row);
    }
    Ok(t)
}

pub fn overlap_table(registry: &Registry, snap: &Snapshot, k: usize) -> Result<Table> {
    let m = overlap_matrix(registry, snap, &OVERLAP_PRESETS, k, &ScoringConfig::default())?;
    let mut headers = vec!["preset".to_string()];
    headers.extend(m.presets.iter().cloned());
    let mut t = Table::new(headers);
    for (name, cells) in m.presets.iter().zip(&m.cells) {
        let mut row = vec![name.clone()];
        row.extend(cells.iter().map(|c| c.to_string()));
        t.push(row);
    }
    Ok(t)
}

pub fn ablation_table(registry: &Registry, snap: &Snapshot, preset: &str, k: usize) -> Result<Table> {
    let r = ablation_report(registry, snap, preset, k, &Scope::Full, &ScoringConfig::default())?;
    let mut headers = vec!["preset".to_string(), "variant".into()];
    headers.extend(weight_headers("w_"));
    headers.extend(["spearman_rho".into(), "top_k_overlap".into(), "k".into()]);
    let mut t = Table::new(headers);
    for row in &r.rows {
        let variant = match row.ablated {
            None => "full".to_string(),
            Some(f) => format!("without_{}", f.as_str()),
        };
        let mut cells = vec![r.preset.clone(), variant];
        cells.extend(weight_cells(&row.weights));
        cells.extend([num(row.spearman_rho), row.top_k_overlap.to_string(), r.k.to_string()]);
        t.push(cells);
    }
    Ok(t)
}

/// Every ±`delta` single-factor perturbation of the six overlap presets.
/// Infeasible perturbations stay in the table with empty weights.
pub fn sensitivity_table(registry: &Registry, snap: &Snapshot, delta: f64, k: usize) -> Result<Table> {
    let rows = sensitivity_report(
        registry,
        snap,
        &OVERLAP_PRESETS,
        delta,
        &[Sign::Plus, Sign::Minus],
        k,
        &Scope::Full,
        &ScoringConfig::default(),
    )?;
    let mut headers = vec!["preset".to_string(), "factor".into(), "sign".into(), "delta".into(), "feasible".into()];
    headers.extend(weight_headers("w_"));
    headers.extend(["weight_sum".into(), "max_top_k_shift".into(), "leader_changed".into()]);
    let mut t = Table::new(headers);
    for r in rows {
        let mut cells = vec![
            r.preset.clone(),
            r.factor.as_str().into(),
            r.sign.as_str().into(),
            num(r.delta),
            r.feasible.to_string(),
        ];
        if r.feasible {
            let w = perturb_weights(registry.preset(&r.preset)?, r.factor, r.delta)?.weights;
            cells.extend(weight_cells(&w));
            cells.push(num(w.sum()));
            cells.extend([r.max_top_k_shift.to_string(), r.leader_changed.to_string()]);
        } else {
            cells.extend(std::iter::repeat_n(String::new(), Factor::ALL.len() + 3));
        }
        t.push(cells);
    }
    Ok(t)
}

pub fn bootstrap_table(
    registry: &Registry,
    snap: &Snapshot,
    endpoint: &EndpointId,
    preset: &str,
    n: u32,
    seed: u64,
) -> Result<Table> {
    let ci = bootstrap_ci(registry, snap, endpoint, preset, n, seed, &Scope::Full, &ScoringConfig::default())?;
    let mut t = Table::with_id("", ["preset", "n_resamples", "seed", "median", "lower", "upper", "width"]);
    let mut row = id_cells(&ci.endpoint).to_vec();
    row.extend([
        ci.preset.clone(),
        ci.n_resamples.to_string(),
        ci.seed.to_string(),
        num(ci.median),
        num(ci.lower),
        num(ci.upper),
        num(ci.upper - ci.lower),
    ]);
    t.push(row);
    Ok(t)
}

pub fn registry_summary_table(registry: &Registry) -> Table {
    let mut t = Table::new(["category", "label", "endpoints", "providers"]);
    let mut total = 0;
    for c in registry.category_summary() {
        total += c.endpoints;
        t.push(vec![
            c.category.as_str().into(),
            c.category.label().into(),
            c.endpoints.to_string(),
            c.providers.join("; "),
        ]);
    }
    t.push(vec!["total".into(), "Total".into(), total.to_string(), String::new()]);
    t
}

pub fn tdp_table(registry: &Registry) -> Table {
    let mut t = Table::new(["hardware_class", "tdp_watts", "default_pue", "sharing_factor"]);
    for h in registry.hardware() {
        t.push(vec![h.name.clone(), num(h.tdp_watts), num(h.default_pue), num(h.sharing_factor)]);
    }
    t
}
