//! Simulated-fleet files: per-endpoint behaviour and per-model families.

use std::collections::BTreeMap;
use std::path::Path;

use endpointbench_core::sim::{SimEndpointSpec, SimFamily};

use crate::canon::{id_cells, num, opt, CsvFile, Table};
use crate::error::Result;

pub const FLEET: &str = "fleet.csv";
pub const FAMILIES: &str = "families.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub endpoints: Vec<SimEndpointSpec>,
    pub families: Vec<SimFamily>,
}

impl FleetSpec {
    pub fn tables(&self) -> [(&'static str, Table); 2] {
        let mut fleet = Table::with_id(
            "",
            [
                "ttft_median",
                "ttft_log_sigma",
                "tokens_per_sec",
                "jitter_cv",
                "error_rate",
                "perturbation_epsilon",
                "accuracy_penalty",
                "seed",
                "context_limit",
            ],
        );
        for s in &self.endpoints {
            let mut row = id_cells(&s.endpoint_id).to_vec();
            row.extend([
                num(s.ttft_median),
                num(s.ttft_log_sigma),
                num(s.tokens_per_sec),
                num(s.jitter_cv),
                num(s.error_rate),
                num(s.perturbation_epsilon),
                num(s.accuracy_penalty),
                s.seed.to_string(),
                opt(s.context_limit),
            ]);
            fleet.push(row);
        }

        let mut families = Table::new([
            "model",
            "seed",
            "thinking_tokens",
            "working_tokens",
            "default_success",
            "suite_success",
        ]);
        for f in &self.families {
            let suites: Vec<String> = f.suite_success.iter().map(|(s, p)| format!("{s}={}", num(*p))).collect();
            families.push(vec![
                f.model.clone(),
                f.seed.to_string(),
                f.thinking_tokens.to_string(),
                f.working_tokens.to_string(),
                num(f.default_success),
                suites.join(";"),
            ]);
        }
        [(FLEET, fleet), (FAMILIES, families)]
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        for (name, t) in self.tables() {
            t.write(&dir.join(name))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let f = CsvFile::read(&dir.join(FLEET))?;
        let mut endpoints = Vec::with_capacity(f.len());
        for r in f.rows() {
            let spec = SimEndpointSpec {
                endpoint_id: r.endpoint_id("")?,
                ttft_median: r.f64("ttft_median")?,
                ttft_log_sigma: r.f64("ttft_log_sigma")?,
                tokens_per_sec: r.f64("tokens_per_sec")?,
                jitter_cv: r.f64("jitter_cv")?,
                error_rate: r.f64("error_rate")?,
                perturbation_epsilon: r.f64("perturbation_epsilon")?,
                accuracy_penalty: r.f64("accuracy_penalty")?,
                seed: r.parse("seed")?,
                context_limit: r.opt_parse("context_limit")?,
            };
            spec.validate().map_err(|e| r.error("provider", e.to_string()))?;
            endpoints.push(spec);
        }

        let f = CsvFile::read(&dir.join(FAMILIES))?;
        let mut families = Vec::with_capacity(f.len());
        for r in f.rows() {
            let mut suite_success = BTreeMap::new();
            let cell = r.str("suite_success")?;
            for pair in cell.split(';').filter(|p| !p.is_empty()) {
                let (suite, p) = pair
                    .split_once('=')
                    .ok_or_else(|| r.error("suite_success", format!("`{pair}` is not suite=probability")))?;
                let p = crate::canon::parse_f64(p)
                    .ok_or_else(|| r.error("suite_success", format!("`{p}` is not a number")))?;
                suite_success.insert(suite.to_string(), p);
            }
            let fam = SimFamily {
                model: r.str("model")?.into(),
                seed: r.parse("seed")?,
                thinking_tokens: r.parse("thinking_tokens")?,
                working_tokens: r.parse("working_tokens")?,
                default_success: r.f64("default_success")?,
                suite_success,
            };
            fam.validate().map_err(|e| r.error("model", e.to_string()))?;
            families.push(fam);
        }
        Ok(FleetSpec { endpoints, families })
    }
}
