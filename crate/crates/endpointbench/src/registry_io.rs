//! Registry directory format: one CSV per entity kind, plus optional
//! per-endpoint energy disclosures.

use std::collections::BTreeMap;
use std::path::Path;

use endpointbench_core::energy::Disclosure;
use endpointbench_core::{
    Endpoint, EndpointId, FactorWeights, HardwareClass, ModelFamily, Provider, Region, Registry, RegistryParts,
    WorkloadPreset,
};
use sha2::{Digest, Sha256};

use crate::canon::{id_cells, num, opt_num, CsvFile, Table};
use crate::error::Result;

pub const ENDPOINTS: &str = "endpoints.csv";
pub const PROVIDERS: &str = "providers.csv";
pub const MODELS: &str = "models.csv";
pub const HARDWARE: &str = "hardware.csv";
pub const REGIONS: &str = "regions.csv";
pub const PRESETS: &str = "presets.csv";
pub const DISCLOSURES: &str = "disclosures.csv";

/// A registry together with the energy disclosures that travel with it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistryBundle {
    pub registry: Registry,
    pub disclosures: BTreeMap<EndpointId, Disclosure>,
}

impl RegistryBundle {
    pub fn new(registry: Registry) -> Self {
        RegistryBundle {
            registry,
            disclosures: BTreeMap::new(),
        }
    }

    pub fn tables(&self) -> Vec<(&'static str, Table)> {
        let parts = self.registry.to_parts();

        let mut endpoints = Table::with_id(
            "",
            [
                "price_input",
                "price_output",
                "price_cached_input",
                "batch_discount",
                "advertised_context",
                "hardware_class",
                "first_party",
                "disclosed_quantization",
            ],
        );
        for e in &parts.endpoints {
            let mut row = id_cells(&e.id).to_vec();
            row.extend([
                num(e.price_input),
                num(e.price_output),
                opt_num(e.price_cached_input),
                num(e.batch_discount),
                e.advertised_context.to_string(),
                e.hardware_class.clone(),
                e.first_party.to_string(),
                e.disclosed_quantization.to_string(),
            ]);
            endpoints.push(row);
        }

        let mut providers = Table::new(["id", "name", "category"]);
        for p in &parts.providers {
            providers.push(vec![p.id.clone(), p.name.clone(), p.category.as_str().into()]);
        }

        let mut models = Table::new(["id", "name", "first_party_provider", "open_weights"]);
        for m in &parts.models {
            models.push(vec![
                m.id.clone(),
                m.name.clone(),
                m.first_party_provider.clone().unwrap_or_default(),
                m.open_weights.to_string(),
            ]);
        }

        let mut hardware = Table::new(["name", "tdp_watts", "default_pue", "sharing_factor"]);
        for h in &parts.hardware {
            hardware.push(vec![h.name.clone(), num(h.tdp_watts), num(h.default_pue), num(h.sharing_factor)]);
        }

        let mut regions = Table::new(["id", "grid_intensity", "pue_override"]);
        for r in &parts.regions {
            regions.push(vec![r.id.clone(), num(r.grid_intensity), opt_num(r.pue_override)]);
        }

        let mut presets = Table::new([
            "name",
            "input_ratio",
            "output_ratio",
            "w_speed",
            "w_ttft",
            "w_price",
            "w_quality",
            "w_reliability",
        ]);
        for p in &parts.presets {
            let mut row = vec![p.name.clone(), num(p.input_ratio), num(p.output_ratio)];
            row.extend(p.weights.0.iter().map(|w| num(*w)));
            presets.push(row);
        }

        let mut disclosures = Table::with_id("", ["utilization", "pue", "sparsity"]);
        for (id, d) in &self.disclosures {
            let mut row = id_cells(id).to_vec();
            row.extend([opt_num(d.utilization), opt_num(d.pue), opt_num(d.sparsity)]);
            disclosures.push(row);
        }

        vec![
            (ENDPOINTS, endpoints),
            (PROVIDERS, providers),
            (MODELS, models),
            (HARDWARE, hardware),
            (REGIONS, regions),
            (PRESETS, presets),
            (DISCLOSURES, disclosures),
        ]
    }

    /// Hex SHA-256 over the canonical form of every registry table.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, table) in self.tables() {
            let bytes = table.to_bytes();
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        for (name, table) in self.tables() {
            table.write(&dir.join(name))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut parts = RegistryParts::default();

        let f = CsvFile::read(&dir.join(PROVIDERS))?;
        for r in f.rows() {
            parts.providers.push(Provider {
                id: r.str("id")?.into(),
                name: r.str("name")?.into(),
                category: r.parse("category")?,
            });
        }

        let f = CsvFile::read(&dir.join(MODELS))?;
        for r in f.rows() {
            parts.models.push(ModelFamily {
                id: r.str("id")?.into(),
                name: r.str("name")?.into(),
                first_party_provider: r.opt_str("first_party_provider")?,
                open_weights: r.bool("open_weights")?,
            });
        }

        let f = CsvFile::read(&dir.join(HARDWARE))?;
        for r in f.rows() {
            parts.hardware.push(HardwareClass {
                name: r.str("name")?.into(),
                tdp_watts: r.f64("tdp_watts")?,
                default_pue: r.f64("default_pue")?,
                sharing_factor: r.f64("sharing_factor")?,
            });
        }

        let f = CsvFile::read(&dir.join(REGIONS))?;
        for r in f.rows() {
            parts.regions.push(Region {
                id: r.str("id")?.into(),
                grid_intensity: r.f64("grid_intensity")?,
                pue_override: r.opt_f64("pue_override")?,
            });
        }

        let f = CsvFile::read(&dir.join(PRESETS))?;
        for r in f.rows() {
            let w = ["w_speed", "w_ttft", "w_price", "w_quality", "w_reliability"]
                .map(|c| r.f64(c))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            parts.presets.push(WorkloadPreset::new(
                r.str("name")?,
                r.f64("input_ratio")?,
                r.f64("output_ratio")?,
                FactorWeights::new(w[0], w[1], w[2], w[3], w[4]),
            ));
        }

        let f = CsvFile::read(&dir.join(ENDPOINTS))?;
        for r in f.rows() {
            parts.endpoints.push(Endpoint {
                id: r.endpoint_id("")?,
                price_input: r.f64("price_input")?,
                price_output: r.f64("price_output")?,
                price_cached_input: r.opt_f64("price_cached_input")?,
                batch_discount: r.f64("batch_discount")?,
                advertised_context: r.parse("advertised_context")?,
                hardware_class: r.str("hardware_class")?.into(),
                first_party: r.bool("first_party")?,
                disclosed_quantization: r.bool("disclosed_quantization")?,
            });
        }

        let registry = Registry::new(parts)?;

        let mut disclosures = BTreeMap::new();
        let path = dir.join(DISCLOSURES);
        if path.exists() {
            let f = CsvFile::read(&path)?;
            for r in f.rows() {
                let id = r.endpoint_id("")?;
                registry.endpoint(&id).map_err(|e| r.error("provider", e.to_string()))?;
                let d = Disclosure {
                    utilization: r.opt_f64("utilization")?,
                    pue: r.opt_f64("pue")?,
                    sparsity: r.opt_f64("sparsity")?,
                };
                disclosures.insert(id, d);
            }
        }
        Ok(RegistryBundle { registry, disclosures })
    }
}

/// Short form used in printed summaries.
pub fn short_hash(hash: &str) -> String {
    hash.chars().take(12).collect()
}
