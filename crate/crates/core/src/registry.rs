//! Endpoint identity model and the built-in catalogs.
//!
//! An endpoint is the `(provider, model, sku, precision, decoding, region)`
//! tuple at which one serving configuration is exposed. The [`Registry`] is
//! the validated, cross-referenced set of endpoints together with the
//! providers, model families, hardware classes, regions and workload presets
//! they point at. It is immutable once built.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "BF16")]
    Bf16,
    #[serde(rename = "FP8")]
    Fp8,
    #[serde(rename = "INT8")]
    Int8,
    #[serde(rename = "FP16")]
    Fp16,
    #[serde(rename = "OTHER")]
    Other,
}

impl Precision {
    pub const fn as_str(self) -> &'static str {
        match self {
            Precision::Bf16 => "BF16",
            Precision::Fp8 => "FP8",
            Precision::Int8 => "INT8",
            Precision::Fp16 => "FP16",
            Precision::Other => "OTHER",
        }
    }

    /// BF16 and FP16 serve the released weights without quantization.
    pub const fn is_full_precision(self) -> bool {
        matches!(self, Precision::Bf16 | Precision::Fp16)
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BF16" => Ok(Precision::Bf16),
            "FP8" => Ok(Precision::Fp8),
            "INT8" => Ok(Precision::Int8),
            "FP16" => Ok(Precision::Fp16),
            "OTHER" => Ok(Precision::Other),
            _ => Err(Error::invalid("precision", format!("`{s}` is not one of BF16, FP8, INT8, FP16, OTHER"))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Ord for Precision {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for Precision {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoding {
    Standard,
    Speculative,
    Other,
}

impl Decoding {
    pub const fn as_str(self) -> &'static str {
        match self {
            Decoding::Standard => "standard",
            Decoding::Speculative => "speculative",
            Decoding::Other => "other",
        }
    }
}

impl FromStr for Decoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(Decoding::Standard),
            "speculative" => Ok(Decoding::Speculative),
            "other" => Ok(Decoding::Other),
            _ => Err(Error::invalid("decoding", format!("`{s}` is not one of standard, speculative, other"))),
        }
    }
}

impl fmt::Display for Decoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Ord for Decoding {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for Decoding {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The six-field endpoint identity. Ordering is lexicographic over the
/// fields in declaration order, using the textual labels of the enums.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EndpointId {
    pub provider: String,
    pub model: String,
    pub sku: String,
    pub precision: Precision,
    pub decoding: Decoding,
    pub region: String,
}

impl EndpointId {
    pub fn new(
        provider: impl Into<String>,
        model: impl Into<String>,
        sku: impl Into<String>,
        precision: Precision,
        decoding: Decoding,
        region: impl Into<String>,
    ) -> Self {
        EndpointId {
            provider: provider.into(),
            model: model.into(),
            sku: sku.into(),
            precision,
            decoding,
            region: region.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("provider", &self.provider),
            ("model", &self.model),
            ("sku", &self.sku),
            ("region", &self.region),
        ] {
            if value.trim().is_empty() {
                return Err(Error::invalid(
                    format!("endpoint {self} {name}"),
                    "must be non-empty",
                ));
            }
            if value.contains('/') {
                return Err(Error::invalid(
                    format!("endpoint {self} {name}"),
                    "must not contain `/`",
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}/{}/{}",
            self.provider, self.model, self.sku, self.precision, self.decoding, self.region
        )
    }
}

impl FromStr for EndpointId {
    type Err = Error;

    /// Parses the `/`-joined path form produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 6 {
            return Err(Error::invalid(
                "endpoint id",
                format!("`{s}` must have 6 `/`-separated fields"),
            ));
        }
        let id = EndpointId {
            provider: parts[0].to_string(),
            model: parts[1].to_string(),
            sku: parts[2].to_string(),
            precision: parts[3].parse()?,
            decoding: parts[4].parse()?,
            region: parts[5].to_string(),
        };
        id.validate()?;
        Ok(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub id: EndpointId,
    /// USD per 1M input tokens.
    pub price_input: f64,
    /// USD per 1M output tokens.
    pub price_output: f64,
    /// USD per 1M cached input tokens; `None` means no cache discount.
    pub price_cached_input: Option<f64>,
    pub batch_discount: f64,
    pub advertised_context: u32,
    pub hardware_class: String,
    pub first_party: bool,
    pub disclosed_quantization: bool,
}

impl Endpoint {
    pub fn cached_input_price(&self) -> f64 {
        self.price_cached_input.unwrap_or(self.price_input)
    }

    fn validate(&self) -> Result<()> {
        self.id.validate()?;
        let who = format!("endpoint {}", self.id);
        for (name, v) in [
            ("price_input", self.price_input),
            ("price_output", self.price_output),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{who} {name}"), "must be a finite value >= 0"));
            }
        }
        if let Some(cached) = self.price_cached_input {
            if !(cached.is_finite() && cached >= 0.0) {
                return Err(Error::invalid(format!("{who} price_cached_input"), "must be >= 0"));
            }
            if cached > self.price_input {
                return Err(Error::invalid(
                    format!("{who} price_cached_input"),
                    "must not exceed price_input",
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.batch_discount) {
            return Err(Error::invalid(format!("{who} batch_discount"), "must lie in [0, 1]"));
        }
        if self.advertised_context == 0 {
            return Err(Error::invalid(format!("{who} advertised_context"), "must be > 0"));
        }
        Ok(())
    }
}

/// Provider categories of the v1.0 registry breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderCategory {
    FrontierLab,
    Hyperscaler,
    CustomSilicon,
    ServerlessGpu,
    Aggregator,
    RawGpuCloud,
    Decentralized,
    MultimodalSpecialist,
}

impl ProviderCategory {
    pub const ALL: [ProviderCategory; 8] = [
        ProviderCategory::FrontierLab,
        ProviderCategory::Hyperscaler,
        ProviderCategory::CustomSilicon,
        ProviderCategory::ServerlessGpu,
        ProviderCategory::Aggregator,
        ProviderCategory::RawGpuCloud,
        ProviderCategory::Decentralized,
        ProviderCategory::MultimodalSpecialist,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            ProviderCategory::FrontierLab => "frontier-lab",
            ProviderCategory::Hyperscaler => "hyperscaler",
            ProviderCategory::CustomSilicon => "custom-silicon",
            ProviderCategory::ServerlessGpu => "serverless-gpu",
            ProviderCategory::Aggregator => "aggregator",
            ProviderCategory::RawGpuCloud => "raw-gpu-cloud",
            ProviderCategory::Decentralized => "decentralized",
            ProviderCategory::MultimodalSpecialist => "multimodal-specialist",
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            ProviderCategory::FrontierLab => "Frontier first-party labs",
            ProviderCategory::Hyperscaler => "Hyperscalers",
            ProviderCategory::CustomSilicon => "Custom-silicon providers",
            ProviderCategory::ServerlessGpu => "Serverless GPU platforms",
            ProviderCategory::Aggregator => "Aggregators / routers",
            ProviderCategory::RawGpuCloud => "Raw GPU clouds",
            ProviderCategory::Decentralized => "Decentralized providers",
            ProviderCategory::MultimodalSpecialist => "Multimodal specialists",
        }
    }
}

impl FromStr for ProviderCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProviderCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid("provider category", format!("`{s}` is not one of the 8 categories")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provider {
    pub id: String,
    pub name: String,
    pub category: ProviderCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub id: String,
    pub name: String,
    pub first_party_provider: Option<String>,
    pub open_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareClass {
    pub name: String,
    /// Watts per chip (per wafer for wafer-scale parts).
    pub tdp_watts: f64,
    pub default_pue: f64,
    /// Concurrent streams amortizing one device.
    pub sharing_factor: f64,
}

impl HardwareClass {
    pub fn new(name: &str, tdp_watts: f64, default_pue: f64) -> Self {
        HardwareClass {
            name: name.to_string(),
            tdp_watts,
            default_pue,
            sharing_factor: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let who = format!("hardware class {}", self.name);
        if !(self.tdp_watts.is_finite() && self.tdp_watts > 0.0) {
            return Err(Error::invalid(format!("{who} tdp_watts"), "must be > 0"));
        }
        if !(self.default_pue.is_finite() && self.default_pue >= 1.0) {
            return Err(Error::invalid(format!("{who} default_pue"), "must be >= 1.0"));
        }
        if !(self.sharing_factor.is_finite() && self.sharing_factor >= 1.0) {
            return Err(Error::invalid(format!("{who} sharing_factor"), "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    /// gCO2eq per kWh.
    pub grid_intensity: f64,
    pub pue_override: Option<f64>,
}

impl Region {
    pub fn new(id: &str, grid_intensity: f64) -> Self {
        Region {
            id: id.to_string(),
            grid_intensity,
            pue_override: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.grid_intensity.is_finite() && self.grid_intensity >= 0.0) {
            return Err(Error::invalid(format!("region {} grid_intensity", self.id), "must be >= 0"));
        }
        if let Some(p) = self.pue_override {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::invalid(format!("region {} pue_override", self.id), "must be >= 1.0"));
            }
        }
        Ok(())
    }
}

/// The five composite factors, in weight-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Speed,
    Ttft,
    Price,
    Quality,
    Reliability,
}

impl Factor {
    pub const ALL: [Factor; 5] = [
        Factor::Speed,
        Factor::Ttft,
        Factor::Price,
        Factor::Quality,
        Factor::Reliability,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Factor::Speed => "speed",
            Factor::Ttft => "ttft",
            Factor::Price => "price",
            Factor::Quality => "quality",
            Factor::Reliability => "reliability",
        }
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Factor::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("factor", format!("`{s}` is not one of speed, ttft, price, quality, reliability")))
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Weights over (speed, ttft, price, quality, reliability).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorWeights(pub [f64; 5]);

impl FactorWeights {
    pub const fn new(s: f64, t: f64, p: f64, q: f64, r: f64) -> Self {
        FactorWeights([s, t, p, q, r])
    }

    pub fn get(&self, factor: Factor) -> f64 {
        self.0[factor.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn dot(&self, values: &[f64; 5]) -> f64 {
        self.0.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Checks each weight lies in [0, 1] and the vector sums to 1 within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (w, f) in self.0.iter().zip(Factor::ALL) {
            if !(w.is_finite() && (0.0..=1.0).contains(w)) {
                return Err(Error::invalid(format!("weight w_{f}"), format!("{w} is outside [0, 1]")));
            }
        }
        let sum = self.sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::invalid("weights", format!("sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadPreset {
    pub name: String,
    pub input_ratio: f64,
    pub output_ratio: f64,
    pub weights: FactorWeights,
}

impl WorkloadPreset {
    pub fn new(name: &str, input_ratio: f64, output_ratio: f64, weights: FactorWeights) -> Self {
        WorkloadPreset {
            name: name.to_string(),
            input_ratio,
            output_ratio,
            weights,
        }
    }

    /// Validates ratio positivity and the weight-sum invariant at `tol`.
    pub fn validate_with(&self, tol: f64) -> Result<()> {
        for (name, v) in [("input_ratio", self.input_ratio), ("output_ratio", self.output_ratio)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("preset {} {name}", self.name), "must be > 0"));
            }
        }
        self.weights
            .validate(tol)
            .map_err(|e| match e {
                Error::Invalid { field, rule } => {
                    Error::invalid(format!("preset {} {field}", self.name), rule)
                }
                other => other,
            })
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(WEIGHT_SUM_TOLERANCE)
    }

    /// Share of input tokens, `input / (input + output)`.
    pub fn input_share(&self) -> f64 {
        self.input_ratio / (self.input_ratio + self.output_ratio)
    }
}

/// The ten built-in workload presets.
pub fn builtin_presets() -> Vec<WorkloadPreset> {
    let rows: [(&str, f64, f64, [f64; 5]); 10] = [
        ("chat", 3.0, 1.0, [0.20, 0.30, 0.20, 0.20, 0.10]),
        ("voice-agent", 5.0, 1.0, [0.10, 0.50, 0.10, 0.15, 0.15]),
        ("coding-agent", 1.0, 3.0, [0.20, 0.10, 0.15, 0.40, 0.15]),
        ("generic-agent", 10.0, 1.0, [0.15, 0.20, 0.20, 0.30, 0.15]),
        ("rag", 20.0, 1.0, [0.10, 0.20, 0.30, 0.25, 0.15]),
        ("reasoning", 1.0, 5.0, [0.20, 0.05, 0.25, 0.45, 0.05]),
        ("batch", 5.0, 1.0, [0.05, 0.00, 0.65, 0.20, 0.10]),
        ("long-context", 50.0, 1.0, [0.05, 0.10, 0.40, 0.30, 0.15]),
        ("multimodal-vision", 5.0, 1.0, [0.15, 0.20, 0.20, 0.30, 0.15]),
        ("multimodal-voice", 1.0, 1.0, [0.10, 0.40, 0.20, 0.20, 0.10]),
    ];
    rows.iter()
        .map(|(name, i, o, w)| WorkloadPreset::new(name, *i, *o, FactorWeights(*w)))
        .collect()
}

/// The six presets compared in the workload re-ranking analysis.
pub const OVERLAP_PRESETS: [&str; 6] = ["chat", "voice-agent", "coding-agent", "rag", "reasoning", "batch"];

/// Vendor TDP and default PUE for the ten hardware classes. Sharing factors
/// default to 1.
pub fn builtin_hardware_table() -> Vec<HardwareClass> {
    [
        ("NVIDIA H100 SXM5", 700.0, 1.20),
        ("NVIDIA H200 SXM5", 700.0, 1.20),
        ("NVIDIA B200", 1000.0, 1.15),
        ("NVIDIA H800", 700.0, 1.30),
        ("Google TPU v5e", 230.0, 1.10),
        ("Google TPU v6", 350.0, 1.10),
        ("AWS Trainium2", 300.0, 1.20),
        ("Cerebras WSE-3", 23000.0, 1.20),
        ("Groq LPU", 215.0, 1.20),
        ("SambaNova SN40L", 750.0, 1.20),
    ]
    .iter()
    .map(|(n, tdp, pue)| HardwareClass::new(n, *tdp, *pue))
    .collect()
}

/// 30-day average grid intensities (gCO2eq/kWh) for the default regions.
pub fn builtin_regions() -> Vec<Region> {
    [
        ("us-east", 380.0),
        ("us-west", 250.0),
        ("us-texas", 400.0),
        ("eu-central", 320.0),
        ("eu-nordic", 50.0),
        ("eu-france", 80.0),
        ("apac-singapore", 480.0),
        ("apac-tokyo", 500.0),
        ("china-hangzhou", 580.0),
    ]
    .iter()
    .map(|(id, g)| Region::new(id, *g))
    .collect()
}

/// Unvalidated registry contents, as produced by a loader.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegistryParts {
    pub endpoints: Vec<Endpoint>,
    pub providers: Vec<Provider>,
    pub models: Vec<ModelFamily>,
    pub hardware: Vec<HardwareClass>,
    pub regions: Vec<Region>,
    pub presets: Vec<WorkloadPreset>,
}

/// A validated, fully cross-referenced registry.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    endpoints: Vec<Endpoint>,
    index: BTreeMap<EndpointId, usize>,
    providers: BTreeMap<String, Provider>,
    models: BTreeMap<String, ModelFamily>,
    hardware: BTreeMap<String, HardwareClass>,
    regions: BTreeMap<String, Region>,
    presets: Vec<WorkloadPreset>,
}

fn keyed<T>(
    items: Vec<T>,
    kind: &'static str,
    key: impl Fn(&T) -> &str,
    validate: impl Fn(&T) -> Result<()>,
) -> Result<BTreeMap<String, T>> {
    let mut map = BTreeMap::new();
    for item in items {
        validate(&item)?;
        let k = key(&item).to_string();
        if k.trim().is_empty() {
            return Err(Error::invalid(format!("{kind} id"), "must be non-empty"));
        }
        if map.contains_key(&k) {
            return Err(Error::Duplicate { kind, id: k });
        }
        map.insert(k, item);
    }
    Ok(map)
}

impl Registry {
    pub fn new(parts: RegistryParts) -> Result<Self> {
        let providers = keyed(parts.providers, "provider", |p| &p.id, |_| Ok(()))?;
        let hardware = keyed(parts.hardware, "hardware class", |h| &h.name, HardwareClass::validate)?;
        let regions = keyed(parts.regions, "region", |r| &r.id, Region::validate)?;
        let models = keyed(parts.models, "model", |m| &m.id, |_| Ok(()))?;
        for m in models.values() {
            match &m.first_party_provider {
                Some(p) if !providers.contains_key(p) => {
                    return Err(Error::Dangling {
                        from: format!("model {}", m.id),
                        kind: "provider",
                        id: p.clone(),
                    })
                }
                None if !m.open_weights => {
                    return Err(Error::invalid(
                        format!("model {} first_party_provider", m.id),
                        "closed-weights models must name a first-party provider",
                    ))
                }
                _ => {}
            }
        }

        let mut presets: Vec<WorkloadPreset> = Vec::with_capacity(parts.presets.len());
        for p in parts.presets {
            p.validate()?;
            if presets.iter().any(|q| q.name == p.name) {
                return Err(Error::Duplicate { kind: "preset", id: p.name });
            }
            presets.push(p);
        }

        let mut endpoints = parts.endpoints;
        for e in &endpoints {
            e.validate()?;
            let from = format!("endpoint {}", e.id);
            let checks: [(&'static str, &String, bool); 4] = [
                ("provider", &e.id.provider, providers.contains_key(&e.id.provider)),
                ("model", &e.id.model, models.contains_key(&e.id.model)),
                ("region", &e.id.region, regions.contains_key(&e.id.region)),
                ("hardware class", &e.hardware_class, hardware.contains_key(&e.hardware_class)),
            ];
            for (kind, id, ok) in checks {
                if !ok {
                    return Err(Error::Dangling {
                        from,
                        kind,
                        id: id.clone(),
                    });
                }
            }
        }
        endpoints.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = BTreeMap::new();
        for (i, e) in endpoints.iter().enumerate() {
            if index.insert(e.id.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "endpoint",
                    id: e.id.to_string(),
                });
            }
        }

        Ok(Registry {
            endpoints,
            index,
            providers,
            models,
            hardware,
            regions,
            presets,
        })
    }

    /// Back to loader-shaped parts, in canonical order.
    pub fn to_parts(&self) -> RegistryParts {
        RegistryParts {
            endpoints: self.endpoints.clone(),
            providers: self.providers.values().cloned().collect(),
            models: self.models.values().cloned().collect(),
            hardware: self.hardware.values().cloned().collect(),
            regions: self.regions.values().cloned().collect(),
            presets: self.presets.clone(),
        }
    }

    /// All endpoints in lexicographic id order.
    pub fn endpoints(&self) -> &[Endpoint] {
        &self.endpoints
    }

    pub fn endpoint(&self, id: &EndpointId) -> Result<&Endpoint> {
        self.index
            .get(id)
            .map(|&i| &self.endpoints[i])
            .ok_or_else(|| Error::unknown("endpoint", id.to_string()))
    }

    pub fn providers(&self) -> impl Iterator<Item = &Provider> {
        self.providers.values()
    }

    pub fn provider(&self, id: &str) -> Result<&Provider> {
        self.providers.get(id).ok_or_else(|| Error::unknown("provider", id))
    }

    pub fn models(&self) -> impl Iterator<Item = &ModelFamily> {
        self.models.values()
    }

    pub fn model(&self, id: &str) -> Result<&ModelFamily> {
        self.models.get(id).ok_or_else(|| Error::unknown("model", id))
    }

    pub fn hardware(&self) -> impl Iterator<Item = &HardwareClass> {
        self.hardware.values()
    }

    pub fn hardware_class(&self, name: &str) -> Result<&HardwareClass> {
        self.hardware.get(name).ok_or_else(|| Error::unknown("hardware class", name))
    }

    pub fn regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.values()
    }

    pub fn region(&self, id: &str) -> Result<&Region> {
        self.regions.get(id).ok_or_else(|| Error::unknown("region", id))
    }

    pub fn presets(&self) -> &[WorkloadPreset] {
        &self.presets
    }

    pub fn preset(&self, name: &str) -> Result<&WorkloadPreset> {
        self.presets
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::unknown("preset", name))
    }

    /// Endpoints serving `model`, in lexicographic id order.
    pub fn cohort(&self, model: &str) -> Result<Vec<&Endpoint>> {
        self.model(model)?;
        Ok(self.endpoints.iter().filter(|e| e.id.model == model).collect())
    }

    /// Endpoint counts and provider names per provider category.
    pub fn category_summary(&self) -> Vec<CategorySummary> {
        ProviderCategory::ALL
            .into_iter()
            .map(|category| {
                let mut providers = BTreeSet::new();
                let mut endpoints = 0;
                for e in &self.endpoints {
                    if let Some(p) = self.providers.get(&e.id.provider) {
                        if p.category == category {
                            endpoints += 1;
                            providers.insert(p.name.clone());
                        }
                    }
                }
                CategorySummary {
                    category,
                    endpoints,
                    providers: providers.into_iter().collect(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: ProviderCategory,
    pub endpoints: usize,
    pub providers: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn tiny_parts() -> RegistryParts {
        RegistryParts {
            endpoints: vec![
                endpoint("cerebras", "m1", "standard", Precision::Bf16, "Cerebras WSE-3"),
                endpoint("acme", "m1", "turbo", Precision::Fp8, "NVIDIA H100 SXM5"),
                endpoint("acme", "m2", "standard", Precision::Bf16, "NVIDIA H100 SXM5"),
            ],
            providers: vec![
                Provider { id: "cerebras".into(), name: "Cerebras".into(), category: ProviderCategory::CustomSilicon },
                Provider { id: "acme".into(), name: "Acme".into(), category: ProviderCategory::ServerlessGpu },
            ],
            models: vec![
                ModelFamily { id: "m1".into(), name: "M1".into(), first_party_provider: None, open_weights: true },
                ModelFamily { id: "m2".into(), name: "M2".into(), first_party_provider: Some("acme".into()), open_weights: false },
            ],
            hardware: builtin_hardware_table(),
            regions: builtin_regions(),
            presets: builtin_presets(),
        }
    }

    fn endpoint(provider: &str, model: &str, sku: &str, precision: Precision, hw: &str) -> Endpoint {
        Endpoint {
            id: EndpointId::new(provider, model, sku, precision, Decoding::Standard, "us-east"),
            price_input: 0.1,
            price_output: 0.5,
            price_cached_input: None,
            batch_discount: 0.0,
            advertised_context: 131_072,
            hardware_class: hw.into(),
            first_party: false,
            disclosed_quantization: false,
        }
    }

    #[test]
    fn chat_and_batch_presets() {
        let presets = builtin_presets();
        assert_eq!(presets.len(), 10);
        let chat = &presets[0];
        assert_eq!((chat.input_ratio, chat.output_ratio), (3.0, 1.0));
        assert_eq!(chat.weights.0, [0.20, 0.30, 0.20, 0.20, 0.10]);
        let batch = presets.iter().find(|p| p.name == "batch").unwrap();
        assert_eq!(batch.weights.get(Factor::Ttft), 0.0);
        assert_eq!(batch.weights.get(Factor::Price), 0.65);
        for p in &presets {
            assert!((p.weights.sum() - 1.0).abs() <= 1e-9, "{}", p.name);
            p.validate().unwrap();
        }
    }

    #[test]
    fn hardware_lookup() {
        let table = builtin_hardware_table();
        assert_eq!(table.len(), 10);
        let wse = table.iter().find(|h| h.name == "Cerebras WSE-3").unwrap();
        assert_eq!((wse.tdp_watts, wse.default_pue), (23000.0, 1.20));
        let groq = table.iter().find(|h| h.name == "Groq LPU").unwrap();
        assert_eq!(groq.tdp_watts, 215.0);
    }

    #[test]
    fn dangling_hardware_names_offender() {
        let mut parts = tiny_parts();
        parts.endpoints[0].hardware_class = "X900".into();
        let err = Registry::new(parts).unwrap_err();
        assert!(matches!(&err, Error::Dangling { id, .. } if id == "X900"), "{err}");
    }

    #[test]
    fn duplicate_tuple_is_an_error() {
        let mut parts = tiny_parts();
        let dup = parts.endpoints[0].clone();
        parts.endpoints.push(dup);
        assert!(matches!(Registry::new(parts), Err(Error::Duplicate { kind: "endpoint", .. })));
    }

    #[test]
    fn empty_endpoints_is_fine() {
        let mut parts = tiny_parts();
        parts.endpoints.clear();
        let reg = Registry::new(parts).unwrap();
        assert!(reg.endpoints().is_empty());
        assert!(reg.cohort("m1").unwrap().is_empty());
    }

    #[test]
    fn cohort_is_sorted_and_partitions() {
        let reg = Registry::new(tiny_parts()).unwrap();
        let m1 = reg.cohort("m1").unwrap();
        assert_eq!(m1.len(), 2);
        assert_eq!(m1[0].id.provider, "acme");
        assert_eq!(reg.cohort("m2").unwrap().len(), 1);
        let total: usize = reg.models().map(|m| reg.cohort(&m.id).unwrap().len()).sum();
        assert_eq!(total, reg.endpoints().len());
        assert!(matches!(reg.cohort("nope"), Err(Error::Unknown { kind: "model", .. })));
    }

    #[test]
    fn cached_price_rules() {
        let mut parts = tiny_parts();
        parts.endpoints[0].price_cached_input = Some(0.5);
        assert!(Registry::new(parts).is_err());
        let reg = Registry::new(tiny_parts()).unwrap();
        assert_eq!(reg.endpoints()[0].cached_input_price(), 0.1);
    }

    #[test]
    fn closed_model_needs_first_party() {
        let mut parts = tiny_parts();
        parts.models[1].first_party_provider = None;
        assert!(Registry::new(parts).is_err());
    }

    #[test]
    fn endpoint_id_round_trips_through_path_form() {
        let id = EndpointId::new("groq", "gpt-oss-120b", "standard", Precision::Fp8, Decoding::Speculative, "us-east");
        let s = id.to_string();
        assert_eq!(s, "groq/gpt-oss-120b/standard/FP8/speculative/us-east");
        assert_eq!(s.parse::<EndpointId>().unwrap(), id);
        assert!("a/b/c".parse::<EndpointId>().is_err());
        assert!("a/b//BF16/standard/r".parse::<EndpointId>().is_err());
    }

    #[test]
    fn bad_preset_weights_rejected() {
        let mut parts = tiny_parts();
        parts.presets[0].weights.0[0] = 0.3;
        assert!(Registry::new(parts).is_err());
    }
}
