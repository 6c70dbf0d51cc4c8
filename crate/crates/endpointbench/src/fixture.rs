//! The reproducible v1.0 fixture: a 78-endpoint registry, its simulated
//! fleet and pipeline settings, and the snapshot they produce.
//!
//! Two quantities are calibrated rather than typed in. Each endpoint's
//! perturbation ε is bisected so that its measured fidelity lands on a
//! target score, and the H100 sharing factor is solved so that the
//! gpt-oss-120b joules-per-correct spread hits its target ratio.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use endpointbench_core::energy::Disclosure;
use endpointbench_core::fingerprint::{capture_fingerprint, mean_sym_kl, Fingerprint, ReferenceSet};
use endpointbench_core::probe::{ProbeConditions, ProbePlan};
use endpointbench_core::registry::{builtin_hardware_table, builtin_presets, builtin_regions};
use endpointbench_core::rng::hash_str;
use endpointbench_core::sim::{spawn_fleet, SimEndpointSpec, SimFamily, MAX_EPSILON};
use endpointbench_core::snapshot::Snapshot;
use endpointbench_core::{
    Decoding, Endpoint, EndpointId, HardwareClass, ModelFamily, Precision, Provider, ProviderCategory, Registry,
    RegistryParts, Timestamp,
};
use rayon::prelude::*;

use crate::canon::round;
use crate::error::{Error, Result};
use crate::fleet_io::FleetSpec;
use crate::pipeline::{simulate, snapshot_from_store, EvalPlan, PipelineConfig, RefsetPlan, VirtualClock};
use crate::registry_io::RegistryBundle;
use crate::snapshot_io;
use crate::store::Store;

pub const VERSION: &str = "v1.0";
pub const HEADLINE_MODEL: &str = "gpt-oss-120b";
/// 2025-10-01.
pub const START_DAY: i64 = 20_362;
pub const Z: f64 = 1.0;
pub const CALIBRATED_HARDWARE: &str = "NVIDIA H100 SXM5";

/// Values planted in the fixture that the headline-model analyses recover.
pub mod planted {
    pub const FASTEST_TPS: f64 = 2988.0;
    pub const SLOWEST_TPS: f64 = 248.0;
    pub const SPEED_RATIO: f64 = FASTEST_TPS / SLOWEST_TPS;
    /// Chat blends (3:1) of the most and least expensive endpoints.
    pub const PRICE_RATIO: f64 = 0.66 / 0.20;
    pub const MIN_FIDELITY: f64 = 91.8;
    pub const FIDELITY_GAP: f64 = 100.0 - MIN_FIDELITY;
    pub const J_PER_CORRECT_RATIO: f64 = 6.2;
    pub const BF16_MEAN_F: f64 = 99.7;
    pub const FP8_MEAN_F: f64 = 92.1;
    pub const BF16_COUNT: usize = 13;
    pub const FP8_COUNT: usize = 6;
}

/// Relative location of each part inside a fixture directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout {
            root: root.to_path_buf(),
        }
    }

    pub fn registry(&self) -> PathBuf {
        self.root.join("registry")
    }

    pub fn sim(&self) -> PathBuf {
        self.root.join("sim")
    }

    pub fn pipeline(&self) -> PathBuf {
        self.root.join("pipeline.toml")
    }

    pub fn snapshots(&self) -> PathBuf {
        self.root.join("snapshot")
    }

    pub fn snapshot(&self, version: &str) -> PathBuf {
        self.snapshots().join(version)
    }
}

/// The committed fixture inside this crate.
pub fn committed() -> Layout {
    Layout::new(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("v1"))
}

const PROVIDERS: [(&str, &str, ProviderCategory); 33] = {
    use ProviderCategory::*;
    [
        ("anthropic", "Anthropic", FrontierLab),
        ("openai", "OpenAI", FrontierLab),
        ("google", "Google", FrontierLab),
        ("xai", "xAI", FrontierLab),
        ("deepseek", "DeepSeek", FrontierLab),
        ("azure", "Microsoft Azure", Hyperscaler),
        ("bedrock", "Amazon Bedrock", Hyperscaler),
        ("vertex", "Google Vertex AI", Hyperscaler),
        ("cerebras", "Cerebras", CustomSilicon),
        ("groq", "Groq", CustomSilicon),
        ("sambanova", "SambaNova", CustomSilicon),
        ("together", "Together AI", ServerlessGpu),
        ("fireworks", "Fireworks AI", ServerlessGpu),
        ("deepinfra", "DeepInfra", ServerlessGpu),
        ("hyperbolic", "Hyperbolic", ServerlessGpu),
        ("nebius", "Nebius", ServerlessGpu),
        ("novita", "Novita AI", ServerlessGpu),
        ("parasail", "Parasail", ServerlessGpu),
        ("siliconflow", "SiliconFlow", ServerlessGpu),
        ("huggingface", "Hugging Face", ServerlessGpu),
        ("baseten", "Baseten", ServerlessGpu),
        ("databricks", "Databricks", ServerlessGpu),
        ("wandb", "Weights & Biases", ServerlessGpu),
        ("openrouter", "OpenRouter", Aggregator),
        ("vercel", "Vercel AI Gateway", Aggregator),
        ("coreweave", "CoreWeave", RawGpuCloud),
        ("phala", "Phala Network", Decentralized),
        ("ionet", "io.net", Decentralized),
        ("akash", "Akash Network", Decentralized),
        ("fal", "fal", MultimodalSpecialist),
        ("elevenlabs", "ElevenLabs", MultimodalSpecialist),
        ("bfl", "Black Forest Labs", MultimodalSpecialist),
        ("suno", "Suno", MultimodalSpecialist),
    ]
};

const MODELS: [(&str, &str, Option<&str>, bool); 12] = [
    ("gpt-oss-120b", "gpt-oss-120b", Some("openai"), true),
    ("llama-3.3-70b", "Llama 3.3 70B Instruct", None, true),
    ("claude", "Claude Sonnet", Some("anthropic"), false),
    ("gpt-5", "GPT-5", Some("openai"), false),
    ("gemini", "Gemini 2.5 Pro", Some("google"), false),
    ("grok", "Grok 4", Some("xai"), false),
    ("deepseek-v3.1", "DeepSeek V3.1", Some("deepseek"), true),
    ("qwen3-235b", "Qwen3 235B A22B", None, true),
    ("kimi-k2", "Kimi K2", None, true),
    ("flux-1", "FLUX.1", Some("bfl"), true),
    ("eleven-tts", "Eleven Multilingual v2", Some("elevenlabs"), false),
    ("suno-v4", "Suno v4", Some("suno"), false),
];

/// Per-family success rates and response shape.
fn families() -> Vec<SimFamily> {
    // (model, thinking, working, default, [gsm8k, humaneval-plus, ifbench, math-100, aime-2025])
    let rows: [(&str, u32, u32, f64, [f64; 5]); 12] = [
        ("gpt-oss-120b", 25, 0, 0.97, [0.95, 0.862, 0.828, 0.78, 0.51]),
        ("llama-3.3-70b", 0, 12, 0.95, [0.93, 0.80, 0.88, 0.58, 0.12]),
        ("claude", 0, 20, 0.97, [0.97, 0.92, 0.90, 0.86, 0.55]),
        ("gpt-5", 60, 10, 0.98, [0.97, 0.93, 0.89, 0.90, 0.80]),
        ("gemini", 40, 10, 0.98, [0.96, 0.90, 0.88, 0.88, 0.72]),
        ("grok", 30, 10, 0.96, [0.96, 0.88, 0.85, 0.86, 0.70]),
        ("deepseek-v3.1", 20, 10, 0.95, [0.95, 0.86, 0.84, 0.84, 0.55]),
        ("qwen3-235b", 30, 8, 0.95, [0.94, 0.85, 0.82, 0.82, 0.60]),
        ("kimi-k2", 0, 15, 0.95, [0.95, 0.87, 0.85, 0.80, 0.45]),
        ("flux-1", 0, 4, 0.90, [0.60, 0.30, 0.70, 0.25, 0.02]),
        ("eleven-tts", 0, 4, 0.90, [0.55, 0.20, 0.75, 0.20, 0.01]),
        ("suno-v4", 0, 4, 0.90, [0.50, 0.15, 0.70, 0.15, 0.01]),
    ];
    let suites = ["gsm8k", "humaneval-plus", "ifbench", "math-100", "aime-2025"];
    rows.iter()
        .map(|(model, thinking, working, default, acc)| SimFamily {
            model: model.to_string(),
            seed: hash_str(model),
            thinking_tokens: *thinking,
            working_tokens: *working,
            default_success: *default,
            suite_success: suites.iter().zip(acc).map(|(s, a)| (s.to_string(), *a)).collect(),
        })
        .collect()
}

struct Row {
    provider: &'static str,
    model: &'static str,
    sku: &'static str,
    precision: Precision,
    region: &'static str,
    hardware: &'static str,
    price: (f64, f64),
    ttft: f64,
    tps: f64,
    error_rate: f64,
    /// Target fidelity against the cohort reference; 100 means unperturbed.
    fidelity: f64,
    context_limit: u32,
}

const H100: &str = "NVIDIA H100 SXM5";
const H200: &str = "NVIDIA H200 SXM5";
const B200: &str = "NVIDIA B200";
const H800: &str = "NVIDIA H800";
const TPU: &str = "Google TPU v6";
const TRN: &str = "AWS Trainium2";
const WSE: &str = "Cerebras WSE-3";
const LPU: &str = "Groq LPU";
const RDU: &str = "SambaNova SN40L";

const FULL_CONTEXT: u32 = 131_072;
/// FP8 endpoints lose this much task-success probability on every suite.
const FP8_PENALTY: f64 = 0.048;

#[allow(clippy::too_many_arguments)]
const fn row(
    provider: &'static str,
    model: &'static str,
    sku: &'static str,
    precision: Precision,
    region: &'static str,
    hardware: &'static str,
    price: (f64, f64),
    ttft: f64,
    tps: f64,
    error_rate: f64,
    fidelity: f64,
    context_limit: u32,
) -> Row {
    Row {
        provider,
        model,
        sku,
        precision,
        region,
        hardware,
        price,
        ttft,
        tps,
        error_rate,
        fidelity,
        context_limit,
    }
}

fn rows() -> Vec<Row> {
    use Precision::{Bf16, Fp8};
    const OSS: &str = "gpt-oss-120b";
    const LLAMA: &str = "llama-3.3-70b";
    const DS: &str = "deepseek-v3.1";
    const QWEN: &str = "qwen3-235b";
    const KIMI: &str = "kimi-k2";
    const E: &str = "us-east";
    const W: &str = "us-west";
    const FULL: u32 = FULL_CONTEXT;
    vec![
        // gpt-oss-120b: 13 BF16 + 6 FP8.
        row("cerebras", OSS, "standard", Bf16, E, WSE, (0.35, 1.59), 0.18, 2988.0, 0.002, 100.0, FULL),
        row("groq", OSS, "standard", Bf16, E, LPU, (0.15, 0.75), 0.21, 520.0, 0.004, 99.85, FULL),
        row("sambanova", OSS, "standard", Bf16, W, RDU, (0.22, 0.59), 0.30, 650.0, 0.006, 99.75, 90_000),
        row("deepinfra", OSS, "standard", Bf16, E, H100, (0.12, 0.52), 0.45, 320.0, 0.010, 99.7, FULL),
        row("deepinfra", OSS, "turbo", Fp8, E, H100, (0.10, 0.50), 0.38, 580.0, 0.010, 92.0, 90_000),
        row("together", OSS, "reference", Bf16, E, H100, (0.15, 0.60), 0.34, 420.0, 0.005, 99.65, FULL),
        row("together", OSS, "turbo", Fp8, E, B200, (0.12, 0.48), 0.25, 760.0, 0.005, 92.3, FULL),
        row("nebius", OSS, "base", Bf16, "eu-nordic", H100, (0.15, 0.60), 0.52, 300.0, 0.008, 99.6, FULL),
        row("nebius", OSS, "fast", Fp8, "eu-nordic", H200, (0.15, 0.60), 0.31, 520.0, 0.008, 92.2, FULL),
        row("novita", OSS, "standard", Fp8, E, H100, (0.10, 0.50), 0.60, 360.0, 0.015, 91.9, 90_000),
        row("parasail", OSS, "standard", Fp8, W, H100, (0.11, 0.55), 0.48, 410.0, 0.010, 92.4, FULL),
        row("siliconflow", OSS, "standard", Fp8, "apac-singapore", H800, (0.12, 0.55), 0.85, 270.0, 0.020, 91.8, 90_000),
        row("fireworks", OSS, "standard", Bf16, E, H200, (0.15, 0.60), 0.28, 640.0, 0.004, 99.65, FULL),
        row("hyperbolic", OSS, "standard", Bf16, E, H100, (0.14, 0.56), 0.55, 290.0, 0.012, 99.55, FULL),
        row("baseten", OSS, "standard", Bf16, W, B200, (0.14, 0.58), 0.33, 480.0, 0.006, 99.7, FULL),
        row("databricks", OSS, "standard", Bf16, W, H100, (0.15, 0.60), 0.50, 350.0, 0.008, 99.6, FULL),
        row("wandb", OSS, "standard", Bf16, E, H100, (0.15, 0.60), 0.62, 248.0, 0.010, 99.7, FULL),
        row("azure", OSS, "standard", Bf16, E, H100, (0.15, 0.60), 0.40, 300.0, 0.003, 99.65, FULL),
        row("bedrock", OSS, "standard", Bf16, E, TRN, (0.15, 0.60), 0.44, 380.0, 0.003, 99.7, FULL),
        // Llama 3.3 70B: together's reference SKU anchors the cohort.
        row("cerebras", LLAMA, "standard", Bf16, E, WSE, (0.85, 1.20), 0.17, 2200.0, 0.002, 99.9, FULL),
        row("groq", LLAMA, "versatile", Bf16, E, LPU, (0.59, 0.79), 0.20, 390.0, 0.004, 99.85, FULL),
        row("sambanova", LLAMA, "standard", Bf16, W, RDU, (0.60, 1.20), 0.30, 420.0, 0.006, 99.8, 90_000),
        row("together", LLAMA, "reference", Bf16, E, H100, (0.88, 0.88), 0.35, 140.0, 0.004, 100.0, FULL),
        row("together", LLAMA, "turbo", Fp8, E, H100, (0.54, 0.54), 0.30, 230.0, 0.004, 96.5, FULL),
        row("deepinfra", LLAMA, "standard", Bf16, E, H100, (0.23, 0.40), 0.50, 110.0, 0.010, 99.7, FULL),
        row("deepinfra", LLAMA, "turbo", Fp8, E, H100, (0.13, 0.39), 0.42, 190.0, 0.010, 95.8, 64_000),
        row("fireworks", LLAMA, "standard", Bf16, E, H200, (0.90, 0.90), 0.30, 250.0, 0.004, 99.75, FULL),
        row("hyperbolic", LLAMA, "standard", Bf16, E, H100, (0.40, 0.40), 0.60, 95.0, 0.012, 99.6, FULL),
        row("nebius", LLAMA, "standard", Bf16, "eu-nordic", H100, (0.13, 0.40), 0.55, 100.0, 0.008, 99.65, FULL),
        row("novita", LLAMA, "standard", Bf16, E, H100, (0.13, 0.39), 0.65, 85.0, 0.015, 99.55, 64_000),
        row("parasail", LLAMA, "standard", Bf16, W, H100, (0.28, 0.78), 0.50, 120.0, 0.010, 99.7, FULL),
        row("huggingface", LLAMA, "standard", Bf16, "eu-france", H100, (0.70, 0.70), 0.70, 70.0, 0.020, 99.6, FULL),
        row("bedrock", LLAMA, "standard", Bf16, E, TRN, (0.72, 0.72), 0.45, 130.0, 0.003, 99.8, FULL),
        row("vertex", LLAMA, "standard", Bf16, W, TPU, (0.72, 0.72), 0.40, 160.0, 0.003, 99.8, FULL),
        row("azure", LLAMA, "standard", Bf16, E, H100, (0.71, 0.71), 0.45, 120.0, 0.003, 99.75, FULL),
        // Closed frontier models, first-party endpoints first.
        row("anthropic", "claude", "standard", Bf16, E, TRN, (3.0, 15.0), 0.90, 75.0, 0.005, 100.0, FULL),
        row("anthropic", "claude", "priority", Bf16, W, TRN, (3.75, 18.75), 0.70, 85.0, 0.003, 100.0, FULL),
        row("anthropic", "claude", "standard", Bf16, "eu-central", TRN, (3.0, 15.0), 1.00, 70.0, 0.005, 100.0, FULL),
        row("bedrock", "claude", "standard", Bf16, E, TRN, (3.0, 15.0), 0.95, 72.0, 0.004, 99.9, FULL),
        row("vertex", "claude", "standard", Bf16, W, TPU, (3.0, 15.0), 1.00, 68.0, 0.004, 99.85, FULL),
        row("vercel", "claude", "standard", Bf16, E, TRN, (3.0, 15.0), 1.10, 70.0, 0.006, 99.9, FULL),
        row("openai", "gpt-5", "standard", Bf16, E, H200, (1.25, 10.0), 0.90, 90.0, 0.005, 100.0, FULL),
        row("openai", "gpt-5", "priority", Bf16, E, H200, (2.5, 20.0), 0.60, 140.0, 0.003, 100.0, FULL),
        row("openai", "gpt-5", "flex", Bf16, E, H200, (0.625, 5.0), 2.00, 60.0, 0.010, 100.0, FULL),
        row("azure", "gpt-5", "standard", Bf16, E, H200, (1.25, 10.0), 1.00, 85.0, 0.004, 99.9, FULL),
        row("google", "gemini", "standard", Bf16, W, TPU, (1.25, 10.0), 0.80, 140.0, 0.004, 100.0, FULL),
        row("google", "gemini", "priority", Bf16, W, TPU, (2.5, 15.0), 0.55, 170.0, 0.003, 100.0, FULL),
        row("google", "gemini", "flex", Bf16, "eu-central", TPU, (0.625, 5.0), 1.60, 110.0, 0.008, 100.0, FULL),
        row("vertex", "gemini", "standard", Bf16, W, TPU, (1.25, 10.0), 0.85, 130.0, 0.004, 99.9, FULL),
        row("xai", "grok", "standard", Bf16, "us-texas", H100, (3.0, 15.0), 0.70, 70.0, 0.006, 100.0, FULL),
        row("xai", "grok", "fast", Bf16, "us-texas", H100, (0.20, 0.50), 0.30, 150.0, 0.006, 100.0, FULL),
        // DeepSeek V3.1.
        row("deepseek", DS, "standard", Bf16, "china-hangzhou", H800, (0.27, 1.10), 1.20, 35.0, 0.015, 100.0, FULL),
        row("deepseek", DS, "off-peak", Bf16, "china-hangzhou", H800, (0.135, 0.55), 1.50, 30.0, 0.020, 100.0, FULL),
        row("azure", DS, "standard", Bf16, E, H100, (1.35, 5.40), 0.90, 45.0, 0.004, 99.8, FULL),
        row("bedrock", DS, "standard", Bf16, E, TRN, (0.58, 1.68), 0.80, 50.0, 0.004, 99.85, FULL),
        row("together", DS, "standard", Fp8, E, H100, (1.25, 1.25), 0.60, 70.0, 0.006, 97.5, FULL),
        row("fireworks", DS, "standard", Fp8, E, H200, (0.90, 0.90), 0.45, 90.0, 0.005, 97.0, FULL),
        row("deepinfra", DS, "standard", Fp8, E, H100, (0.27, 1.00), 0.80, 40.0, 0.010, 96.8, FULL),
        row("hyperbolic", DS, "standard", Fp8, E, H100, (0.25, 0.25), 1.00, 35.0, 0.012, 96.0, 64_000),
        row("openrouter", DS, "standard", Bf16, E, H100, (0.27, 1.10), 1.30, 38.0, 0.010, 99.7, FULL),
        row("coreweave", DS, "standard", Bf16, E, H100, (0.50, 1.50), 0.70, 55.0, 0.005, 99.75, FULL),
        row("phala", DS, "standard", Fp8, E, H100, (0.30, 1.20), 2.00, 25.0, 0.030, 95.5, 64_000),
        // Qwen3 235B.
        row("together", QWEN, "standard", Bf16, E, H100, (0.20, 0.60), 0.40, 80.0, 0.005, 100.0, FULL),
        row("fireworks", QWEN, "standard", Bf16, E, H200, (0.22, 0.88), 0.35, 110.0, 0.005, 99.8, FULL),
        row("siliconflow", QWEN, "standard", Fp8, "apac-singapore", H800, (0.14, 0.56), 0.90, 45.0, 0.020, 94.2, FULL),
        row("novita", QWEN, "standard", Fp8, E, H100, (0.20, 0.80), 0.70, 60.0, 0.015, 94.8, 64_000),
        row("coreweave", QWEN, "standard", Bf16, E, H100, (0.25, 0.90), 0.50, 75.0, 0.005, 99.7, FULL),
        row("ionet", QWEN, "standard", Fp8, E, H100, (0.18, 0.54), 1.80, 30.0, 0.040, 93.5, 64_000),
        // Kimi K2.
        row("openrouter", KIMI, "standard", Bf16, E, H100, (0.60, 2.50), 0.90, 40.0, 0.010, 99.8, FULL),
        row("vercel", KIMI, "standard", Bf16, E, H100, (0.60, 2.50), 0.80, 42.0, 0.008, 99.75, FULL),
        row("coreweave", KIMI, "standard", Bf16, E, H100, (0.55, 2.20), 0.60, 55.0, 0.005, 100.0, FULL),
        row("coreweave", KIMI, "fp8", Fp8, E, H100, (0.45, 1.80), 0.50, 75.0, 0.005, 94.0, FULL),
        row("akash", KIMI, "standard", Fp8, "eu-central", H100, (0.40, 1.60), 2.20, 22.0, 0.040, 93.0, 64_000),
        // Multimodal specialists.
        row("bfl", "flux-1", "standard", Bf16, "eu-central", H100, (2.0, 8.0), 0.50, 60.0, 0.005, 100.0, FULL),
        row("fal", "flux-1", "dev", Bf16, E, H100, (2.0, 8.0), 0.40, 80.0, 0.006, 99.7, FULL),
        row("fal", "flux-1", "schnell", Fp8, E, H100, (1.0, 4.0), 0.25, 150.0, 0.006, 95.2, FULL),
        row("elevenlabs", "eleven-tts", "standard", Bf16, E, H100, (5.0, 20.0), 0.30, 90.0, 0.005, 100.0, FULL),
        row("suno", "suno-v4", "standard", Bf16, E, H100, (4.0, 16.0), 0.80, 50.0, 0.010, 100.0, FULL),
    ]
}

/// Sharing factors other than the calibrated H100 entry.
fn hardware() -> Vec<HardwareClass> {
    let mut table = builtin_hardware_table();
    for h in &mut table {
        h.sharing_factor = match h.name.as_str() {
            WSE => 36.0,
            H200 => 2.0,
            B200 => 3.0,
            H800 => 4.0,
            _ => 1.0,
        };
    }
    table
}

fn first_party(provider: &str, model: &str) -> bool {
    MODELS.iter().any(|(m, _, fp, open)| *m == model && !open && *fp == Some(provider))
        || matches!((provider, model), ("deepseek", "deepseek-v3.1") | ("bfl", "flux-1"))
}

fn spec_seed(id: &EndpointId) -> u64 {
    hash_str(&id.to_string())
}

fn log_sigma(provider: &str) -> (f64, f64) {
    match provider {
        "phala" | "ionet" | "akash" => (0.6, 0.15),
        "openrouter" | "vercel" => (0.45, 0.08),
        _ => (0.35, 0.05),
    }
}

pub fn pipeline_config() -> PipelineConfig {
    let suites = [
        ("aime-2025", 30),
        ("gsm8k", 100),
        ("humaneval-plus", 100),
        ("ifbench", 100),
        ("math-100", 100),
    ];
    PipelineConfig {
        version: VERSION.into(),
        start_day: START_DAY,
        seed: 7,
        z: Z,
        probe: ProbePlan {
            cadence_secs: 1800,
            conditions: vec![ProbeConditions::leaderboard_default()],
            rotation_seed: 11,
            prompts_per_day: 48,
            max_tokens: 32,
            deadline_secs: 120.0,
        },
        eval: EvalPlan {
            max_tokens: 8192,
            retries: 3,
            suites: suites.iter().map(|(s, n)| (s.to_string(), *n)).collect(),
            context_levels: vec![32_000, 64_000, 90_000, 130_000],
            context_tasks: 10,
        },
        fingerprint: RefsetPlan {
            prompts: 8,
            positions: 4,
            top_k: 8,
            seed: 3,
        },
    }
}

/// Uncalibrated design: every ε is zero and the H100 sharing factor is 1.
pub struct Design {
    pub bundle: RegistryBundle,
    pub fleet: FleetSpec,
    pub pipeline: PipelineConfig,
    pub fidelity_targets: BTreeMap<EndpointId, f64>,
}

pub fn design() -> Result<Design> {
    let rows = rows();
    let mut endpoints = Vec::with_capacity(rows.len());
    let mut specs = Vec::with_capacity(rows.len());
    let mut targets = BTreeMap::new();
    for r in &rows {
        let id = EndpointId::new(r.provider, r.model, r.sku, r.precision, Decoding::Standard, r.region);
        let quantized = r.precision == Precision::Fp8;
        endpoints.push(Endpoint {
            id: id.clone(),
            price_input: r.price.0,
            price_output: r.price.1,
            price_cached_input: None,
            batch_discount: 0.0,
            advertised_context: FULL_CONTEXT,
            hardware_class: r.hardware.into(),
            first_party: first_party(r.provider, r.model),
            disclosed_quantization: quantized,
        });
        let (sigma, cv) = log_sigma(r.provider);
        let mut s = SimEndpointSpec::new(id.clone(), r.ttft, r.tps, spec_seed(&id));
        s.ttft_log_sigma = sigma;
        s.jitter_cv = cv;
        s.error_rate = r.error_rate;
        s.accuracy_penalty = if quantized { FP8_PENALTY } else { 0.0 };
        s.context_limit = Some(r.context_limit);
        specs.push(s);
        targets.insert(id, r.fidelity);
    }

    let parts = RegistryParts {
        endpoints,
        providers: PROVIDERS
            .iter()
            .map(|(id, name, category)| Provider {
                id: id.to_string(),
                name: name.to_string(),
                category: *category,
            })
            .collect(),
        models: MODELS
            .iter()
            .map(|(id, name, fp, open)| ModelFamily {
                id: id.to_string(),
                name: name.to_string(),
                first_party_provider: fp.map(str::to_string),
                open_weights: *open,
            })
            .collect(),
        hardware: hardware(),
        regions: builtin_regions(),
        presets: builtin_presets(),
    };
    let registry = Registry::new(parts)?;
    let mut bundle = RegistryBundle::new(registry);
    // Two providers publish their facility PUE.
    for e in bundle.registry.endpoints() {
        let pue = match e.id.provider.as_str() {
            "google" | "vertex" => Some(1.09),
            "nebius" => Some(1.1),
            _ => None,
        };
        if pue.is_some() {
            bundle.disclosures.insert(
                e.id.clone(),
                Disclosure {
                    pue,
                    ..Disclosure::default()
                },
            );
        }
    }
    Ok(Design {
        bundle,
        fleet: FleetSpec {
            endpoints: specs,
            families: families(),
        },
        pipeline: pipeline_config(),
        fidelity_targets: targets,
    })
}

fn capture(spec: &SimEndpointSpec, family: &SimFamily, refset: &ReferenceSet) -> Result<Fingerprint> {
    let fleet = spawn_fleet(vec![spec.clone()], vec![family.clone()])?;
    Ok(capture_fingerprint(&fleet, &spec.endpoint_id, refset, Timestamp::start_of_day(START_DAY))?)
}

/// Smallest ε reaching the target mean symmetric KL against `anchor`.
fn bisect_epsilon(
    spec: &SimEndpointSpec,
    family: &SimFamily,
    refset: &ReferenceSet,
    anchor: &Fingerprint,
    target_kl: f64,
) -> Result<f64> {
    let kl_at = |eps: f64| -> Result<f64> {
        let mut s = spec.clone();
        s.perturbation_epsilon = eps;
        Ok(mean_sym_kl(&capture(&s, family, refset)?, anchor)?)
    };
    let (mut lo, mut hi) = (0.0, MAX_EPSILON);
    if kl_at(hi)? < target_kl {
        return Err(Error::Usage(format!("{}: fidelity target out of reach", spec.endpoint_id)));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if kl_at(mid)? < target_kl {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Sets every endpoint's ε so its fidelity against the model's anchor (an
/// unperturbed endpoint) equals its target.
pub fn calibrate_fidelity(design: &mut Design) -> Result<()> {
    let refset = design.pipeline.fingerprint.build();
    let families: BTreeMap<&str, &SimFamily> =
        design.fleet.families.iter().map(|f| (f.model.as_str(), f)).collect();
    let mut anchors: BTreeMap<String, Fingerprint> = BTreeMap::new();
    for s in &design.fleet.endpoints {
        let model = &s.endpoint_id.model;
        if design.fidelity_targets[&s.endpoint_id] >= 100.0 && !anchors.contains_key(model) {
            anchors.insert(model.clone(), capture(s, families[model.as_str()], &refset)?);
        }
    }
    let targets = &design.fidelity_targets;
    let eps: Vec<f64> = design
        .fleet
        .endpoints
        .par_iter()
        .map(|s| {
            let target = targets[&s.endpoint_id];
            if target >= 100.0 {
                return Ok(0.0);
            }
            let model = s.endpoint_id.model.as_str();
            let anchor = anchors
                .get(model)
                .ok_or_else(|| Error::Usage(format!("model {model} has no unperturbed anchor")))?;
            let target_kl = (1.0 - target / 100.0) * design.pipeline.z;
            bisect_epsilon(s, families[model], &refset, anchor, target_kl).map(round)
        })
        .collect::<Result<_>>()?;
    for (s, e) in design.fleet.endpoints.iter_mut().zip(eps) {
        s.perturbation_epsilon = e;
    }
    Ok(())
}

/// Solves the H100 sharing factor from a snapshot derived at sharing 1 so
/// that the headline model's max/min joules-per-correct equals the target.
/// Fails when the extremes would not sit on an H100 endpoint (max) and a
/// non-H100 endpoint (min).
pub fn solve_sharing(bundle: &RegistryBundle, snap: &Snapshot) -> Result<f64> {
    let reg = &bundle.registry;
    let current = reg.hardware_class(CALIBRATED_HARDWARE)?.sharing_factor;
    let mut h100 = Vec::new();
    let mut other = Vec::new();
    for e in reg.cohort(HEADLINE_MODEL)? {
        let j = snap
            .headline_for(&e.id)
            .ok_or_else(|| endpointbench_core::Error::MissingFactor {
                endpoint: e.id.to_string(),
                what: "headline metrics",
            })?
            .j_ca
            * current;
        if e.hardware_class == CALIBRATED_HARDWARE {
            h100.push(j);
        } else {
            other.push(j / current);
        }
    }
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    let min_other = fold(&other, f64::min, f64::INFINITY);
    let max_other = fold(&other, f64::max, 0.0);
    let max_h100 = fold(&h100, f64::max, 0.0);
    let min_h100 = fold(&h100, f64::min, f64::INFINITY);
    let s = round(max_h100 / (planted::J_PER_CORRECT_RATIO * min_other));
    if s < 1.0 || max_other > max_h100 / s || min_h100 / s < min_other {
        return Err(Error::Usage(format!(
            "sharing calibration infeasible: s={s}, other range [{min_other}, {max_other}], H100 range [{min_h100}, {max_h100}]"
        )));
    }
    Ok(s)
}

pub fn with_sharing(bundle: &RegistryBundle, s: f64) -> Result<RegistryBundle> {
    let mut parts = bundle.registry.to_parts();
    for h in &mut parts.hardware {
        if h.name == CALIBRATED_HARDWARE {
            h.sharing_factor = s;
        }
    }
    Ok(RegistryBundle {
        registry: Registry::new(parts)?,
        disclosures: bundle.disclosures.clone(),
    })
}

/// Runs the pipeline inputs in `layout` for `days` and returns the derived
/// snapshot. The store lives in memory unless `store_dir` is given.
pub fn run(layout: &Layout, days: u32, store_dir: Option<&Path>) -> Result<(RegistryBundle, Snapshot)> {
    let bundle = RegistryBundle::load(&layout.registry())?;
    let fleet = FleetSpec::load(&layout.sim())?;
    let cfg = PipelineConfig::load(&layout.pipeline())?;
    let sim = crate::pipeline::fleet_for(&bundle, &fleet)?;
    let store = match store_dir {
        Some(dir) => Store::open(dir, bundle.registry.clone())?,
        None => Store::in_memory(bundle.registry.clone()),
    };
    simulate(&bundle, &sim, &cfg, days, &VirtualClock, &store)?;
    let snap = snapshot_from_store(&bundle, &store, &cfg, days)?;
    Ok((bundle, snap))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub h100_sharing: f64,
    pub snapshot_dir: PathBuf,
}

/// Builds the whole fixture under `root`: calibrated registry and fleet,
/// pipeline settings, and the one-day snapshot.
pub fn build(root: &Path) -> Result<BuildReport> {
    let layout = Layout::new(root);
    let mut d = design()?;
    calibrate_fidelity(&mut d)?;
    d.fleet.save(&layout.sim())?;
    d.pipeline.save(&layout.pipeline())?;

    // Raw measurements do not depend on sharing factors, so one simulation
    // serves both derivations.
    let sim = crate::pipeline::fleet_for(&d.bundle, &FleetSpec::load(&layout.sim())?)?;
    let store = Store::in_memory(d.bundle.registry.clone());
    simulate(&d.bundle, &sim, &d.pipeline, 1, &VirtualClock, &store)?;
    let provisional = snapshot_from_store(&d.bundle, &store, &d.pipeline, 1)?;
    let s = solve_sharing(&d.bundle, &provisional)?;
    let bundle = with_sharing(&d.bundle, s)?;
    bundle.save(&layout.registry())?;

    let snap = snapshot_from_store(&bundle, &store, &d.pipeline, 1)?;
    let snapshot_dir = snapshot_io::export(&layout.snapshots(), &snap)?;
    Ok(BuildReport {
        h100_sharing: s,
        snapshot_dir,
    })
}
