//! Output-distribution fingerprints and the fidelity score.
//!
//! A fingerprint holds the top-k next-token distribution at the first `K`
//! positions of the response to every prompt of a reference set. Fidelity
//! compares two fingerprints position by position with a floored,
//! renormalized symmetric KL divergence and maps the mean onto 0..100.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{EndpointClient, StreamEvent, StreamRequest};
use crate::error::{Error, Result};
use crate::registry::{Endpoint, EndpointId, Precision, Registry};
use crate::rng::mix_all;
use crate::time::Timestamp;

/// Probability assigned to tokens missing from one side's truncated support.
pub const SUPPORT_FLOOR: f64 = 1e-6;
pub const FAITHFUL_MIN: f64 = 99.5;
pub const DRIFTED_MIN: f64 = 95.0;
const CAPTURE_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub prompts: Vec<String>,
    pub positions_per_prompt: u32,
    pub top_k: u32,
    pub seed: u64,
}

impl ReferenceSet {
    /// `n` short generated prompts.
    pub fn synthetic(n: u32, positions_per_prompt: u32, top_k: u32, seed: u64) -> Self {
        let prompts = (0..n)
            .map(|i| format!("REFERENCE {seed:016x} {i}: continue the passage"))
            .collect();
        ReferenceSet {
            prompts,
            positions_per_prompt,
            top_k,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompts.is_empty() {
            return Err(Error::Empty("reference prompts"));
        }
        if self.positions_per_prompt < 1 {
            return Err(Error::invalid("positions_per_prompt", "must be >= 1"));
        }
        if self.top_k < 2 {
            return Err(Error::invalid("top_k", "must be >= 2"));
        }
        Ok(())
    }

    /// Hex SHA-256 binding fingerprints to this exact set.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.prompts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        h.update(self.positions_per_prompt.to_le_bytes());
        h.update(self.top_k.to_le_bytes());
        h.update(self.seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}

/// Truncated distribution: `(token, probability)` pairs.
pub type Distribution = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub endpoint: EndpointId,
    pub refset_hash: String,
    pub positions_per_prompt: u32,
    /// Row-major over `(prompt, position)`.
    pub distributions: Vec<Distribution>,
    pub capture_time: Timestamp,
}

impl Fingerprint {
    pub fn validate(&self) -> Result<()> {
        let k = self.positions_per_prompt as usize;
        if k == 0 || self.distributions.is_empty() || self.distributions.len() % k != 0 {
            return Err(Error::invalid(
                format!("fingerprint {}", self.endpoint),
                "distribution count must be a positive multiple of positions_per_prompt",
            ));
        }
        for d in &self.distributions {
            let total: f64 = d.iter().map(|(_, p)| p).sum();
            if d.is_empty() || d.iter().any(|(_, p)| !(*p > 0.0 && *p <= 1.0)) || total > 1.0 + 1e-6 {
                return Err(Error::invalid(
                    format!("fingerprint {}", self.endpoint),
                    "probabilities must lie in (0, 1] and sum to at most 1",
                ));
            }
        }
        Ok(())
    }
}

/// Captures a fingerprint by requesting `K` tokens with top-k log-probs for
/// every reference prompt. Streams that fail are retried with a fresh
/// ordinal a few times before the capture is abandoned.
pub fn capture_fingerprint(
    client: &dyn EndpointClient,
    endpoint: &EndpointId,
    refset: &ReferenceSet,
    capture_time: Timestamp,
) -> Result<Fingerprint> {
    refset.validate()?;
    let k = refset.positions_per_prompt as usize;
    let mut distributions = Vec::with_capacity(refset.prompts.len() * k);
    for (i, prompt) in refset.prompts.iter().enumerate() {
        let mut captured = None;
        for attempt in 0..CAPTURE_ATTEMPTS {
            let req = StreamRequest::new(prompt.clone(), refset.positions_per_prompt)
                .with_logprobs(refset.top_k)
                .with_ordinal(mix_all(&[refset.seed, i as u64, attempt]));
            let stream = client.open_stream(endpoint, &req)?;
            let mut rows: Vec<Distribution> = Vec::with_capacity(k);
            let mut ended_ok = false;
            for event in stream {
                match event {
                    StreamEvent::Token(t) => {
                        if rows.len() < k {
                            if t.top_logprobs.is_empty() {
                                return Err(Error::Client(format!(
                                    "{endpoint} returned no log-probabilities; fingerprint undefined"
                                )));
                            }
                            rows.push(t.top_logprobs.iter().map(|&(tok, lp)| (tok, libm::exp(lp))).collect());
                        }
                    }
                    StreamEvent::End { reason, .. } => {
                        ended_ok = reason != crate::client::EndReason::Error;
                        break;
                    }
                }
            }
            if ended_ok && rows.len() == k {
                captured = Some(rows);
                break;
            }
        }
        let rows = captured.ok_or_else(|| {
            Error::Client(format!("{endpoint} failed to return {k} positions for reference prompt {i}"))
        })?;
        distributions.extend(rows);
    }
    Ok(Fingerprint {
        endpoint: endpoint.clone(),
        refset_hash: refset.hash(),
        positions_per_prompt: refset.positions_per_prompt,
        distributions,
        capture_time,
    })
}

/// Symmetric KL divergence `KL(p̃‖q̃) + KL(q̃‖p̃)` over the union of both
/// supports, where tokens absent from one side get [`SUPPORT_FLOOR`] and each
/// side is then renormalized.
pub fn sym_kl(p: &[(u32, f64)], q: &[(u32, f64)]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::Empty("distribution"));
    }
    let mut union: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for &(t, v) in p {
        union.entry(t).or_insert((0.0, 0.0)).0 += v;
    }
    for &(t, v) in q {
        union.entry(t).or_insert((0.0, 0.0)).1 += v;
    }
    let floored = |v: f64| if v > 0.0 { v } else { SUPPORT_FLOOR };
    let (sp, sq) = union
        .values()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + floored(x), b + floored(y)));
    let mut d = 0.0;
    for &(x, y) in union.values() {
        let a = floored(x) / sp;
        let b = floored(y) / sq;
        d += (a - b) * libm::log(a / b);
    }
    Ok(d.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityFlag {
    Faithful,
    Drifted,
    QuantizedOrModified,
}

impl FidelityFlag {
    pub fn from_score(f: f64) -> Self {
        if f >= FAITHFUL_MIN {
            FidelityFlag::Faithful
        } else if f >= DRIFTED_MIN {
            FidelityFlag::Drifted
        } else {
            FidelityFlag::QuantizedOrModified
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            FidelityFlag::Faithful => "faithful",
            FidelityFlag::Drifted => "drifted",
            FidelityFlag::QuantizedOrModified => "quantized_or_modified",
        }
    }
}

impl FromStr for FidelityFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(FidelityFlag::Faithful),
            "drifted" => Ok(FidelityFlag::Drifted),
            "quantized_or_modified" => Ok(FidelityFlag::QuantizedOrModified),
            _ => Err(Error::invalid("fidelity flag", format!("`{s}` is not a flag"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub endpoint: EndpointId,
    pub reference_endpoint: EndpointId,
    pub kl_sym: f64,
    pub f: f64,
    pub flag: FidelityFlag,
    pub second_tier: bool,
}

pub fn score_from_kl(kl: f64, z: f64) -> f64 {
    (100.0 * (1.0 - kl / z)).clamp(0.0, 100.0)
}

/// Mean per-position symmetric KL between two fingerprints of the same
/// reference set.
pub fn mean_sym_kl(fp: &Fingerprint, reference: &Fingerprint) -> Result<f64> {
    if fp.refset_hash != reference.refset_hash || fp.distributions.len() != reference.distributions.len() {
        return Err(Error::Mismatch(format!(
            "fingerprints of {} and {} come from different reference sets",
            fp.endpoint, reference.endpoint
        )));
    }
    if fp.distributions.is_empty() {
        return Err(Error::Empty("fingerprint distributions"));
    }
    let mut total = 0.0;
    for (p, q) in fp.distributions.iter().zip(&reference.distributions) {
        total += sym_kl(p, q)?;
    }
    Ok(total / fp.distributions.len() as f64)
}

/// Fidelity of `fp` against `reference`. `second_tier` records that the
/// reference endpoint is not the model's first-party API.
pub fn fidelity(fp: &Fingerprint, reference: &Fingerprint, z: f64, second_tier: bool) -> Result<FidelityResult> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid("z", "must be > 0"));
    }
    let kl_sym = if fp == reference { 0.0 } else { mean_sym_kl(fp, reference)? };
    let f = score_from_kl(kl_sym, z);
    Ok(FidelityResult {
        endpoint: fp.endpoint.clone(),
        reference_endpoint: reference.endpoint.clone(),
        kl_sym,
        f,
        flag: FidelityFlag::from_score(f),
        second_tier,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZCalibration {
    pub z: f64,
    /// Lowest hold-out score minus the faithful threshold.
    pub margin: f64,
}

/// Smallest `z >= floor` mapping every hold-out divergence to a faithful
/// score.
pub fn calibrate_z_from_kl(kls: &[f64], floor: f64) -> Result<ZCalibration> {
    if kls.is_empty() {
        return Err(Error::Empty("hold-out set"));
    }
    if !(floor > 0.0) || kls.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
        return Err(Error::invalid("calibration input", "floor must be > 0 and divergences >= 0"));
    }
    let worst = kls.iter().copied().fold(0.0, f64::max);
    let budget = 1.0 - FAITHFUL_MIN / 100.0;
    let mut z = (worst / budget).max(floor);
    while score_from_kl(worst, z) < FAITHFUL_MIN {
        z = z.next_up();
    }
    Ok(ZCalibration {
        z,
        margin: score_from_kl(worst, z) - FAITHFUL_MIN,
    })
}

pub fn calibrate_z(holdout: &[(&Fingerprint, &Fingerprint)], floor: f64) -> Result<ZCalibration> {
    let kls = holdout
        .iter()
        .map(|(fp, r)| mean_sym_kl(fp, r))
        .collect::<Result<Vec<_>>>()?;
    calibrate_z_from_kl(&kls, floor)
}

/// Picks the cohort's fidelity reference. A full-precision first-party
/// endpoint wins outright; otherwise the full-precision endpoint with the
/// highest mean fidelity against the rest of the cohort is used (lowest id
/// on ties) and the result is second-tier.
pub fn select_reference(cohort: &[(&Endpoint, &Fingerprint)], z: f64) -> Result<(EndpointId, bool)> {
    let full: Vec<&(&Endpoint, &Fingerprint)> =
        cohort.iter().filter(|(e, _)| e.id.precision.is_full_precision()).collect();
    if full.is_empty() {
        return Err(Error::Empty("full-precision endpoints in cohort"));
    }
    if let Some((e, _)) = full.iter().filter(|(e, _)| e.first_party).min_by(|a, b| a.0.id.cmp(&b.0.id)) {
        return Ok((e.id.clone(), false));
    }
    let mut best: Option<(f64, &EndpointId)> = None;
    for (cand, cfp) in &full {
        let mut total = 0.0;
        let mut n = 0;
        for (other, ofp) in cohort {
            if other.id == cand.id {
                continue;
            }
            total += score_from_kl(mean_sym_kl(ofp, cfp)?, z);
            n += 1;
        }
        let score = if n == 0 { 100.0 } else { total / n as f64 };
        let better = match best {
            None => true,
            Some((s, id)) => score > s || (score == s && &cand.id < id),
        };
        if better {
            best = Some((score, &cand.id));
        }
    }
    let (_, id) = best.ok_or(Error::Empty("reference candidates"))?;
    Ok((id.clone(), true))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkuGroup {
    pub precision: Precision,
    pub n: usize,
    pub mean_f: f64,
    /// Mean accuracy difference to the reference endpoint, in points, for
    /// each delta suite; `None` where accuracies are unavailable.
    pub deltas: Vec<(String, Option<f64>)>,
}

/// Groups fidelity results by precision class. `accuracy` maps endpoints to
/// per-suite accuracies in [0, 1].
pub fn fidelity_by_sku(
    results: &[FidelityResult],
    registry: &Registry,
    accuracy: &BTreeMap<EndpointId, BTreeMap<String, f64>>,
    delta_suites: &[&str],
) -> Result<Vec<SkuGroup>> {
    let mut groups: BTreeMap<Precision, Vec<&FidelityResult>> = BTreeMap::new();
    for r in results {
        let e = registry.endpoint(&r.endpoint)?;
        groups.entry(e.id.precision).or_default().push(r);
    }
    let lookup = |id: &EndpointId, suite: &str| accuracy.get(id).and_then(|m| m.get(suite)).copied();
    let mut out: Vec<SkuGroup> = groups
        .into_iter()
        .map(|(precision, rs)| {
            let mean_f = rs.iter().map(|r| r.f).sum::<f64>() / rs.len() as f64;
            let deltas = delta_suites
                .iter()
                .map(|suite| {
                    let ds: Option<Vec<f64>> = rs
                        .iter()
                        .map(|r| Some(100.0 * (lookup(&r.endpoint, suite)? - lookup(&r.reference_endpoint, suite)?)))
                        .collect();
                    (String::from(*suite), ds.map(|d| d.iter().sum::<f64>() / d.len() as f64))
                })
                .collect();
            SkuGroup {
                precision,
                n: rs.len(),
                mean_f,
                deltas,
            }
        })
        .collect();
    out.sort_by(|a, b| b.mean_f.total_cmp(&a.mean_f).then(a.precision.cmp(&b.precision)));
    Ok(out)
}
