//! Deterministic simulated endpoint fleet.
//!
//! Each simulated endpoint belongs to a model family. The family fixes the
//! reference output distribution at every `(prompt, position)`, the decoded
//! continuation, the length of the thinking phase and the base task-success
//! probabilities. The endpoint adds its own latency profile, error rate,
//! output-distribution perturbation and accuracy penalty.
//!
//! Every stream is a pure function of `(spec.seed, prompt, ordinal)`; the
//! output distributions and task outcomes do not depend on the ordinal, so
//! repeated captures agree exactly.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::client::{approx_tokens, EndReason, EndpointClient, EventStream, Phase, StreamEvent, StreamRequest, TokenChunk};
use crate::error::{Error, Result};
use crate::registry::EndpointId;
use crate::rng::{hash_str, mix_all, prompt_key, rng_from};

/// Size of the simulated vocabulary.
pub const VOCAB: usize = 256;
/// Upper bound on [`SimEndpointSpec::perturbation_epsilon`].
pub const MAX_EPSILON: f64 = 4.0;
/// Token id of the `ANSWER:` marker.
pub const ANSWER_MARKER_TOKEN: u32 = 1000;
/// Token id carrying the answer value.
pub const ANSWER_VALUE_TOKEN: u32 = 1001;

const WEYL: f64 = 0.618_033_988_749_894_9;
const MIN_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFamily {
    pub model: String,
    pub seed: u64,
    /// Length of the marked thinking phase that precedes every answer.
    pub thinking_tokens: u32,
    /// Visible tokens emitted before the `ANSWER:` marker on task prompts.
    pub working_tokens: u32,
    pub default_success: f64,
    /// Base task-success probability per suite; suites not listed use
    /// `default_success`.
    pub suite_success: BTreeMap<String, f64>,
}

impl SimFamily {
    /// Family used for models without an explicit entry.
    pub fn derived(model: &str) -> Self {
        SimFamily {
            model: model.to_string(),
            seed: hash_str(model),
            thinking_tokens: 0,
            working_tokens: 8,
            default_success: 0.8,
            suite_success: BTreeMap::new(),
        }
    }

    pub fn success(&self, suite: &str) -> f64 {
        self.suite_success.get(suite).copied().unwrap_or(self.default_success)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: String, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(name, "must lie in [0, 1]"))
            }
        };
        check(format!("family {} default_success", self.model), self.default_success)?;
        for (suite, p) in &self.suite_success {
            check(format!("family {} success[{suite}]", self.model), *p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEndpointSpec {
    pub endpoint_id: EndpointId,
    /// Seconds.
    pub ttft_median: f64,
    pub ttft_log_sigma: f64,
    pub tokens_per_sec: f64,
    pub jitter_cv: f64,
    pub error_rate: f64,
    /// Scale of the seeded Gaussian noise added to the log-probabilities of
    /// the top-`k` head. The head keeps its token set, so `k`-truncated
    /// fingerprints see a pure exponential tilt of the reference.
    pub perturbation_epsilon: f64,
    pub accuracy_penalty: f64,
    pub seed: u64,
    /// Prompts longer than this many tokens are never answered correctly.
    pub context_limit: Option<u32>,
}

impl SimEndpointSpec {
    /// A well-behaved endpoint with the given median TTFT and decode rate.
    pub fn new(endpoint_id: EndpointId, ttft_median: f64, tokens_per_sec: f64, seed: u64) -> Self {
        SimEndpointSpec {
            endpoint_id,
            ttft_median,
            ttft_log_sigma: 0.0,
            tokens_per_sec,
            jitter_cv: 0.0,
            error_rate: 0.0,
            perturbation_epsilon: 0.0,
            accuracy_penalty: 0.0,
            seed,
            context_limit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.endpoint_id.validate()?;
        let who = format!("sim endpoint {}", self.endpoint_id);
        let rule = |ok: bool, field: &str, rule: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("{who} {field}"), rule))
            }
        };
        rule(self.ttft_median.is_finite() && self.ttft_median > 0.0, "ttft_median", "must be > 0")?;
        rule(self.ttft_log_sigma.is_finite() && self.ttft_log_sigma >= 0.0, "ttft_log_sigma", "must be >= 0")?;
        rule(self.tokens_per_sec.is_finite() && self.tokens_per_sec > 0.0, "tokens_per_sec", "must be > 0")?;
        rule(self.jitter_cv.is_finite() && self.jitter_cv >= 0.0, "jitter_cv", "must be >= 0")?;
        rule((0.0..=1.0).contains(&self.error_rate), "error_rate", "must lie in [0, 1]")?;
        rule(
            self.perturbation_epsilon.is_finite() && (0.0..=MAX_EPSILON).contains(&self.perturbation_epsilon),
            "perturbation_epsilon",
            "must lie in [0, 4]",
        )?;
        rule((0.0..1.0).contains(&self.accuracy_penalty), "accuracy_penalty", "must lie in [0, 1)")?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Member {
    spec: SimEndpointSpec,
    family: String,
}

#[derive(Debug, Clone)]
pub struct SimFleet {
    members: BTreeMap<EndpointId, Member>,
    families: BTreeMap<String, SimFamily>,
    zipf: Vec<f64>,
}

/// Builds a fleet. Models without a family entry get [`SimFamily::derived`].
pub fn spawn_fleet(specs: Vec<SimEndpointSpec>, families: Vec<SimFamily>) -> Result<SimFleet> {
    let mut fam = BTreeMap::new();
    for f in families {
        f.validate()?;
        if fam.contains_key(&f.model) {
            return Err(Error::Duplicate { kind: "sim family", id: f.model });
        }
        fam.insert(f.model.clone(), f);
    }
    let mut members = BTreeMap::new();
    for spec in specs {
        spec.validate()?;
        let model = spec.endpoint_id.model.clone();
        fam.entry(model.clone()).or_insert_with(|| SimFamily::derived(&model));
        if members.contains_key(&spec.endpoint_id) {
            return Err(Error::Duplicate {
                kind: "sim endpoint",
                id: spec.endpoint_id.to_string(),
            });
        }
        members.insert(spec.endpoint_id.clone(), Member { spec, family: model });
    }
    let norm: f64 = (1..=VOCAB).map(|r| 1.0 / r as f64).sum();
    let zipf = (1..=VOCAB).map(|r| 1.0 / (r as f64 * norm)).collect();
    Ok(SimFleet {
        members,
        families: fam,
        zipf,
    })
}

impl SimFleet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn specs(&self) -> impl Iterator<Item = &SimEndpointSpec> {
        self.members.values().map(|m| &m.spec)
    }

    pub fn spec(&self, id: &EndpointId) -> Result<&SimEndpointSpec> {
        self.member(id).map(|m| &m.spec)
    }

    pub fn families(&self) -> impl Iterator<Item = &SimFamily> {
        self.families.values()
    }

    pub fn family(&self, model: &str) -> Result<&SimFamily> {
        self.families.get(model).ok_or_else(|| Error::unknown("sim family", model))
    }

    fn member(&self, id: &EndpointId) -> Result<&Member> {
        self.members.get(id).ok_or_else(|| Error::unknown("endpoint", id.to_string()))
    }

    /// Full reference distribution of `model`'s family at `position` of the
    /// response to `prompt`.
    pub fn reference_distribution(&self, model: &str, prompt: &str, position: u32) -> Result<Vec<f64>> {
        let family = self.family(model)?;
        Ok(self.reference_at(family, prompt_key(prompt), position))
    }

    /// Full output distribution of an endpoint whose perturbation acts on the
    /// `head` most likely reference tokens.
    pub fn endpoint_distribution(&self, id: &EndpointId, prompt: &str, position: u32, head: usize) -> Result<Vec<f64>> {
        let m = self.member(id)?;
        let family = &self.families[&m.family];
        Ok(self.mixed_at(&m.spec, family, prompt_key(prompt), position, head))
    }

    fn reference_at(&self, family: &SimFamily, key: u64, position: u32) -> Vec<f64> {
        let top = continuation_token(family.seed, key, position) as usize;
        let mut order: Vec<usize> = (0..VOCAB).collect();
        let mut rng = rng_from(mix_all(&[family.seed, key, u64::from(position), 2]));
        for i in (1..VOCAB).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let at = order.iter().position(|&t| t == top).unwrap_or(0);
        order.swap(0, at);
        let mut p = alloc::vec![0.0; VOCAB];
        for (rank, &token) in order.iter().enumerate() {
            p[token] = self.zipf[rank];
        }
        p
    }

    fn mixed_at(&self, spec: &SimEndpointSpec, family: &SimFamily, key: u64, position: u32, head: usize) -> Vec<f64> {
        let mut p = self.reference_at(family, key, position);
        let eps = spec.perturbation_epsilon;
        let head = head.min(VOCAB);
        if eps == 0.0 || head == 0 {
            return p;
        }
        let mut order: Vec<usize> = (0..VOCAB).collect();
        order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
        let mut rng = rng_from(mix_all(&[spec.seed, key, u64::from(position), 3]));
        let head_mass: f64 = order[..head].iter().map(|&t| p[t]).sum();
        let mut tilted = 0.0;
        for &t in &order[..head] {
            let g: f64 = StandardNormal.sample(&mut rng);
            p[t] *= libm::exp(eps * g);
            tilted += p[t];
        }
        let mut floor = f64::INFINITY;
        for &t in &order[..head] {
            p[t] *= head_mass / tilted;
            floor = floor.min(p[t]);
        }
        // Keep every tail token strictly below the head.
        if head < VOCAB {
            let top_tail = p[order[head]];
            if top_tail >= floor {
                let shrink = 0.5 * floor / top_tail;
                for &t in &order[head..] {
                    p[t] *= shrink;
                }
            }
        }
        let total: f64 = p.iter().sum();
        for v in &mut p {
            *v /= total;
        }
        p
    }

    /// Opens a simulated stream. Unknown endpoints and non-zero temperatures
    /// are rejected.
    pub fn serve_stream(&self, id: &EndpointId, request: &StreamRequest) -> Result<SimStream<'_>> {
        let m = self.member(id)?;
        if request.temperature != 0.0 {
            return Err(Error::invalid(
                "temperature",
                format!("{} is unsupported; the simulator only decodes greedily", request.temperature),
            ));
        }
        let spec = &m.spec;
        let family = &self.families[&m.family];
        let key = prompt_key(&request.prompt);
        let mut rng = rng_from(mix_all(&[spec.seed, key, request.ordinal, 1]));

        let failed = rng.gen::<f64>() < spec.error_rate;
        let z: f64 = StandardNormal.sample(&mut rng);
        let ttft = spec.ttft_median * libm::exp(spec.ttft_log_sigma * z);

        let plan = if failed {
            Plan::default()
        } else {
            plan_response(spec, family, &request.prompt, request.max_tokens)
        };
        let sigma2 = libm::log(1.0 + spec.jitter_cv * spec.jitter_cv);
        Ok(SimStream {
            fleet: self,
            spec,
            family,
            key,
            rng,
            plan,
            failed,
            top_k: request.logprobs_top_k as usize,
            next: 0,
            elapsed: ttft,
            gap_mu: -sigma2 / 2.0,
            gap_sigma: libm::sqrt(sigma2),
            done: false,
        })
    }
}

impl EndpointClient for SimFleet {
    fn open_stream(&self, endpoint: &EndpointId, request: &StreamRequest) -> Result<EventStream<'_>> {
        Ok(Box::new(self.serve_stream(endpoint, request)?))
    }
}

fn continuation_token(family_seed: u64, key: u64, position: u32) -> u32 {
    (mix_all(&[family_seed, key, u64::from(position), 1]) % VOCAB as u64) as u32
}

/// Pronounceable text for a vocabulary id.
pub fn token_text(token: u32) -> String {
    const ONSET: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "ch"];
    const NUCLEUS: [&str; 16] = ["a", "e", "i", "o", "u", "ai", "ea", "oo", "ou", "ie", "ar", "er", "or", "an", "en", "on"];
    let t = token as usize % VOCAB;
    format!("{}{} ", ONSET[t / 16], NUCLEUS[t % 16])
}

#[derive(Debug, Clone, Default)]
struct Plan {
    thinking: u32,
    visible: u32,
    answer: Option<String>,
    truncated: bool,
}

impl Plan {
    fn len(&self) -> u32 {
        self.thinking + self.visible + if self.answer.is_some() { 2 } else { 0 }
    }
}

/// A synthetic task prompt, as parsed back by the simulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskHeader<'a> {
    pub suite: &'a str,
    pub item: u64,
}

/// Parses the `SUITE <suite> ITEM <n>` header line of a synthetic task.
pub fn parse_task_header(prompt: &str) -> Option<TaskHeader<'_>> {
    let line = prompt.lines().next()?;
    let mut words = line.split_whitespace();
    if words.next()? != "SUITE" {
        return None;
    }
    let suite = words.next()?;
    if words.next()? != "ITEM" {
        return None;
    }
    let item = words.next()?.parse().ok()?;
    Some(TaskHeader { suite, item })
}

/// Evaluates the trailing `QUESTION: a <op> b` line.
pub fn solve_question(prompt: &str) -> Option<i64> {
    let line = prompt.lines().rev().find(|l| !l.trim().is_empty())?;
    let q = line.trim().strip_prefix("QUESTION:")?;
    let mut parts = q.split_whitespace();
    let a: i64 = parts.next()?.parse().ok()?;
    let op = parts.next()?;
    let b: i64 = parts.next()?.parse().ok()?;
    match op {
        "+" => a.checked_add(b),
        "-" => a.checked_sub(b),
        "*" => a.checked_mul(b),
        _ => None,
    }
}

fn plan_response(spec: &SimEndpointSpec, family: &SimFamily, prompt: &str, max_tokens: u32) -> Plan {
    let mut plan = match parse_task_header(prompt) {
        Some(header) => {
            let value = solve_question(prompt).unwrap_or(0);
            let correct = task_solved(spec, family, &header, approx_tokens(prompt));
            let shown = if correct { value } else { value + 1 + (header.item % 7) as i64 };
            Plan {
                thinking: family.thinking_tokens,
                visible: family.working_tokens,
                answer: Some(shown.to_string()),
                truncated: false,
            }
        }
        None => Plan {
            thinking: family.thinking_tokens,
            visible: max_tokens.saturating_sub(family.thinking_tokens),
            answer: None,
            truncated: false,
        },
    };
    if plan.len() > max_tokens {
        plan.truncated = true;
        plan.answer = None;
        plan.thinking = plan.thinking.min(max_tokens);
        plan.visible = max_tokens - plan.thinking;
    } else if plan.answer.is_none() {
        // Open-ended prompts run until the token budget is exhausted.
        plan.truncated = true;
    }
    plan
}

/// Low-discrepancy per-(endpoint, suite) outcome sequence: over any run of
/// consecutive items the solved fraction tracks the success probability
/// to within a couple of items.
fn task_solved(spec: &SimEndpointSpec, family: &SimFamily, header: &TaskHeader<'_>, prompt_tokens: usize) -> bool {
    if let Some(limit) = spec.context_limit {
        if prompt_tokens > limit as usize {
            return false;
        }
    }
    let p = (family.success(header.suite) - spec.accuracy_penalty).max(0.0);
    let offset = (mix_all(&[spec.seed, hash_str(header.suite), 4]) >> 11) as f64 / (1u64 << 53) as f64;
    let u = offset + header.item as f64 * WEYL;
    u - libm::floor(u) < p
}

/// Lazily generated event sequence of one simulated request.
pub struct SimStream<'a> {
    fleet: &'a SimFleet,
    spec: &'a SimEndpointSpec,
    family: &'a SimFamily,
    key: u64,
    rng: ChaCha8Rng,
    plan: Plan,
    failed: bool,
    top_k: usize,
    next: u32,
    elapsed: f64,
    gap_mu: f64,
    gap_sigma: f64,
    done: bool,
}

impl SimStream<'_> {
    fn gap(&mut self) -> f64 {
        let mut g = 1.0 / self.spec.tokens_per_sec;
        if self.gap_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            g *= libm::exp(self.gap_mu + self.gap_sigma * z);
        }
        g.max(MIN_GAP)
    }

    fn logprobs(&self, position: u32) -> Vec<(u32, f64)> {
        if self.top_k == 0 {
            return Vec::new();
        }
        let q = self.fleet.mixed_at(self.spec, self.family, self.key, position, self.top_k);
        top_k_logprobs(&q, self.top_k)
    }
}

/// The `k` most likely tokens of a full distribution as log-probabilities,
/// ordered by probability then token id.
pub fn top_k_logprobs(q: &[f64], k: usize) -> Vec<(u32, f64)> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.into_iter().map(|t| (t as u32, libm::log(q[t]))).collect()
}

impl Iterator for SimStream<'_> {
    type Item = StreamEvent;

    fn next(&mut self) -> Option<StreamEvent> {
        if self.done {
            return None;
        }
        if self.failed {
            self.done = true;
            return Some(StreamEvent::End {
                elapsed: self.elapsed,
                reason: EndReason::Error,
            });
        }
        let pos = self.next;
        if pos > 0 {
            self.elapsed += self.gap();
        }
        if pos >= self.plan.len() {
            self.done = true;
            let reason = if self.plan.truncated { EndReason::Length } else { EndReason::Stop };
            return Some(StreamEvent::End {
                elapsed: self.elapsed,
                reason,
            });
        }
        self.next += 1;
        let body = self.plan.thinking + self.plan.visible;
        let (token, text, top_logprobs) = if pos < body {
            let token = continuation_token(self.family.seed, self.key, pos);
            (token, token_text(token), self.logprobs(pos))
        } else if pos == body {
            let lp = if self.top_k > 0 { alloc::vec![(ANSWER_MARKER_TOKEN, 0.0)] } else { Vec::new() };
            (ANSWER_MARKER_TOKEN, "ANSWER: ".to_string(), lp)
        } else {
            let lp = if self.top_k > 0 { alloc::vec![(ANSWER_VALUE_TOKEN, 0.0)] } else { Vec::new() };
            (ANSWER_VALUE_TOKEN, self.plan.answer.clone().unwrap_or_default(), lp)
        };
        let phase = if pos < self.plan.thinking { Phase::Thinking } else { Phase::Answer };
        Some(StreamEvent::Token(TokenChunk {
            token,
            text,
            top_logprobs,
            elapsed: self.elapsed,
            phase,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{Decoding, Precision};
    use alloc::vec;

    fn id(sku: &str) -> EndpointId {
        EndpointId::new("p", "m", sku, Precision::Bf16, Decoding::Standard, "us-east")
    }

    fn fleet(eps: f64) -> SimFleet {
        let mut s = SimEndpointSpec::new(id("a"), 0.25, 100.0, 7);
        s.perturbation_epsilon = eps;
        s.jitter_cv = 0.2;
        s.ttft_log_sigma = 0.3;
        spawn_fleet(vec![s], vec![]).unwrap()
    }

    fn collect(f: &SimFleet, req: &StreamRequest) -> Vec<StreamEvent> {
        f.serve_stream(&id("a"), req).unwrap().collect()
    }

    #[test]
    fn identical_fleets_identical_streams() {
        let req = StreamRequest::new("hello".into(), 20).with_logprobs(4).with_ordinal(3);
        assert_eq!(collect(&fleet(0.1), &req), collect(&fleet(0.1), &req));
    }

    #[test]
    fn timestamps_strictly_increase() {
        let events = collect(&fleet(0.0), &StreamRequest::new("x".into(), 64));
        assert_eq!(events.len(), 65);
        for w in events.windows(2) {
            assert!(w[1].elapsed() > w[0].elapsed());
        }
    }

    #[test]
    fn zero_epsilon_matches_reference() {
        let f = fleet(0.0);
        for pos in 0..4 {
            assert_eq!(
                f.endpoint_distribution(&id("a"), "hello", pos, 8).unwrap(),
                f.reference_distribution("m", "hello", pos).unwrap()
            );
        }
    }

    #[test]
    fn perturbation_keeps_head_tokens() {
        let f = fleet(1.5);
        for pos in 0..6 {
            let p = f.reference_distribution("m", "hello", pos).unwrap();
            let q = f.endpoint_distribution(&id("a"), "hello", pos, 8).unwrap();
            let set = |v: &[f64]| {
                let mut t: Vec<u32> = top_k_logprobs(v, 8).into_iter().map(|(t, _)| t).collect();
                t.sort();
                t
            };
            assert_eq!(set(&p), set(&q));
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn top_k_sums_below_one() {
        let events = collect(&fleet(0.3), &StreamRequest::new("x".into(), 8).with_logprobs(20));
        for e in events {
            if let StreamEvent::Token(t) = e {
                let s: f64 = t.top_logprobs.iter().map(|(_, lp)| libm::exp(*lp)).sum();
                assert!(s <= 1.0 + 1e-12);
                assert_eq!(t.top_logprobs.len(), 20);
            }
        }
    }

    #[test]
    fn errors_emit_no_tokens() {
        let mut s = SimEndpointSpec::new(id("a"), 0.25, 100.0, 7);
        s.error_rate = 1.0;
        let f = spawn_fleet(vec![s], vec![]).unwrap();
        for ordinal in 0..20 {
            let ev: Vec<_> = f.serve_stream(&id("a"), &StreamRequest::new("x".into(), 8).with_ordinal(ordinal)).unwrap().collect();
            assert!(matches!(ev.as_slice(), [StreamEvent::End { reason: EndReason::Error, .. }]));
        }
    }

    #[test]
    fn rejects_temperature_unknown_and_duplicates() {
        let f = fleet(0.0);
        let mut req = StreamRequest::new("x".into(), 8);
        req.temperature = 0.7;
        assert!(f.serve_stream(&id("a"), &req).is_err());
        assert!(f.serve_stream(&id("b"), &StreamRequest::new("x".into(), 8)).is_err());
        let s = SimEndpointSpec::new(id("a"), 0.25, 100.0, 7);
        assert!(matches!(spawn_fleet(vec![s.clone(), s], vec![]), Err(Error::Duplicate { .. })));
        let empty = spawn_fleet(vec![], vec![]).unwrap();
        assert!(empty.is_empty());
        assert!(empty.serve_stream(&id("a"), &StreamRequest::new("x".into(), 8)).is_err());
    }

    #[test]
    fn answers_tasks() {
        let f = fleet(0.0);
        let prompt = "SUITE gsm8k ITEM 3\nfiller\nQUESTION: 12 * 4";
        let text: String = collect(&f, &StreamRequest::new(prompt.into(), 64))
            .into_iter()
            .filter_map(|e| match e {
                StreamEvent::Token(t) => Some(t.text),
                _ => None,
            })
            .collect();
        assert!(text.contains("ANSWER: "), "{text}");
        assert_eq!(solve_question(prompt), Some(48));
    }
}
