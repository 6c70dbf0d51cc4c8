//! Verifiable task suites: running them against endpoints, the quality
//! composite and the effective-context sweep.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::client::{approx_tokens, EndReason, EndpointClient, Phase, StreamEvent, StreamRequest};
use crate::error::{Error, Result};
use crate::registry::{Endpoint, EndpointId};
use crate::rng::{hash_str, mix_all, rng_from};
use crate::sim::token_text;
use crate::time::TimeWindow;

/// Suites entering the quality composite, with the public benchmark each
/// one stands in for.
pub const QUALITY_SUITES: [&str; 5] = ["gsm8k", "humaneval-plus", "ifbench", "math-100", "aime-2025"];
/// Reasoning suite whose accuracy and tokens-to-solution feed the
/// per-correct-answer headline metrics.
pub const HEADLINE_SUITE: &str = "math-100";
pub const AIME_SUITE: &str = "aime-2025";
pub const CODE_SUITE: &str = "humaneval-plus";
/// Context-parameterized retrieval suite for the effective-context sweep.
pub const LONG_CONTEXT_SUITE: &str = "ruler";
pub const EFFECTIVE_CONTEXT_THRESHOLD: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verifier {
    ExactMatch,
    NumericMatch,
    Contains,
}

impl Verifier {
    pub const fn as_str(self) -> &'static str {
        match self {
            Verifier::ExactMatch => "exact_match",
            Verifier::NumericMatch => "numeric_match",
            Verifier::Contains => "contains",
        }
    }

    pub fn check(self, answer: &str, reference: &str) -> bool {
        match self {
            Verifier::ExactMatch => answer.trim() == reference.trim(),
            Verifier::NumericMatch => match (answer.trim().parse::<f64>(), reference.trim().parse::<f64>()) {
                (Ok(a), Ok(b)) => (a - b).abs() <= 1e-9 * b.abs().max(1.0),
                _ => false,
            },
            Verifier::Contains => normalize(answer).contains(&normalize(reference)),
        }
    }
}

impl FromStr for Verifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_match" => Ok(Verifier::ExactMatch),
            "numeric_match" => Ok(Verifier::NumericMatch),
            "contains" => Ok(Verifier::Contains),
            _ => Err(Error::invalid("verifier", format!("`{s}` is not one of exact_match, numeric_match, contains"))),
        }
    }
}

/// Lower-cases and collapses runs of whitespace to single spaces.
fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Text after the last `ANSWER:` marker, or the whole response without one.
pub fn extract_answer(response: &str) -> &str {
    match response.rfind("ANSWER:") {
        Some(i) => response[i + "ANSWER:".len()..].trim(),
        None => response.trim(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTask {
    pub id: String,
    pub suite: String,
    pub prompt: String,
    pub context_length: u32,
    pub verifier: Verifier,
    pub reference_answer: String,
    pub is_reasoning: bool,
}

impl EvalTask {
    pub fn validate(&self) -> Result<()> {
        if self.reference_answer.trim().is_empty() {
            return Err(Error::invalid(format!("task {} reference_answer", self.id), "must be non-empty"));
        }
        if self.context_length as usize > approx_tokens(&self.prompt) {
            return Err(Error::invalid(
                format!("task {} context_length", self.id),
                "exceeds the prompt's token length",
            ));
        }
        Ok(())
    }
}

fn suite_verifier(suite: &str) -> (Verifier, bool) {
    match suite {
        "gsm8k" | "math-100" => (Verifier::NumericMatch, true),
        "aime-2025" => (Verifier::ExactMatch, true),
        "humaneval-plus" => (Verifier::ExactMatch, false),
        _ => (Verifier::Contains, false),
    }
}

/// Deterministic arithmetic tasks standing in for `suite`. When
/// `context_length` is non-zero the prompt is padded with filler to that
/// many tokens.
pub fn synthetic_suite(suite: &str, n: u32, seed: u64, context_length: u32) -> Vec<EvalTask> {
    let (verifier, is_reasoning) = suite_verifier(suite);
    let mut filler = String::new();
    if context_length > 0 {
        let mut rng = rng_from(mix_all(&[seed, hash_str(suite), 7]));
        while filler.len() < 4096 {
            filler.push_str(&token_text(rng.gen_range(0..256)));
        }
    }
    (0..n)
        .map(|i| {
            let mut rng = rng_from(mix_all(&[seed, hash_str(suite), u64::from(i)]));
            let a: i64 = rng.gen_range(2..1000);
            let b: i64 = rng.gen_range(2..1000);
            let (op, value) = match rng.gen_range(0..3) {
                0 => ("+", a + b),
                1 => ("-", a - b),
                _ => ("*", a * b),
            };
            let head = format!("SUITE {suite} ITEM {i}\n");
            let tail = format!("\nQUESTION: {a} {op} {b}");
            let mut prompt = head;
            let target = context_length as usize * 4;
            while prompt.len() + tail.len() < target {
                let take = (target - prompt.len() - tail.len()).min(filler.len());
                prompt.push_str(&filler[..take]);
            }
            prompt.push_str(&tail);
            EvalTask {
                id: format!("{suite}-{i:04}"),
                suite: suite.to_string(),
                prompt,
                context_length,
                verifier,
                reference_answer: value.to_string(),
                is_reasoning,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub endpoint: EndpointId,
    pub suite: String,
    pub window: TimeWindow,
    pub accuracy: f64,
    /// Mean output tokens (thinking included) over solved reasoning tasks.
    pub tokens_to_solution: Option<f64>,
    pub input_tokens: u64,
    /// All generated tokens, thinking included.
    pub output_tokens: u64,
    /// The thinking-phase subset of `output_tokens`.
    pub thinking_tokens: u64,
    pub wall_clock: f64,
    pub dollar_cost: f64,
    pub n_tasks: u32,
    pub n_solved: u32,
    pub eval_errors: u32,
}

impl EvalRun {
    /// Checks the accuracy against the counts and that the cost matches
    /// `endpoint`'s prices, both to 1e-9.
    pub fn validate(&self, endpoint: &Endpoint) -> Result<()> {
        let who = format!("eval run {} {}", self.endpoint, self.suite);
        if self.n_tasks == 0 || self.n_solved > self.n_tasks {
            return Err(Error::invalid(who, "solved count exceeds task count"));
        }
        if (self.accuracy - self.n_solved as f64 / self.n_tasks as f64).abs() > 1e-9 {
            return Err(Error::invalid(who, "accuracy must equal solved / tasks"));
        }
        if self.thinking_tokens > self.output_tokens {
            return Err(Error::invalid(who, "thinking tokens exceed output tokens"));
        }
        if (self.dollar_cost - dollar_cost(endpoint, self.input_tokens, self.output_tokens)).abs() > 1e-9 {
            return Err(Error::invalid(who, "dollar_cost disagrees with registry prices"));
        }
        Ok(())
    }
}

pub fn dollar_cost(endpoint: &Endpoint, input_tokens: u64, output_tokens: u64) -> f64 {
    (input_tokens as f64 * endpoint.price_input + output_tokens as f64 * endpoint.price_output) / 1e6
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub window: TimeWindow,
    pub max_tokens: u32,
    /// Extra attempts after a failed stream.
    pub retries: u32,
    pub seed: u64,
}

impl EvalContext {
    pub fn new(window: TimeWindow, seed: u64) -> Self {
        EvalContext {
            window,
            max_tokens: 8192,
            retries: 3,
            seed,
        }
    }
}

struct Answer {
    text: String,
    output: u64,
    thinking: u64,
    elapsed: f64,
}

fn attempt(client: &dyn EndpointClient, endpoint: &EndpointId, request: &StreamRequest) -> Option<Answer> {
    let stream = client.open_stream(endpoint, request).ok()?;
    let mut a = Answer {
        text: String::new(),
        output: 0,
        thinking: 0,
        elapsed: 0.0,
    };
    for event in stream {
        match event {
            StreamEvent::Token(t) => {
                a.output += 1;
                if t.phase == Phase::Thinking {
                    a.thinking += 1;
                } else {
                    a.text.push_str(&t.text);
                }
            }
            StreamEvent::End { elapsed, reason } => {
                a.elapsed = elapsed;
                return (reason != EndReason::Error).then_some(a);
            }
        }
    }
    None
}

/// Runs one suite against one endpoint at temperature 0.
pub fn run_eval_suite(
    client: &dyn EndpointClient,
    endpoint: &Endpoint,
    tasks: &[EvalTask],
    ctx: &EvalContext,
) -> Result<EvalRun> {
    let suite = &tasks.first().ok_or(Error::Empty("eval tasks"))?.suite;
    if let Some(other) = tasks.iter().find(|t| &t.suite != suite) {
        return Err(Error::Mismatch(format!("eval run mixes suites {suite} and {}", other.suite)));
    }
    let mut run = EvalRun {
        endpoint: endpoint.id.clone(),
        suite: suite.clone(),
        window: ctx.window,
        accuracy: 0.0,
        tokens_to_solution: None,
        input_tokens: 0,
        output_tokens: 0,
        thinking_tokens: 0,
        wall_clock: 0.0,
        dollar_cost: 0.0,
        n_tasks: tasks.len() as u32,
        n_solved: 0,
        eval_errors: 0,
    };
    let mut solved_reasoning = Vec::new();
    let mut answered = 0;
    for (i, task) in tasks.iter().enumerate() {
        task.validate()?;
        let mut answer = None;
        for k in 0..=ctx.retries {
            let ordinal = mix_all(&[ctx.seed, ctx.window.start.millis() as u64, i as u64, u64::from(k)]);
            let req = StreamRequest::new(task.prompt.clone(), ctx.max_tokens).with_ordinal(ordinal);
            match attempt(client, &endpoint.id, &req) {
                Some(a) => {
                    answer = Some(a);
                    break;
                }
                None => run.eval_errors += 1,
            }
        }
        let Some(a) = answer else { continue };
        answered += 1;
        run.input_tokens += approx_tokens(&task.prompt) as u64;
        run.output_tokens += a.output;
        run.thinking_tokens += a.thinking;
        run.wall_clock += a.elapsed;
        if task.verifier.check(extract_answer(&a.text), &task.reference_answer) {
            run.n_solved += 1;
            if task.is_reasoning {
                solved_reasoning.push(a.output as f64);
            }
        }
    }
    if answered == 0 {
        return Err(Error::Client(format!(
            "every task of suite {suite} failed against {}",
            endpoint.id
        )));
    }
    run.accuracy = run.n_solved as f64 / run.n_tasks as f64;
    run.tokens_to_solution = crate::stats::mean(&solved_reasoning);
    run.dollar_cost = dollar_cost(endpoint, run.input_tokens, run.output_tokens);
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub endpoint: EndpointId,
    pub q: f64,
    pub per_suite: Vec<(String, f64)>,
}

pub fn uniform_suite_weights() -> Vec<(String, f64)> {
    let w = 1.0 / QUALITY_SUITES.len() as f64;
    QUALITY_SUITES.iter().map(|s| (s.to_string(), w)).collect()
}

/// `q = 100 Σ w_suite accuracy_suite`. When a suite has several runs the one
/// with the latest window end (then latest position) is used.
pub fn quality_composite(runs: &[EvalRun], suite_weights: &[(String, f64)]) -> Result<QualityScore> {
    let first = runs.first().ok_or(Error::Empty("eval runs"))?;
    let total: f64 = suite_weights.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 || suite_weights.iter().any(|(_, w)| !(0.0..=1.0).contains(w)) {
        return Err(Error::invalid("suite weights", format!("must lie in [0, 1] and sum to 1 (got {total})")));
    }
    let names: BTreeSet<&str> = suite_weights.iter().map(|(s, _)| s.as_str()).collect();
    if names.len() != suite_weights.len() {
        return Err(Error::invalid("suite weights", "list a suite more than once"));
    }
    let mut q = 0.0;
    let mut per_suite = Vec::with_capacity(suite_weights.len());
    for (suite, w) in suite_weights {
        let run = runs
            .iter()
            .filter(|r| &r.suite == suite && r.endpoint == first.endpoint)
            .max_by_key(|r| r.window.end)
            .ok_or_else(|| Error::MissingFactor {
                endpoint: first.endpoint.to_string(),
                what: "an eval run for a configured quality suite",
            })?;
        q += w * run.accuracy;
        per_suite.push((suite.clone(), run.accuracy));
    }
    Ok(QualityScore {
        endpoint: first.endpoint.clone(),
        q: 100.0 * q,
        per_suite,
    })
}

/// Largest level at which the suite produced by `tasks_at` keeps accuracy
/// at or above 0.90; 0 when no level qualifies.
pub fn effective_context(
    client: &dyn EndpointClient,
    endpoint: &Endpoint,
    tasks_at: impl Fn(u32) -> Vec<EvalTask>,
    levels: &[u32],
    ctx: &EvalContext,
) -> Result<u32> {
    if levels.is_empty() {
        return Err(Error::Empty("context levels"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("context levels", "must be strictly ascending"));
    }
    let mut best = 0;
    for &level in levels {
        let run = run_eval_suite(client, endpoint, &tasks_at(level), ctx)?;
        if run.accuracy >= EFFECTIVE_CONTEXT_THRESHOLD {
            best = level;
        }
    }
    Ok(best)
}

/// Suite label under which a long-context run at `level` tokens is stored.
pub fn context_suite(level: u32) -> String {
    format!("{LONG_CONTEXT_SUITE}@{level}")
}

/// Inverse of [`context_suite`].
pub fn parse_context_suite(suite: &str) -> Option<u32> {
    suite.strip_prefix(LONG_CONTEXT_SUITE)?.strip_prefix('@')?.parse().ok()
}

/// Effective context from stored long-context runs of one endpoint: the
/// largest level whose most recent run reaches the threshold, 0 when none
/// does, `None` when no such runs exist.
pub fn effective_context_from_runs<'a>(runs: impl IntoIterator<Item = &'a EvalRun>) -> Option<u32> {
    let mut latest: alloc::collections::BTreeMap<u32, &EvalRun> = alloc::collections::BTreeMap::new();
    for r in runs {
        if let Some(level) = parse_context_suite(&r.suite) {
            match latest.get(&level) {
                Some(prev) if prev.window.end > r.window.end => {}
                _ => {
                    latest.insert(level, r);
                }
            }
        }
    }
    if latest.is_empty() {
        return None;
    }
    Some(
        latest
            .iter()
            .filter(|(_, r)| r.accuracy >= EFFECTIVE_CONTEXT_THRESHOLD)
            .map(|(l, _)| *l)
            .max()
            .unwrap_or(0),
    )
}
