//! Timed streaming probes and their latency/throughput summaries.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{approx_tokens, EndReason, EndpointClient, Phase, StreamEvent, StreamRequest};
use crate::error::{Error, Result};
use crate::registry::EndpointId;
use crate::rng::{mix_all, rng_from};
use crate::sim::token_text;
use crate::stats::{mean, nearest_rank_sorted, std_dev};
use crate::time::{TimeWindow, Timestamp, MILLIS_PER_DAY};

pub const INPUT_LENGTHS: [u32; 3] = [1_000, 10_000, 100_000];
pub const CONCURRENCY_LEVELS: [u32; 3] = [1, 10, 100];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProbeConditions {
    pub input_length: u32,
    pub concurrency: u32,
    pub region: String,
}

impl ProbeConditions {
    pub fn new(input_length: u32, concurrency: u32, region: impl Into<String>) -> Result<Self> {
        let c = ProbeConditions {
            input_length,
            concurrency,
            region: region.into(),
        };
        c.validate()?;
        Ok(c)
    }

    /// The condition the leaderboard composite is computed under.
    pub fn leaderboard_default() -> Self {
        ProbeConditions {
            input_length: 10_000,
            concurrency: 1,
            region: "us-east".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !INPUT_LENGTHS.contains(&self.input_length) {
            return Err(Error::invalid("input_length", format!("{} is not one of 1000, 10000, 100000", self.input_length)));
        }
        if !CONCURRENCY_LEVELS.contains(&self.concurrency) {
            return Err(Error::invalid("concurrency", format!("{} is not one of 1, 10, 100", self.concurrency)));
        }
        if self.region.trim().is_empty() {
            return Err(Error::invalid("region", "must be non-empty"));
        }
        Ok(())
    }
}

impl fmt::Display for ProbeConditions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}in/c{}/{}", self.input_length, self.concurrency, self.region)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Ok,
    HttpError,
    Timeout,
    Truncated,
}

impl ProbeStatus {
    pub const fn as_str(self) -> &'static str {
        match self {
            ProbeStatus::Ok => "ok",
            ProbeStatus::HttpError => "http_error",
            ProbeStatus::Timeout => "timeout",
            ProbeStatus::Truncated => "truncated",
        }
    }
}

impl FromStr for ProbeStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(ProbeStatus::Ok),
            "http_error" => Ok(ProbeStatus::HttpError),
            "timeout" => Ok(ProbeStatus::Timeout),
            "truncated" => Ok(ProbeStatus::Truncated),
            _ => Err(Error::invalid("status", format!("`{s}` is not a probe status"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub endpoint: EndpointId,
    pub conditions: ProbeConditions,
    pub request_time: Timestamp,
    /// Seconds from request to the first stream event.
    pub ttft: f64,
    /// Seconds to the first post-thinking token, for streams with a
    /// thinking phase.
    pub ttfv: Option<f64>,
    pub inter_token_gaps: Vec<f64>,
    pub total_time: f64,
    pub output_tokens: u32,
    pub status: ProbeStatus,
    /// Hex SHA-256 of the concatenated response text.
    pub response_hash: String,
    /// Days since the Unix epoch of the prompt set used.
    pub prompt_set_day: i64,
}

impl ProbeRecord {
    pub fn validate(&self) -> Result<()> {
        let who = format!("probe record for {} at {}", self.endpoint, self.request_time.millis());
        let bad = |field: &str, rule: &str| Err(Error::invalid(format!("{who} {field}"), rule));
        if !(self.ttft.is_finite() && self.ttft >= 0.0) {
            return bad("ttft", "must be >= 0");
        }
        if !(self.total_time.is_finite() && self.ttft <= self.total_time) {
            return bad("ttft", "must not exceed total_time");
        }
        if let Some(v) = self.ttfv {
            if !(v >= self.ttft && v <= self.total_time) {
                return bad("ttfv", "must lie between ttft and total_time");
            }
        }
        if self.inter_token_gaps.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return bad("inter_token_gaps", "must be finite and >= 0");
        }
        if self.status == ProbeStatus::Ok
            && self.output_tokens >= 1
            && self.output_tokens as usize != self.inter_token_gaps.len() + 1
        {
            return bad("output_tokens", "must equal gap count + 1 for ok probes");
        }
        if self.response_hash.len() != 64 {
            return bad("response_hash", "must be a 64-digit hex SHA-256");
        }
        self.conditions.validate()
    }

    /// Decode-phase rate, tokens per second.
    pub fn output_speed(&self) -> Option<f64> {
        let decode = self.total_time - self.ttft;
        (self.status == ProbeStatus::Ok && self.output_tokens >= 1 && decode > 0.0)
            .then(|| self.output_tokens as f64 / decode)
    }
}

/// Timing and bookkeeping that the caller fixes for one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeContext {
    pub request_time: Timestamp,
    pub prompt_set_day: i64,
    pub max_tokens: u32,
    pub ordinal: u64,
}

/// Issues one probe and records it. Endpoint failures become statuses;
/// only violated preconditions are returned as errors.
pub fn run_probe(
    client: &dyn EndpointClient,
    endpoint: &EndpointId,
    conditions: &ProbeConditions,
    prompt: &str,
    deadline: f64,
    ctx: &ProbeContext,
) -> Result<ProbeRecord> {
    conditions.validate()?;
    let target = conditions.input_length as f64;
    let got = approx_tokens(prompt) as f64;
    if (got - target).abs() > 0.02 * target {
        return Err(Error::invalid(
            "probe prompt",
            format!("{got} tokens is not within 2% of input length {target}"),
        ));
    }
    if !(deadline > 0.0) {
        return Err(Error::invalid("deadline", "must be > 0"));
    }

    let request = StreamRequest::new(prompt.to_string(), ctx.max_tokens).with_ordinal(ctx.ordinal);
    let mut record = ProbeRecord {
        endpoint: endpoint.clone(),
        conditions: conditions.clone(),
        request_time: ctx.request_time,
        ttft: 0.0,
        ttfv: None,
        inter_token_gaps: Vec::new(),
        total_time: 0.0,
        output_tokens: 0,
        status: ProbeStatus::HttpError,
        response_hash: String::new(),
        prompt_set_day: ctx.prompt_set_day,
    };
    let mut hasher = Sha256::new();
    let stream = match client.open_stream(endpoint, &request) {
        Ok(s) => Some(s),
        Err(_) => None,
    };

    let mut first: Option<f64> = None;
    let mut last_token: Option<f64> = None;
    let mut saw_thinking = false;
    let mut last_elapsed = 0.0;
    let mut status = ProbeStatus::Truncated;
    if let Some(stream) = stream {
        for event in stream {
            let t = event.elapsed();
            if t > deadline {
                status = ProbeStatus::Timeout;
                last_elapsed = deadline;
                break;
            }
            first.get_or_insert(t);
            last_elapsed = t;
            match event {
                StreamEvent::Token(chunk) => {
                    if let Some(prev) = last_token {
                        record.inter_token_gaps.push(t - prev);
                    }
                    last_token = Some(t);
                    record.output_tokens += 1;
                    hasher.update(chunk.text.as_bytes());
                    match chunk.phase {
                        Phase::Thinking => saw_thinking = true,
                        Phase::Answer if saw_thinking && record.ttfv.is_none() => record.ttfv = Some(t),
                        Phase::Answer => {}
                    }
                }
                StreamEvent::End { reason, .. } => {
                    status = match reason {
                        EndReason::Stop | EndReason::Length => ProbeStatus::Ok,
                        EndReason::Error => ProbeStatus::HttpError,
                    };
                    break;
                }
            }
        }
    } else {
        status = ProbeStatus::HttpError;
    }

    record.status = status;
    record.total_time = last_elapsed;
    record.ttft = first.unwrap_or(last_elapsed).min(last_elapsed);
    record.response_hash = hex::encode(hasher.finalize());
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub endpoint: EndpointId,
    pub conditions: ProbeConditions,
    pub window: TimeWindow,
    pub ttft_p50: Option<f64>,
    pub ttft_p95: Option<f64>,
    pub ttft_p99: Option<f64>,
    pub ttfv_p50: Option<f64>,
    pub output_speed: Option<f64>,
    pub jitter: Option<f64>,
    pub completion_rate: f64,
    pub error_rate: f64,
    pub n_probes: u32,
}

/// Aggregates a homogeneous batch of probe records. Latency figures are
/// absent when no probe in the batch succeeded.
pub fn summarize(records: &[ProbeRecord]) -> Result<LatencySummary> {
    let head = records.first().ok_or(Error::Empty("probe records"))?;
    for r in records {
        if r.endpoint != head.endpoint || r.conditions != head.conditions {
            return Err(Error::Mismatch(format!(
                "summarize mixes {} {} with {} {}",
                head.endpoint, head.conditions, r.endpoint, r.conditions
            )));
        }
    }
    let start = records.iter().map(|r| r.request_time).min().unwrap_or(head.request_time);
    let end = records.iter().map(|r| r.request_time).max().unwrap_or(head.request_time);
    summarize_in(records, TimeWindow { start, end: end.plus_millis(1) })
}

/// As [`summarize`], labelled with an explicit window.
pub fn summarize_in(records: &[ProbeRecord], window: TimeWindow) -> Result<LatencySummary> {
    let head = records.first().ok_or(Error::Empty("probe records"))?;
    let ok: Vec<&ProbeRecord> = records.iter().filter(|r| r.status == ProbeStatus::Ok).collect();
    let mut ttft: Vec<f64> = ok.iter().map(|r| r.ttft).collect();
    ttft.sort_by(f64::total_cmp);
    let mut ttfv: Vec<f64> = ok.iter().filter_map(|r| r.ttfv).collect();
    ttfv.sort_by(f64::total_cmp);
    let pct = |v: &[f64], p| nearest_rank_sorted(v, p).ok();
    let speeds: Vec<f64> = ok.iter().filter_map(|r| r.output_speed()).collect();
    let gaps: Vec<f64> = ok.iter().flat_map(|r| r.inter_token_gaps.iter().copied()).collect();
    let n = records.len();
    Ok(LatencySummary {
        endpoint: head.endpoint.clone(),
        conditions: head.conditions.clone(),
        window,
        ttft_p50: pct(&ttft, 0.50),
        ttft_p95: pct(&ttft, 0.95),
        ttft_p99: pct(&ttft, 0.99),
        ttfv_p50: pct(&ttfv, 0.50),
        output_speed: mean(&speeds),
        jitter: std_dev(&gaps),
        completion_rate: ok.len() as f64 / n as f64,
        error_rate: (n - ok.len()) as f64 / n as f64,
        n_probes: n as u32,
    })
}

/// Cadence, condition rotation and prompt rotation for the probe loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePlan {
    pub cadence_secs: u32,
    /// Probe slot `i` uses `conditions[i % len]`.
    pub conditions: Vec<ProbeConditions>,
    pub rotation_seed: u64,
    pub prompts_per_day: u32,
    pub max_tokens: u32,
    pub deadline_secs: f64,
}

impl ProbePlan {
    pub fn validate(&self) -> Result<()> {
        if self.cadence_secs == 0 {
            return Err(Error::invalid("cadence", "must be > 0 seconds"));
        }
        if self.conditions.is_empty() {
            return Err(Error::Empty("probe plan conditions"));
        }
        for c in &self.conditions {
            c.validate()?;
        }
        if self.prompts_per_day == 0 || self.max_tokens == 0 {
            return Err(Error::invalid("probe plan", "prompts_per_day and max_tokens must be > 0"));
        }
        if !(self.deadline_secs > 0.0) {
            return Err(Error::invalid("deadline", "must be > 0"));
        }
        Ok(())
    }

    /// Slot start times inside `window`, aligned to multiples of the
    /// cadence since the epoch.
    pub fn slots(&self, window: TimeWindow) -> Result<Vec<(u64, Timestamp)>> {
        self.validate()?;
        let step = i64::from(self.cadence_secs) * 1000;
        let first = window.start.millis().div_euclid(step) + i64::from(window.start.millis().rem_euclid(step) != 0);
        let mut out = Vec::new();
        let mut slot = first;
        while slot * step < window.end.millis() {
            out.push((slot as u64, Timestamp(slot * step)));
            slot += 1;
        }
        Ok(out)
    }

    /// Every probe to run in `window`, in (time, endpoint) order.
    pub fn jobs(&self, endpoints: &[EndpointId], window: TimeWindow) -> Result<Vec<ProbeJob>> {
        let mut jobs = Vec::new();
        for (slot, at) in self.slots(window)? {
            let conditions = &self.conditions[(slot % self.conditions.len() as u64) as usize];
            let day = at.day();
            let prompt_index = (slot % u64::from(self.prompts_per_day)) as u32;
            for e in endpoints {
                jobs.push(ProbeJob {
                    endpoint: e.clone(),
                    conditions: conditions.clone(),
                    prompt_index,
                    ctx: ProbeContext {
                        request_time: at,
                        prompt_set_day: day,
                        max_tokens: self.max_tokens,
                        ordinal: slot,
                    },
                });
            }
        }
        Ok(jobs)
    }

    pub fn run_job(&self, client: &dyn EndpointClient, job: &ProbeJob) -> Result<ProbeRecord> {
        let prompt = probe_prompt(self.rotation_seed, job.ctx.prompt_set_day, job.prompt_index, job.conditions.input_length);
        run_probe(client, &job.endpoint, &job.conditions, &prompt, self.deadline_secs, &job.ctx)
    }

    /// Probes per endpoint per day.
    pub fn per_day(&self) -> u64 {
        (MILLIS_PER_DAY / (i64::from(self.cadence_secs.max(1)) * 1000)) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeJob {
    pub endpoint: EndpointId,
    pub conditions: ProbeConditions,
    pub prompt_index: u32,
    pub ctx: ProbeContext,
}

/// The `index`-th prompt of the rotation set for `day`, sized to
/// `input_length` tokens (4 bytes per token).
pub fn probe_prompt(rotation_seed: u64, day: i64, index: u32, input_length: u32) -> String {
    let bytes = input_length as usize * 4;
    let mut out = format!("PROBE day {day} prompt {index}:");
    let mut rng = rng_from(mix_all(&[rotation_seed, day as u64, u64::from(index)]));
    let mut block = String::new();
    while block.len() < 4096 {
        block.push_str(&token_text(rand::Rng::gen_range(&mut rng, 0..256)));
    }
    while out.len() < bytes {
        let take = (bytes - out.len()).min(block.len());
        out.push_str(&block[..take]);
    }
    out.truncate(bytes);
    out
}
