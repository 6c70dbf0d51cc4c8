//! The streaming endpoint-client boundary.
//!
//! Probe, eval and fingerprint harnesses only talk to [`EndpointClient`].
//! The simulated fleet implements it; a live provider client would too.
//! Event timestamps are seconds elapsed since the request was issued, taken
//! from the stream itself, so harness timing never reads a host clock.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::registry::EndpointId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Number of top log-probabilities to attach to each token; 0 for none.
    pub logprobs_top_k: u32,
    /// Caller-assigned sequence number; part of the determinism key.
    pub ordinal: u64,
}

impl StreamRequest {
    pub fn new(prompt: String, max_tokens: u32) -> Self {
        StreamRequest {
            prompt,
            max_tokens,
            temperature: 0.0,
            logprobs_top_k: 0,
            ordinal: 0,
        }
    }

    pub fn with_logprobs(mut self, top_k: u32) -> Self {
        self.logprobs_top_k = top_k;
        self
    }

    pub fn with_ordinal(mut self, ordinal: u64) -> Self {
        self.ordinal = ordinal;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Thinking,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenChunk {
    pub token: u32,
    pub text: String,
    /// `(token, natural-log probability)` pairs, most likely first.
    pub top_logprobs: Vec<(u32, f64)>,
    pub elapsed: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StreamEvent {
    Token(TokenChunk),
    End { elapsed: f64, reason: EndReason },
}

impl StreamEvent {
    pub fn elapsed(&self) -> f64 {
        match self {
            StreamEvent::Token(t) => t.elapsed,
            StreamEvent::End { elapsed, .. } => *elapsed,
        }
    }
}

pub type EventStream<'a> = Box<dyn Iterator<Item = StreamEvent> + Send + 'a>;

pub trait EndpointClient: Send + Sync {
    /// Opens a stream. Errors here mean the request could not be issued at
    /// all (unknown endpoint, unsupported parameters); failures during the
    /// stream are reported through its terminal event.
    fn open_stream(&self, endpoint: &EndpointId, request: &StreamRequest) -> Result<EventStream<'_>>;
}

/// Whitespace-agnostic token count estimate: one token per four bytes.
pub fn approx_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}
