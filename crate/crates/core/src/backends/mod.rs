//! LLM generation and NLI classification backends.
//!
//! Backends are thin transports. [`LlmClient`] and [`NliClient`] add prompt
//! wrapping, caching, retries, a concurrency cap and call accounting on top.

mod cache;
mod client;
mod http;
mod mock;
mod prompt;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CasaError, Result};
use crate::types::ModelFamily;

pub use cache::{cache_key, CacheStats, ResponseCache};
pub use client::{perplexity_of, CallCounts, CallStats, LlmClient, NliClient, RetryPolicy};
pub use http::{HttpLlmBackend, HttpNliBackend};
pub use mock::{LlmRule, MockLlm, MockNli, MockScript, NliRule, ScoreRule, TextMatch};
pub use prompt::{envelope, render_body, render_chat, wrap_prompt, ChatMessage, Role, Shot, LLAMA2_SYSTEM_PROMPT};

/// One completion request, before prompt wrapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub instruction: String,
    pub input: String,
    /// Worked examples rendered between instruction and input.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shots: Vec<Shot>,
    /// When set, the request is a chat and `instruction`/`input` are ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub messages: Option<Vec<ChatMessage>>,
    pub model_family: ModelFamily,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Distinguishes repeated samples of an identical prompt.
    pub sample_tag: u32,
    pub want_logprobs: bool,
}

impl GenerationRequest {
    pub fn new(family: ModelFamily, instruction: impl Into<String>, input: impl Into<String>) -> Self {
        GenerationRequest {
            instruction: instruction.into(),
            input: input.into(),
            shots: Vec::new(),
            messages: None,
            model_family: family,
            temperature: 0.0,
            max_tokens: 512,
            sample_tag: 0,
            want_logprobs: false,
        }
    }

    pub fn chat(messages: Vec<ChatMessage>) -> Self {
        GenerationRequest { messages: Some(messages), ..GenerationRequest::new(ModelFamily::Generic, "", "") }
    }

    pub fn with_shots(mut self, shots: Vec<Shot>) -> Self {
        self.shots = shots;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_sample_tag(mut self, tag: u32) -> Self {
        self.sample_tag = tag;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(CasaError::InvalidInput("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(CasaError::InvalidInput("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// The prompt exactly as sent to the backend.
    pub fn prompt(&self) -> Prompt {
        match &self.messages {
            Some(messages) => Prompt::Chat(messages.clone()),
            None => Prompt::Text(envelope(self.model_family, &render_body(&self.instruction, &self.shots, &self.input))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prompt {
    Text(String),
    Chat(Vec<ChatMessage>),
}

impl Prompt {
    /// Single-string rendering; chats are flattened with role labels.
    pub fn rendered(&self) -> String {
        match self {
            Prompt::Text(t) => t.clone(),
            Prompt::Chat(m) => render_chat(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<TokenLogprob>>,
}

/// Decoding parameters forwarded to the transport.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub want_logprobs: bool,
    pub sample_tag: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction];

    pub fn as_str(self) -> &'static str {
        match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Neutral => "neutral",
            NliLabel::Contradiction => "contradiction",
        }
    }

    pub fn parse(s: &str) -> Option<NliLabel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "entails" | "entailed" => Some(NliLabel::Entailment),
            "neutral" => Some(NliLabel::Neutral),
            "contradiction" | "contradicts" => Some(NliLabel::Contradiction),
            _ => None,
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Three-way NLI prediction. `label` is always the argmax of `scores`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    pub scores: BTreeMap<String, f64>,
}

impl NliVerdict {
    /// Builds a verdict from scores in entailment/neutral/contradiction order.
    /// Scores are normalized to sum to one; ties go to the earlier label.
    pub fn from_scores(scores: [f64; 3]) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(CasaError::InvalidInput(format!("invalid NLI scores {scores:?}")));
        }
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return Err(CasaError::InvalidInput("NLI scores sum to zero".into()));
        }
        let mut best = 0;
        for i in 1..3 {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        Ok(NliVerdict {
            label: NliLabel::ALL[best],
            scores: NliLabel::ALL.iter().zip(scores).map(|(l, s)| (l.as_str().to_string(), s / total)).collect(),
        })
    }

    /// `label` gets `confidence`; the rest is split evenly between the others.
    pub fn with_confidence(label: NliLabel, confidence: f64) -> Self {
        let confidence = confidence.clamp(1.0 / 3.0 + 1e-9, 1.0);
        let rest = (1.0 - confidence) / 2.0;
        let scores = NliLabel::ALL.map(|l| if l == label { confidence } else { rest });
        NliVerdict::from_scores(scores).expect("valid scores")
    }

    pub fn from_score_map(map: &BTreeMap<String, f64>) -> Result<Self> {
        let mut scores = [0.0; 3];
        for (k, v) in map {
            let label = NliLabel::parse(k)
                .ok_or_else(|| CasaError::InvalidInput(format!("unknown NLI label {k:?}")))?;
            scores[label as usize] = *v;
        }
        NliVerdict::from_scores(scores)
    }
}

pub trait LlmBackend: Send + Sync {
    /// Identifies the backend instance in cache keys.
    fn id(&self) -> String;
    fn model(&self) -> String;
    fn complete(&self, prompt: &Prompt, params: &SamplingParams) -> Result<GenerationResult>;
    /// Per-token log-probabilities of `text` itself.
    fn score(&self, _text: &str) -> Result<Vec<TokenLogprob>> {
        Err(CasaError::LogprobsUnsupported)
    }
}

pub trait NliBackend: Send + Sync {
    fn id(&self) -> String;
    fn model(&self) -> String;
    fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_label() {
        let v = NliVerdict::from_scores([0.2, 0.5, 0.3]).unwrap();
        assert_eq!(v.label, NliLabel::Neutral);
        let total: f64 = v.scores.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn confidence_spreads_remainder() {
        let v = NliVerdict::with_confidence(NliLabel::Contradiction, 0.9);
        assert_eq!(v.label, NliLabel::Contradiction);
        assert!((v.scores["contradiction"] - 0.9).abs() < 1e-12);
        assert!((v.scores["neutral"] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_scores() {
        assert!(NliVerdict::from_scores([0.0, 0.0, 0.0]).is_err());
        assert!(NliVerdict::from_scores([f64::NAN, 1.0, 0.0]).is_err());
    }

    #[test]
    fn request_validation() {
        let r = GenerationRequest::new(ModelFamily::Generic, "i", "x");
        assert!(r.validate().is_ok());
        assert!(r.clone().with_temperature(-1.0).validate().is_err());
        assert!(r.with_max_tokens(0).validate().is_err());
    }
}
