//! Scripted backends for tests, demos and offline runs.
//!
//! A script is a JSON file:
//!
//! ```json
//! {
//!   "llm":   [{"prompt": {"contains": "Conclusion: [number]"}, "response": "Conclusion: 1"}],
//!   "score": [{"text": {"pattern": "^Premise"}, "logprobs": [["a", -1.0], ["b", -3.0]]}],
//!   "nli":   [{"premise": {"contains": "alcoholic"}, "hypothesis": {}, "label": "contradiction", "confidence": 0.9}],
//!   "nli_default": "neutral"
//! }
//! ```
//!
//! Rules are tried in order and the first match wins. A matcher may combine
//! `pattern` (regex), `contains` and `equals`; an empty matcher matches
//! anything.

use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GenerationResult, LlmBackend, NliBackend, NliLabel, NliVerdict, Prompt, SamplingParams, TokenLogprob};
use crate::error::{CasaError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TextMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<String>,
}

impl TextMatch {
    pub fn contains(s: impl Into<String>) -> Self {
        TextMatch { contains: Some(s.into()), ..Default::default() }
    }

    pub fn equals(s: impl Into<String>) -> Self {
        TextMatch { equals: Some(s.into()), ..Default::default() }
    }

    pub fn pattern(s: impl Into<String>) -> Self {
        TextMatch { pattern: Some(s.into()), ..Default::default() }
    }

    pub fn any() -> Self {
        TextMatch::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRule {
    #[serde(default)]
    pub prompt: TextMatch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_tag: Option<u32>,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<(String, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRule {
    #[serde(default)]
    pub text: TextMatch,
    pub logprobs: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRule {
    #[serde(default)]
    pub premise: TextMatch,
    #[serde(default)]
    pub hypothesis: TextMatch,
    pub label: NliLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Explicit entailment/neutral/contradiction scores; overrides `confidence`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<[f64; 3]>,
}

fn default_nli_label() -> NliLabel {
    NliLabel::Neutral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub llm: Vec<LlmRule>,
    #[serde(default)]
    pub score: Vec<ScoreRule>,
    #[serde(default)]
    pub nli: Vec<NliRule>,
    #[serde(default = "default_nli_label")]
    pub nli_default: NliLabel,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript { llm: Vec::new(), score: Vec::new(), nli: Vec::new(), nli_default: NliLabel::Neutral }
    }
}

impl MockScript {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Answers every prompt containing `needle` with `response`.
    pub fn reply(mut self, needle: impl Into<String>, response: impl Into<String>) -> Self {
        self.llm.push(LlmRule {
            prompt: TextMatch::contains(needle),
            sample_tag: None,
            response: response.into(),
            logprobs: None,
        });
        self
    }

    pub fn reply_rule(mut self, rule: LlmRule) -> Self {
        self.llm.push(rule);
        self
    }

    pub fn score_text(mut self, text: TextMatch, logprobs: Vec<(String, f64)>) -> Self {
        self.score.push(ScoreRule { text, logprobs });
        self
    }

    pub fn nli(mut self, premise: TextMatch, hypothesis: TextMatch, label: NliLabel) -> Self {
        self.nli.push(NliRule { premise, hypothesis, label, confidence: Some(0.9), scores: None });
        self
    }

    pub fn nli_default(mut self, label: NliLabel) -> Self {
        self.nli_default = label;
        self
    }

    fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("script serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..12].to_string()
    }
}

#[derive(Debug)]
struct CompiledMatch {
    pattern: Option<Regex>,
    contains: Option<String>,
    equals: Option<String>,
}

impl CompiledMatch {
    fn compile(m: &TextMatch) -> Result<Self> {
        let pattern = m
            .pattern
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| CasaError::InvalidInput(format!("bad mock pattern: {e}")))?;
        Ok(CompiledMatch { pattern, contains: m.contains.clone(), equals: m.equals.clone() })
    }

    fn matches(&self, text: &str) -> bool {
        self.pattern.as_ref().is_none_or(|re| re.is_match(text))
            && self.contains.as_deref().is_none_or(|c| text.contains(c))
            && self.equals.as_deref().is_none_or(|e| text.trim() == e.trim())
    }
}

fn to_logprobs(pairs: &[(String, f64)]) -> Vec<TokenLogprob> {
    pairs.iter().map(|(t, l)| TokenLogprob { token: t.clone(), logprob: *l }).collect()
}

/// Scripted LLM. Every prompt it receives is recorded.
#[derive(Debug)]
pub struct MockLlm {
    script_id: String,
    llm: Vec<(CompiledMatch, LlmRule)>,
    score: Vec<(CompiledMatch, ScoreRule)>,
    history: Mutex<Vec<String>>,
}

impl MockLlm {
    pub fn new(script: &MockScript) -> Result<Self> {
        Ok(MockLlm {
            script_id: script.fingerprint(),
            llm: script
                .llm
                .iter()
                .map(|r| Ok((CompiledMatch::compile(&r.prompt)?, r.clone())))
                .collect::<Result<_>>()?,
            score: script
                .score
                .iter()
                .map(|r| Ok((CompiledMatch::compile(&r.text)?, r.clone())))
                .collect::<Result<_>>()?,
            history: Mutex::new(Vec::new()),
        })
    }

    /// Prompts received so far, in arrival order.
    pub fn history(&self) -> Vec<String> {
        self.history.lock().expect("history lock").clone()
    }
}

impl LlmBackend for MockLlm {
    fn id(&self) -> String {
        format!("mock:{}", self.script_id)
    }

    fn model(&self) -> String {
        "mock".into()
    }

    fn complete(&self, prompt: &Prompt, params: &SamplingParams) -> Result<GenerationResult> {
        let text = prompt.rendered();
        self.history.lock().expect("history lock").push(text.clone());
        let rule = self
            .llm
            .iter()
            .find(|(m, r)| r.sample_tag.is_none_or(|t| t == params.sample_tag) && m.matches(&text))
            .map(|(_, r)| r)
            .ok_or_else(|| CasaError::BackendRefused {
                status: 404,
                message: format!("no mock rule matches prompt: {}", text.chars().take(160).collect::<String>()),
            })?;
        let token_logprobs =
            if params.want_logprobs { rule.logprobs.as_deref().map(to_logprobs) } else { None };
        Ok(GenerationResult { text: rule.response.clone(), token_logprobs })
    }

    fn score(&self, text: &str) -> Result<Vec<TokenLogprob>> {
        if self.score.is_empty() {
            return Err(CasaError::LogprobsUnsupported);
        }
        self.history.lock().expect("history lock").push(text.to_string());
        self.score
            .iter()
            .find(|(m, _)| m.matches(text))
            .map(|(_, r)| to_logprobs(&r.logprobs))
            .ok_or_else(|| CasaError::BackendRefused {
                status: 404,
                message: format!("no mock scoring rule matches {text:?}"),
            })
    }
}

/// Scripted NLI model. Unmatched pairs are entailment when premise and
/// hypothesis are the same text, otherwise the script's default label.
#[derive(Debug)]
pub struct MockNli {
    script_id: String,
    rules: Vec<(CompiledMatch, CompiledMatch, NliRule)>,
    default: NliLabel,
    history: Mutex<Vec<(String, String)>>,
}

impl MockNli {
    pub fn new(script: &MockScript) -> Result<Self> {
        Ok(MockNli {
            script_id: script.fingerprint(),
            rules: script
                .nli
                .iter()
                .map(|r| Ok((CompiledMatch::compile(&r.premise)?, CompiledMatch::compile(&r.hypothesis)?, r.clone())))
                .collect::<Result<_>>()?,
            default: script.nli_default,
            history: Mutex::new(Vec::new()),
        })
    }

    pub fn history(&self) -> Vec<(String, String)> {
        self.history.lock().expect("history lock").clone()
    }
}

impl NliBackend for MockNli {
    fn id(&self) -> String {
        format!("mock-nli:{}", self.script_id)
    }

    fn model(&self) -> String {
        "mock".into()
    }

    fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        self.history.lock().expect("history lock").push((premise.to_string(), hypothesis.to_string()));
        if let Some((_, _, rule)) = self.rules.iter().find(|(p, h, _)| p.matches(premise) && h.matches(hypothesis)) {
            return match rule.scores {
                Some(scores) => NliVerdict::from_scores(scores),
                None => Ok(NliVerdict::with_confidence(rule.label, rule.confidence.unwrap_or(0.9))),
            };
        }
        if premise.trim() == hypothesis.trim() {
            return Ok(NliVerdict::with_confidence(NliLabel::Entailment, 0.98));
        }
        Ok(NliVerdict::with_confidence(self.default, 0.6))
    }
}
