//! HTTP transports.
//!
//! The LLM client speaks the common open completion API: `POST
//! {base}/completions` for text prompts and `POST {base}/chat/completions` for
//! chats. Scoring uses `echo` with `logprobs` so the server returns the
//! log-probabilities of the prompt tokens. The NLI client posts
//! `{premise, hypothesis}` and expects `{label, scores}`.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{GenerationResult, LlmBackend, NliBackend, NliLabel, NliVerdict, Prompt, Role, SamplingParams, TokenLogprob};
use crate::error::{CasaError, Result};

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

fn post_json(agent: &ureq::Agent, url: &str, body: &Value) -> Result<Value> {
    let mut response = agent.post(url).send_json(body).map_err(|e| CasaError::BackendUnavailable(format!("{url}: {e}")))?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| CasaError::BackendUnavailable(format!("{url}: reading body: {e}")))?;
    if !(200..300).contains(&status) {
        return Err(CasaError::BackendRefused { status, message: text });
    }
    serde_json::from_str(&text).map_err(|e| CasaError::BackendRefused { status, message: format!("bad JSON body: {e}") })
}

#[derive(Debug, Clone)]
pub struct HttpLlmBackend {
    base_url: String,
    model: String,
    agent: ureq::Agent,
}

impl HttpLlmBackend {
    /// `base_url` is the API root, e.g. `http://localhost:8000/v1`.
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, timeout: Duration) -> Self {
        HttpLlmBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            agent: agent(timeout),
        }
    }
}

#[derive(Debug, Deserialize)]
struct CompletionLogprobs {
    #[serde(default)]
    tokens: Vec<String>,
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    text_offset: Vec<usize>,
}

fn completion_logprobs(choice: &Value) -> Option<CompletionLogprobs> {
    choice.get("logprobs").filter(|v| !v.is_null()).and_then(|v| serde_json::from_value(v.clone()).ok())
}

fn refused(message: impl Into<String>) -> CasaError {
    CasaError::BackendRefused { status: 200, message: message.into() }
}

impl LlmBackend for HttpLlmBackend {
    fn id(&self) -> String {
        format!("http:{}", self.base_url)
    }

    fn model(&self) -> String {
        self.model.clone()
    }

    fn complete(&self, prompt: &Prompt, params: &SamplingParams) -> Result<GenerationResult> {
        match prompt {
            Prompt::Text(text) => {
                let mut body = json!({
                    "model": self.model,
                    "prompt": text,
                    "temperature": params.temperature,
                    "max_tokens": params.max_tokens,
                });
                if params.want_logprobs {
                    body["logprobs"] = json!(1);
                }
                let resp = post_json(&self.agent, &format!("{}/completions", self.base_url), &body)?;
                let choice = &resp["choices"][0];
                let text = choice["text"].as_str().ok_or_else(|| refused("completion without choices[0].text"))?;
                let token_logprobs = if params.want_logprobs {
                    completion_logprobs(choice).map(|lp| {
                        lp.tokens
                            .into_iter()
                            .zip(lp.token_logprobs)
                            .filter_map(|(token, l)| l.map(|logprob| TokenLogprob { token, logprob }))
                            .collect()
                    })
                } else {
                    None
                };
                Ok(GenerationResult { text: text.to_string(), token_logprobs })
            }
            Prompt::Chat(messages) => {
                let messages: Vec<Value> = messages
                    .iter()
                    .map(|m| {
                        let role = match m.role {
                            Role::System => "system",
                            Role::User => "user",
                            Role::Assistant => "assistant",
                        };
                        json!({"role": role, "content": m.content})
                    })
                    .collect();
                let body = json!({
                    "model": self.model,
                    "messages": messages,
                    "temperature": params.temperature,
                    "max_tokens": params.max_tokens,
                    "logprobs": params.want_logprobs,
                });
                let resp = post_json(&self.agent, &format!("{}/chat/completions", self.base_url), &body)?;
                let choice = &resp["choices"][0];
                let text = choice["message"]["content"]
                    .as_str()
                    .ok_or_else(|| refused("chat completion without choices[0].message.content"))?;
                let token_logprobs = if params.want_logprobs {
                    choice["logprobs"]["content"].as_array().map(|items| {
                        items
                            .iter()
                            .filter_map(|it| {
                                Some(TokenLogprob {
                                    token: it["token"].as_str()?.to_string(),
                                    logprob: it["logprob"].as_f64()?,
                                })
                            })
                            .collect()
                    })
                } else {
                    None
                };
                Ok(GenerationResult { text: text.to_string(), token_logprobs })
            }
        }
    }

    fn score(&self, text: &str) -> Result<Vec<TokenLogprob>> {
        let body = json!({
            "model": self.model,
            "prompt": text,
            "temperature": 0.0,
            "max_tokens": 1,
            "echo": true,
            "logprobs": 1,
        });
        let resp = post_json(&self.agent, &format!("{}/completions", self.base_url), &body)?;
        let lp = completion_logprobs(&resp["choices"][0]).ok_or(CasaError::LogprobsUnsupported)?;
        // Keep prompt tokens only; the first has no conditional probability.
        let n_prompt = if lp.text_offset.len() == lp.tokens.len() {
            lp.text_offset.iter().take_while(|&&off| off < text.len()).count()
        } else {
            lp.tokens.len().saturating_sub(1)
        };
        let out: Vec<TokenLogprob> = lp
            .tokens
            .into_iter()
            .zip(lp.token_logprobs)
            .take(n_prompt)
            .filter_map(|(token, l)| l.map(|logprob| TokenLogprob { token, logprob }))
            .collect();
        if out.is_empty() {
            return Err(CasaError::LogprobsUnsupported);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct HttpNliBackend {
    url: String,
    agent: ureq::Agent,
}

impl HttpNliBackend {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpNliBackend { url: url.into(), agent: agent(timeout) }
    }
}

#[derive(Debug, Deserialize)]
struct NliResponse {
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    scores: Option<BTreeMap<String, f64>>,
}

impl NliBackend for HttpNliBackend {
    fn id(&self) -> String {
        format!("http-nli:{}", self.url)
    }

    fn model(&self) -> String {
        "remote".into()
    }

    fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        let resp = post_json(&self.agent, &self.url, &json!({"premise": premise, "hypothesis": hypothesis}))?;
        let parsed: NliResponse = serde_json::from_value(resp).map_err(|e| refused(format!("bad NLI body: {e}")))?;
        match (parsed.scores, parsed.label) {
            (Some(scores), _) => NliVerdict::from_score_map(&scores),
            (None, Some(label)) => {
                let label = NliLabel::parse(&label).ok_or_else(|| refused(format!("unknown NLI label {label:?}")))?;
                Ok(NliVerdict::with_confidence(label, 1.0))
            }
            (None, None) => Err(refused("NLI response has neither label nor scores")),
        }
    }
}
