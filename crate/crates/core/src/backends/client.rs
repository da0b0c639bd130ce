use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{cache_key, GenerationRequest, GenerationResult, LlmBackend, NliBackend, NliVerdict, ResponseCache, SamplingParams, TokenLogprob};
use crate::error::{CasaError, Result};

/// Exponential backoff on transport failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 2, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    fn run<T>(&self, stats: &CallStats, mut call: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            stats.backend_calls.fetch_add(1, Ordering::Relaxed);
            match call() {
                Err(CasaError::BackendUnavailable(_)) if attempt < self.max_retries => {
                    stats.retries.fetch_add(1, Ordering::Relaxed);
                    std::thread::sleep(self.base_delay * 2u32.saturating_pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Counting semaphore bounding in-flight backend calls.
#[derive(Debug)]
struct Gate {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct GateGuard<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Gate { limit: limit.max(1), in_flight: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().expect("gate lock");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("gate lock");
        }
        *n += 1;
        GateGuard(self)
    }
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("gate lock") -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Default)]
pub struct CallStats {
    generate: AtomicU64,
    score: AtomicU64,
    nli: AtomicU64,
    cache_hits: AtomicU64,
    backend_calls: AtomicU64,
    retries: AtomicU64,
}

/// Point-in-time copy of [`CallStats`]. Request counts include cache hits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub generate: u64,
    pub score: u64,
    pub nli: u64,
    pub cache_hits: u64,
    pub backend_calls: u64,
    pub retries: u64,
}

impl CallCounts {
    pub fn requests(&self) -> u64 {
        self.generate + self.score + self.nli
    }
}

impl CallStats {
    pub fn snapshot(&self) -> CallCounts {
        CallCounts {
            generate: self.generate.load(Ordering::Relaxed),
            score: self.score.load(Ordering::Relaxed),
            nli: self.nli.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            backend_calls: self.backend_calls.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
        }
    }
}

fn cached<T: Serialize + for<'de> Deserialize<'de>>(
    cache: Option<&ResponseCache>,
    stats: &CallStats,
    kind: &str,
    key_fields: Value,
    fetch: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let key = cache_key(&key_fields);
    if let Some(hit) = cache.and_then(|c| c.get(&key)) {
        stats.cache_hits.fetch_add(1, Ordering::Relaxed);
        return serde_json::from_value(hit).map_err(|e| CasaError::CacheCorrupt { line: 0, reason: e.to_string() });
    }
    let value = fetch()?;
    if let Some(cache) = cache {
        cache.put(&key, kind, key_fields, serde_json::to_value(&value)?)?;
    }
    Ok(value)
}

/// `exp(-mean log-probability)` over the scored tokens.
pub fn perplexity_of(tokens: &[TokenLogprob]) -> Result<f64> {
    if tokens.is_empty() {
        return Err(CasaError::LogprobsUnsupported);
    }
    let total: f64 = tokens.iter().map(|t| t.logprob).sum();
    Ok((-total / tokens.len() as f64).exp())
}

/// Shareable LLM handle: wraps prompts, caches, retries and counts calls.
#[derive(Clone)]
pub struct LlmClient {
    backend: Arc<dyn LlmBackend>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    gate: Arc<Gate>,
    stats: Arc<CallStats>,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient").field("backend", &self.backend.id()).field("retry", &self.retry).finish()
    }
}

impl LlmClient {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        LlmClient {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            gate: Arc::new(Gate::new(4)),
            stats: Arc::new(CallStats::default()),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_concurrency(mut self, limit: usize) -> Self {
        self.gate = Arc::new(Gate::new(limit));
        self
    }

    pub fn stats(&self) -> CallCounts {
        self.stats.snapshot()
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    /// Identifying fields of a generation request; their hash is the cache key.
    pub fn key_fields(&self, request: &GenerationRequest) -> Value {
        json!({
            "kind": "generate",
            "backend": self.backend.id(),
            "model": self.backend.model(),
            "prompt": request.prompt().rendered(),
            "temperature": request.temperature,
            "sample_tag": request.sample_tag,
            "want_logprobs": request.want_logprobs,
        })
    }

    pub fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult> {
        request.validate()?;
        self.stats.generate.fetch_add(1, Ordering::Relaxed);
        let prompt = request.prompt();
        let params = SamplingParams {
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            want_logprobs: request.want_logprobs,
            sample_tag: request.sample_tag,
        };
        cached(self.cache.as_deref(), &self.stats, "generate", self.key_fields(request), || {
            let _slot = self.gate.acquire();
            self.retry.run(&self.stats, || self.backend.complete(&prompt, &params))
        })
    }

    /// Token log-probabilities of `text` under the model.
    pub fn score(&self, text: &str) -> Result<Vec<TokenLogprob>> {
        self.stats.score.fetch_add(1, Ordering::Relaxed);
        let fields = json!({
            "kind": "score",
            "backend": self.backend.id(),
            "model": self.backend.model(),
            "text": text,
        });
        cached(self.cache.as_deref(), &self.stats, "score", fields, || {
            let _slot = self.gate.acquire();
            self.retry.run(&self.stats, || self.backend.score(text))
        })
    }

    pub fn perplexity(&self, text: &str) -> Result<f64> {
        perplexity_of(&self.score(text)?)
    }
}

/// Shareable NLI handle with the same caching and retry behaviour.
#[derive(Clone)]
pub struct NliClient {
    backend: Arc<dyn NliBackend>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    gate: Arc<Gate>,
    stats: Arc<CallStats>,
}

impl std::fmt::Debug for NliClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NliClient").field("backend", &self.backend.id()).finish()
    }
}

impl NliClient {
    pub fn new(backend: Arc<dyn NliBackend>) -> Self {
        NliClient {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            gate: Arc::new(Gate::new(4)),
            stats: Arc::new(CallStats::default()),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_concurrency(mut self, limit: usize) -> Self {
        self.gate = Arc::new(Gate::new(limit));
        self
    }

    pub fn stats(&self) -> CallCounts {
        self.stats.snapshot()
    }

    pub fn predict(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        self.stats.nli.fetch_add(1, Ordering::Relaxed);
        let fields = json!({
            "kind": "nli",
            "backend": self.backend.id(),
            "model": self.backend.model(),
            "premise": premise,
            "hypothesis": hypothesis,
        });
        cached(self.cache.as_deref(), &self.stats, "nli", fields, || {
            let _slot = self.gate.acquire();
            self.retry.run(&self.stats, || self.backend.predict(premise, hypothesis))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{MockLlm, MockNli, MockScript, NliLabel, Prompt};
    use crate::types::ModelFamily;
    use sha2::{Digest, Sha256};
    use std::sync::atomic::AtomicU32;

    struct Flaky {
        failures: AtomicU32,
        fail_first: u32,
    }

    impl LlmBackend for Flaky {
        fn id(&self) -> String {
            "flaky".into()
        }
        fn model(&self) -> String {
            "m".into()
        }
        fn complete(&self, _: &Prompt, _: &SamplingParams) -> Result<GenerationResult> {
            if self.failures.fetch_add(1, Ordering::SeqCst) < self.fail_first {
                return Err(CasaError::BackendUnavailable("down".into()));
            }
            Ok(GenerationResult { text: "up".into(), token_logprobs: None })
        }
    }

    fn quick_retry(n: u32) -> RetryPolicy {
        RetryPolicy { max_retries: n, base_delay: Duration::from_millis(0) }
    }

    #[test]
    fn retries_then_succeeds_or_fails() {
        let req = GenerationRequest::new(ModelFamily::Generic, "i", "x");
        let ok = LlmClient::new(Arc::new(Flaky { failures: AtomicU32::new(0), fail_first: 2 })).with_retry(quick_retry(2));
        assert_eq!(ok.generate(&req).unwrap().text, "up");
        assert_eq!(ok.stats().retries, 2);

        let bad = LlmClient::new(Arc::new(Flaky { failures: AtomicU32::new(0), fail_first: 3 })).with_retry(quick_retry(2));
        assert!(matches!(bad.generate(&req), Err(CasaError::BackendUnavailable(_))));
        assert_eq!(bad.stats().backend_calls, 3);
    }

    #[test]
    fn cache_hit_skips_backend() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ResponseCache::open(dir.path().join("c.jsonl")).unwrap());
        let mock = Arc::new(MockLlm::new(&MockScript::default().reply("", "hello")).unwrap());
        let client = LlmClient::new(mock.clone()).with_cache(cache.clone());
        let req = GenerationRequest::new(ModelFamily::Generic, "i", "x");
        let a = client.generate(&req).unwrap();
        let b = client.generate(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(mock.history().len(), 1);
        assert_eq!(client.stats().cache_hits, 1);

        // sample tags get their own entries
        client.generate(&req.clone().with_sample_tag(1)).unwrap();
        assert_eq!(mock.history().len(), 2);
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn cache_key_is_hash_of_request_tuple() {
        let mock = Arc::new(MockLlm::new(&MockScript::default()).unwrap());
        let client = LlmClient::new(mock.clone());
        let req = GenerationRequest::new(ModelFamily::TuluWrap, "i", "x").with_temperature(0.7).with_sample_tag(1);
        // oracle: sorted-key JSON of the tuple, hashed independently
        let expected_json = format!(
            "{{\"backend\":{},\"kind\":\"generate\",\"model\":\"mock\",\"prompt\":{},\"sample_tag\":1,\"temperature\":0.7,\"want_logprobs\":false}}",
            serde_json::to_string(&mock.id()).unwrap(),
            serde_json::to_string("<|user|>\n### Instruction:\ni\n### Input:\nx\n### Response:\n\n<|assistant|>\n").unwrap()
        );
        let expected = hex::encode(Sha256::digest(expected_json.as_bytes()));
        assert_eq!(cache_key(&client.key_fields(&req)), expected);
        assert_ne!(cache_key(&client.key_fields(&req.clone().with_sample_tag(0))), expected);
    }

    #[test]
    fn perplexity_values() {
        let lp = |v: &[f64]| v.iter().map(|&l| TokenLogprob { token: "t".into(), logprob: l }).collect::<Vec<_>>();
        assert!((perplexity_of(&lp(&[0.0, 0.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        let ln2 = std::f64::consts::LN_2;
        assert!((perplexity_of(&lp(&[-ln2, -ln2])).unwrap() - 2.0).abs() < 1e-12);
        assert!((perplexity_of(&lp(&[-1.0, -3.0])).unwrap() - 2f64.exp()).abs() < 1e-12);
        assert!(perplexity_of(&[]).is_err());
    }

    #[test]
    fn perplexity_requires_scoring_support() {
        let client = LlmClient::new(Arc::new(MockLlm::new(&MockScript::default()).unwrap()));
        assert!(matches!(client.perplexity("abc"), Err(CasaError::LogprobsUnsupported)));
    }

    #[test]
    fn nli_reflexive_on_mock_and_cached() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(ResponseCache::open(dir.path().join("c.jsonl")).unwrap());
        let mock = Arc::new(MockNli::new(&MockScript::default()).unwrap());
        let nli = NliClient::new(mock.clone()).with_cache(cache);
        assert_eq!(nli.predict("t", "t").unwrap().label, NliLabel::Entailment);
        nli.predict("t", "t").unwrap();
        assert_eq!(mock.history().len(), 1);
    }

    #[test]
    fn gate_bounds_concurrency() {
        struct Slow {
            current: AtomicU32,
            peak: AtomicU32,
        }
        impl LlmBackend for Slow {
            fn id(&self) -> String {
                "slow".into()
            }
            fn model(&self) -> String {
                "m".into()
            }
            fn complete(&self, _: &Prompt, _: &SamplingParams) -> Result<GenerationResult> {
                let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(10));
                self.current.fetch_sub(1, Ordering::SeqCst);
                Ok(GenerationResult { text: String::new(), token_logprobs: None })
            }
        }
        let slow = Arc::new(Slow { current: AtomicU32::new(0), peak: AtomicU32::new(0) });
        let client = LlmClient::new(slow.clone()).with_max_concurrency(2);
        std::thread::scope(|s| {
            for i in 0..8 {
                let client = &client;
                s.spawn(move || {
                    client
                        .generate(&GenerationRequest::new(ModelFamily::Generic, "i", i.to_string()))
                        .unwrap()
                });
            }
        });
        assert!(slow.peak.load(Ordering::SeqCst) <= 2);
    }
}
