//! Service and CLI configuration: a TOML file, environment overrides, and the
//! backend clients built from them.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use casa_core::backends::{
    GenerationResult, HttpLlmBackend, HttpNliBackend, LlmBackend, LlmClient, MockLlm, MockNli, MockScript, NliBackend,
    NliClient, NliVerdict, Prompt, ResponseCache, SamplingParams,
};
use casa_core::{CasaError, ModelFamily, PipelineConfig, Variant};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error(transparent)]
    Casa(#[from] CasaError),
}

/// Keys accepted in the TOML config file. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub llm_url: Option<String>,
    pub llm_model: String,
    pub model_family: ModelFamily,
    pub nli_url: Option<String>,
    pub cache_path: Option<PathBuf>,
    pub n: usize,
    pub variant: Variant,
    pub temperature: f64,
    pub seed: u64,
    pub max_concurrency: usize,
    /// Per-request limit for synchronous service calls, and the HTTP client timeout.
    pub timeout_s: u64,
    /// Scripted backends instead of HTTP ones.
    pub mock: Option<PathBuf>,
    pub runs_dir: PathBuf,
    pub data_dir: PathBuf,
    pub bind: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        ServiceConfig {
            llm_url: None,
            llm_model: String::new(),
            model_family: p.model_family,
            nli_url: None,
            cache_path: None,
            n: p.n,
            variant: p.variant,
            temperature: p.sampling_temperature,
            seed: p.seed,
            max_concurrency: p.max_concurrency,
            timeout_s: 300,
            mock: None,
            runs_dir: PathBuf::from("runs"),
            data_dir: PathBuf::from("data"),
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    /// Reads `path` when given, otherwise starts from defaults; then applies
    /// `CASA_LLM_URL`, `CASA_LLM_MODEL`, `CASA_NLI_URL` and `CASA_CACHE_PATH`.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?;
                Self::from_toml(&text, p)?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        Ok(config)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get("CASA_LLM_URL") {
            self.llm_url = Some(v);
        }
        if let Some(v) = get("CASA_LLM_MODEL") {
            self.llm_model = v;
        }
        if let Some(v) = get("CASA_NLI_URL") {
            self.nli_url = Some(v);
        }
        if let Some(v) = get("CASA_CACHE_PATH") {
            self.cache_path = Some(v.into());
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, CasaError> {
        let config = PipelineConfig {
            n: self.n,
            variant: self.variant,
            model_family: self.model_family,
            sampling_temperature: self.temperature,
            seed: self.seed,
            max_concurrency: self.max_concurrency,
            ..PipelineConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_s)
    }

    pub fn open_cache(&self) -> Result<Option<Arc<ResponseCache>>, CasaError> {
        self.cache_path.as_ref().map(|p| ResponseCache::open(p).map(Arc::new)).transpose()
    }

    /// Clients for the configured backends, wrapped in the response cache when
    /// one is configured. Without a mock script or URL every uncached call
    /// fails as unavailable, so a warm cache can still answer.
    pub fn backends(&self) -> Result<Backends, CasaError> {
        let (llm, nli): (Arc<dyn LlmBackend>, Arc<dyn NliBackend>) = match &self.mock {
            Some(path) => {
                let script = MockScript::from_file(path)?;
                (Arc::new(MockLlm::new(&script)?), Arc::new(MockNli::new(&script)?))
            }
            None => {
                let llm: Arc<dyn LlmBackend> = match &self.llm_url {
                    Some(url) => Arc::new(HttpLlmBackend::new(url.clone(), self.llm_model.clone(), self.timeout())),
                    None => Arc::new(Offline),
                };
                let nli: Arc<dyn NliBackend> = match &self.nli_url {
                    Some(url) => Arc::new(HttpNliBackend::new(url.clone(), self.timeout())),
                    None => Arc::new(Offline),
                };
                (llm, nli)
            }
        };
        let cache = self.open_cache()?;
        let mut llm = LlmClient::new(llm).with_max_concurrency(self.max_concurrency);
        let mut nli = NliClient::new(nli).with_max_concurrency(self.max_concurrency);
        if let Some(c) = &cache {
            llm = llm.with_cache(c.clone());
            nli = nli.with_cache(c.clone());
        }
        Ok(Backends { llm, nli, cache })
    }
}

#[derive(Clone)]
pub struct Backends {
    pub llm: LlmClient,
    pub nli: NliClient,
    pub cache: Option<Arc<ResponseCache>>,
}

/// Stand-in when no backend is configured.
#[derive(Debug)]
struct Offline;

const OFFLINE: &str = "no backend configured; set llm_url/nli_url or use --mock";

impl LlmBackend for Offline {
    fn id(&self) -> String {
        "offline".into()
    }

    fn model(&self) -> String {
        String::new()
    }

    fn complete(&self, _prompt: &Prompt, _params: &SamplingParams) -> casa_core::Result<GenerationResult> {
        Err(CasaError::BackendUnavailable(OFFLINE.into()))
    }
}

impl NliBackend for Offline {
    fn id(&self) -> String {
        "offline".into()
    }

    fn model(&self) -> String {
        String::new()
    }

    fn predict(&self, _premise: &str, _hypothesis: &str) -> casa_core::Result<NliVerdict> {
        Err(CasaError::BackendUnavailable(OFFLINE.into()))
    }
}
