//! Chat-completion backends.
//!
//! [`ChatBackend`] is the single seam every pipeline stage talks through.
//! Two implementations ship: an OpenAI-compatible HTTP client and a scripted
//! mock that answers from a JSON-lines fixture. Either can be wrapped in a
//! [`CachedBackend`] keyed by [`request_key`].

mod cache;
mod http;
mod mock;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::Specialty;

pub use cache::{CachedBackend, ResponseCache};
pub use http::HttpBackend;
pub use mock::{MockScript, ScriptEntry, ScriptedBackend};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("endpoint unreachable after {attempts} attempt(s): {message}")]
    EndpointUnreachable { attempts: u32, message: String },
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("mock script has no entry for request {key} (stage {stage}): {excerpt}")]
    ScriptMiss { key: String, stage: Stage, excerpt: String },
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("invalid generation parameters: {0}")]
    Params(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Pipeline stage a request belongs to. Fixes the sampling temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SpecialistAnswer,
    CurationLetter,
    VerifyQuestions,
    VerifyIndependent,
    VerifyReference,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::SpecialistAnswer,
        Stage::CurationLetter,
        Stage::VerifyQuestions,
        Stage::VerifyIndependent,
        Stage::VerifyReference,
    ];

    pub fn temperature(self) -> f64 {
        match self {
            Stage::SpecialistAnswer | Stage::CurationLetter => 0.0,
            Stage::VerifyQuestions => 0.3,
            Stage::VerifyIndependent => 0.4,
            Stage::VerifyReference => 0.2,
        }
    }

    pub fn default_max_new_tokens(self) -> u32 {
        match self {
            Stage::SpecialistAnswer => 1024,
            Stage::CurationLetter => 8,
            Stage::VerifyQuestions => 512,
            Stage::VerifyIndependent | Stage::VerifyReference => 768,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Stage::SpecialistAnswer => "specialist_answer",
            Stage::CurationLetter => "curation_letter",
            Stage::VerifyQuestions => "verify_questions",
            Stage::VerifyIndependent => "verify_independent",
            Stage::VerifyReference => "verify_reference",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Decoding settings for one request.
///
/// The temperature is bound to the stage; constructing any other
/// combination fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    temperature: f64,
    seed: Option<u64>,
    max_new_tokens: u32,
    stage: Stage,
}

impl GenerationParams {
    pub fn for_stage(stage: Stage, seed: Option<u64>) -> Self {
        GenerationParams {
            temperature: stage.temperature(),
            seed,
            max_new_tokens: stage.default_max_new_tokens(),
            stage,
        }
    }

    pub fn new(stage: Stage, temperature: f64, seed: Option<u64>, max_new_tokens: u32) -> Result<Self, BackendError> {
        if temperature != stage.temperature() {
            return Err(BackendError::Params(format!(
                "stage {stage} requires temperature {}, got {temperature}",
                stage.temperature()
            )));
        }
        if max_new_tokens == 0 {
            return Err(BackendError::Params("max_new_tokens must be positive".into()));
        }
        let max_new_tokens = if stage == Stage::CurationLetter { 8 } else { max_new_tokens };
        Ok(GenerationParams { temperature, seed, max_new_tokens, stage })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn max_new_tokens(&self) -> u32 {
        self.max_new_tokens
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub params: GenerationParams,
}

impl ChatRequest {
    pub fn new(system_prompt: String, user_prompt: String, params: GenerationParams) -> Result<Self, BackendError> {
        if system_prompt.trim().is_empty() || user_prompt.trim().is_empty() {
            return Err(BackendError::Params("prompts must be non-empty".into()));
        }
        Ok(ChatRequest { system_prompt, user_prompt, params })
    }

    pub fn stage(&self) -> Stage {
        self.params.stage
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpOpenaiCompatible,
    ScriptedMock,
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Initial retry delay; doubles on each attempt.
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: u64,
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl BackendConfig {
    pub fn http(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::HttpOpenaiCompatible,
            base_url: Some(base_url.into()),
            model_name: model_name.into(),
            api_key_env: default_api_key_env(),
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            retry_backoff_ms: default_backoff(),
            script_path: None,
            cache_path: None,
            max_in_flight: default_in_flight(),
        }
    }

    pub fn mock(script_path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::ScriptedMock,
            base_url: None,
            model_name: "scripted-mock".into(),
            script_path: Some(script_path.into()),
            ..BackendConfig::http("", "")
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.kind {
            BackendKind::HttpOpenaiCompatible => {
                if self.base_url.as_deref().map_or(true, |u| u.trim().is_empty()) {
                    return Err(BackendError::Config("HTTP backend requires base_url".into()));
                }
                if self.timeout_s == 0 {
                    return Err(BackendError::Config("timeout_s must be positive".into()));
                }
            }
            BackendKind::ScriptedMock => {
                if self.script_path.is_none() {
                    return Err(BackendError::Config("scripted mock requires script_path".into()));
                }
            }
        }
        Ok(())
    }

    /// Resolves relative file paths against `base` (the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.script_path, &mut self.cache_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Anything that turns a chat request into a completion.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
}

/// Builds the backend described by `config`, wrapped in the on-disk cache
/// when `cache_path` is set.
pub fn connect(config: &BackendConfig) -> Result<Arc<dyn ChatBackend>, BackendError> {
    config.validate()?;
    let inner: Arc<dyn ChatBackend> = match config.kind {
        BackendKind::HttpOpenaiCompatible => Arc::new(HttpBackend::new(config)?),
        BackendKind::ScriptedMock => {
            let path = config.script_path.as_ref().expect("validated");
            Arc::new(ScriptedBackend::new(MockScript::load(path)?))
        }
    };
    match &config.cache_path {
        Some(path) => Ok(Arc::new(CachedBackend::new(inner, ResponseCache::open(path)?))),
        None => Ok(inner),
    }
}

/// One-shot completion against a freshly connected backend.
pub fn complete(request: &ChatRequest, config: &BackendConfig) -> Result<Completion, BackendError> {
    connect(config)?.complete(request)
}

/// Content hash of a request, as 64 lowercase hex characters.
///
/// Covers the prompts, stage, temperature and seed. Fields are
/// length-prefixed so no two distinct requests share an encoding.
pub fn request_key(request: &ChatRequest) -> String {
    let mut h = Sha256::new();
    let mut field = |bytes: &[u8]| {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    field(request.system_prompt.as_bytes());
    field(request.user_prompt.as_bytes());
    field(request.params.stage.tag().as_bytes());
    field(&request.params.temperature.to_bits().to_le_bytes());
    match request.params.seed {
        Some(seed) => {
            field(&[1]);
            field(&seed.to_le_bytes());
        }
        None => field(&[0]),
    }
    hex::encode(h.finalize())
}

/// Deterministic per-(question, specialist, stage) sampling seed.
///
/// First eight bytes (big-endian) of SHA-256 over
/// `question_id 0x1f specialty 0x1f stage`.
pub fn derive_seed(question_id: &str, specialty: Specialty, stage: Stage) -> u64 {
    let mut h = Sha256::new();
    h.update(question_id.as_bytes());
    h.update([0x1f]);
    h.update(specialty.tag().as_bytes());
    h.update([0x1f]);
    h.update(stage.tag().as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(bytes)
}

/// Counts the calls passing through to an inner backend.
pub struct CountingBackend<B> {
    inner: B,
    calls: AtomicU32,
}

impl<B: ChatBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend { inner, calls: AtomicU32::new(0) }
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: ChatBackend> ChatBackend for CountingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

pub(crate) fn word_count(text: &str) -> u32 {
    text.split_whitespace().count() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn req(seed: Option<u64>) -> ChatRequest {
        ChatRequest::new(
            "sys".into(),
            "user".into(),
            GenerationParams::for_stage(Stage::VerifyQuestions, seed),
        )
        .unwrap()
    }

    #[test]
    fn stage_temperatures() {
        assert_eq!(Stage::SpecialistAnswer.temperature(), 0.0);
        assert_eq!(Stage::VerifyQuestions.temperature(), 0.3);
        assert_eq!(Stage::VerifyIndependent.temperature(), 0.4);
        assert_eq!(Stage::VerifyReference.temperature(), 0.2);
        assert_eq!(Stage::CurationLetter.temperature(), 0.0);
    }

    #[test]
    fn wrong_temperature_rejected() {
        assert!(GenerationParams::new(Stage::SpecialistAnswer, 0.7, None, 100).is_err());
        assert!(GenerationParams::new(Stage::SpecialistAnswer, 0.0, None, 100).is_ok());
    }

    #[test]
    fn curation_forces_eight_tokens() {
        let p = GenerationParams::new(Stage::CurationLetter, 0.0, None, 512).unwrap();
        assert_eq!(p.max_new_tokens(), 8);
        assert_eq!(GenerationParams::for_stage(Stage::CurationLetter, None).max_new_tokens(), 8);
    }

    #[test]
    fn empty_prompt_rejected() {
        let p = GenerationParams::for_stage(Stage::SpecialistAnswer, None);
        assert!(ChatRequest::new(" ".into(), "u".into(), p).is_err());
    }

    #[test]
    fn key_is_stable_and_seed_sensitive() {
        let k = request_key(&req(Some(1)));
        assert_eq!(k.len(), 64);
        assert!(k.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(k, request_key(&req(Some(1))));
        assert_ne!(k, request_key(&req(Some(2))));
        assert_ne!(k, request_key(&req(None)));
    }

    #[test]
    fn key_separates_prompt_boundaries() {
        let p = GenerationParams::for_stage(Stage::SpecialistAnswer, None);
        let a = ChatRequest::new("ab".into(), "c".into(), p).unwrap();
        let b = ChatRequest::new("a".into(), "bc".into(), p).unwrap();
        assert_ne!(request_key(&a), request_key(&b));
    }

    #[test]
    fn no_key_collisions_over_random_requests() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut seen_req = HashSet::new();
        let mut seen_key = HashSet::new();
        while seen_req.len() < 10_000 {
            let stage = Stage::ALL[rng.random_range(0..5)];
            let sys: String = (0..rng.random_range(1..6)).map(|_| rng.random_range('a'..='e')).collect();
            let user: String = (0..rng.random_range(1..6)).map(|_| rng.random_range('a'..='e')).collect();
            let seed = if rng.random_bool(0.2) { None } else { Some(rng.random_range(0..50u64)) };
            if !seen_req.insert((sys.clone(), user.clone(), stage, seed)) {
                continue;
            }
            let r = ChatRequest::new(sys, user, GenerationParams::for_stage(stage, seed)).unwrap();
            assert!(seen_key.insert(request_key(&r)), "collision");
        }
    }

    #[test]
    fn seeds_are_deterministic_and_stage_separated() {
        let a = derive_seed("q1", Specialty::Respiratory, Stage::VerifyQuestions);
        assert_eq!(a, derive_seed("q1", Specialty::Respiratory, Stage::VerifyQuestions));
        assert_ne!(a, derive_seed("q1", Specialty::Respiratory, Stage::VerifyIndependent));
    }

    #[test]
    fn seed_cross_product_distinct() {
        let mut seen = HashSet::new();
        for i in 0..100 {
            let id = format!("q{i}");
            for sp in Specialty::ALL {
                for st in Stage::ALL {
                    assert!(seen.insert(derive_seed(&id, sp, st)));
                }
            }
        }
        assert_eq!(seen.len(), 2000);
    }

    #[test]
    fn seed_is_platform_independent() {
        // Frozen from the first eight digest bytes; guards against encoding drift.
        let expected = {
            let digest = Sha256::digest(b"q1\x1frespiratory\x1fverify_questions");
            u64::from_be_bytes(digest[..8].try_into().unwrap())
        };
        assert_eq!(derive_seed("q1", Specialty::Respiratory, Stage::VerifyQuestions), expected);
    }

    #[test]
    fn config_validation() {
        assert!(BackendConfig::http("", "m").validate().is_err());
        assert!(BackendConfig::http("http://x", "m").validate().is_ok());
        let mut mock = BackendConfig::mock("s.jsonl");
        assert!(mock.validate().is_ok());
        mock.script_path = None;
        assert!(mock.validate().is_err());
    }

    #[test]
    fn config_parses_from_toml() {
        let cfg: BackendConfig = toml::from_str(
            r#"
            kind = "http_openai_compatible"
            base_url = "http://localhost:8000/v1"
            model_name = "qwen"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.max_retries, 3);
        assert_eq!(cfg.api_key_env, "OPENAI_API_KEY");
        cfg.validate().unwrap();
    }
}
