//! TOML run configuration: a `[backend]` table and an optional `[run]` table.
//!
//! ```toml
//! [backend]
//! kind = "http_openai_compatible"
//! base_url = "http://localhost:8000/v1"
//! model_name = "Qwen/Qwen2.5-7B-Instruct"
//! api_key_env = "OPENAI_API_KEY"
//!
//! [run]
//! variant = "mult"        # mult | wavg | pure
//! alpha = 0.65            # weighted-average weight
//! parallel = 4
//! baseline_specialist = "respiratory"
//! ```
//!
//! Relative paths inside `[backend]` resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendConfig;
use crate::harness::RunConfig;
use crate::model::{ConfigId, SScoreVariant, SpecialistIdentity, Specialty};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub variant: Option<String>,
    pub alpha: Option<f64>,
    pub parallel: Option<usize>,
    pub baseline_specialist: Option<String>,
    pub knowledge_context: Option<String>,
    pub jaccard_threshold: Option<f64>,
    pub content_threshold: Option<f64>,
    pub content_min_length: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileConfig {
    pub backend: BackendConfig,
    #[serde(default)]
    pub run: RunSection,
}

impl FileConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: FileConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.backend.resolve_paths(base);
        cfg.backend.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    /// Run settings for `config`; `variant` and `parallel` override the file.
    pub fn run_config(&self, config: ConfigId, variant: Option<&str>, parallel: Option<usize>) -> Result<RunConfig, ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        let mut rc = RunConfig::new(config);
        if let Some(v) = variant.or(self.run.variant.as_deref()) {
            rc.s_score_variant = v.parse().map_err(|e| invalid(&e))?;
        }
        if let (SScoreVariant::WeightedAverage { .. }, Some(alpha)) = (rc.s_score_variant, self.run.alpha) {
            rc.s_score_variant = SScoreVariant::WeightedAverage { alpha };
        }
        if let Some(p) = parallel.or(self.run.parallel) {
            rc.max_parallel_questions = p;
        }
        if let Some(s) = &self.run.baseline_specialist {
            let sp: Specialty = s.parse().map_err(|e| invalid(&e))?;
            rc.baseline_specialist = SpecialistIdentity::new(sp);
        }
        if let Some(k) = &self.run.knowledge_context {
            rc.knowledge_context = k.clone();
        }
        if let Some(t) = self.run.jaccard_threshold {
            rc.similarity.jaccard_threshold = t;
        }
        if let Some(t) = self.run.content_threshold {
            rc.similarity.content_threshold = t;
        }
        if let Some(n) = self.run.content_min_length {
            rc.similarity.content_min_length = n;
        }
        rc.validate().map_err(|e| invalid(&e))?;
        Ok(rc)
    }
}
