//! Stopword-filtered token-set Jaccard similarity.

use std::collections::BTreeSet;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::PairResult;

const STOPWORDS_EN_V1: &str = include_str!("../../assets/stopwords_en_v1.txt");

static DEFAULT_STOPWORDS: LazyLock<Stopwords> = LazyLock::new(|| Stopwords::parse("en-v1", STOPWORDS_EN_V1));

/// Immutable, versioned stopword list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    version: String,
    words: Arc<BTreeSet<String>>,
}

impl Stopwords {
    /// One lowercase token per line; `#` starts a comment line.
    pub fn parse(version: impl Into<String>, text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Stopwords { version: version.into(), words: Arc::new(words) }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// SHA-256 over the sorted list, newline-joined.
    pub fn digest(&self) -> String {
        let joined = self.words.iter().cloned().collect::<Vec<_>>().join("\n");
        hex::encode(Sha256::digest(joined.as_bytes()))
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        DEFAULT_STOPWORDS.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityConfig {
    pub jaccard_threshold: f64,
    pub content_threshold: f64,
    /// Minimum character length of a content word.
    pub content_min_length: usize,
    pub stopwords: Stopwords,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            jaccard_threshold: 0.4,
            content_threshold: 0.6,
            content_min_length: 5,
            stopwords: Stopwords::default(),
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, t) in [("jaccard_threshold", self.jaccard_threshold), ("content_threshold", self.content_threshold)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(format!("{name} = {t} outside (0,1)"));
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> SimilaritySummary {
        SimilaritySummary {
            jaccard_threshold: self.jaccard_threshold,
            content_threshold: self.content_threshold,
            content_min_length: self.content_min_length,
            stopwords_version: self.stopwords.version().to_string(),
            stopwords_count: self.stopwords.len(),
            stopwords_sha256: self.stopwords.digest(),
        }
    }
}

/// Serializable description of a [`SimilarityConfig`] for run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub jaccard_threshold: f64,
    pub content_threshold: f64,
    pub content_min_length: usize,
    pub stopwords_version: String,
    pub stopwords_count: usize,
    pub stopwords_sha256: String,
}

/// Lowercases, splits on every non-alphanumeric character, drops empty
/// tokens and stopwords, and returns the distinct remainder.
pub fn tokenize_filtered(text: &str, stopwords: &Stopwords) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

/// `|a ∩ b| / |a ∪ b|`; two empty sets are identical (1.0).
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Consistent when full Jaccard exceeds the primary threshold or the
/// content-word Jaccard exceeds the secondary one. Both comparisons strict.
pub fn pair_consistent(independent: &str, reference: &str, cfg: &SimilarityConfig) -> PairResult {
    let a = tokenize_filtered(independent, &cfg.stopwords);
    let b = tokenize_filtered(reference, &cfg.stopwords);
    let similarity = jaccard(&a, &b);
    let content = |s: &BTreeSet<String>| -> BTreeSet<String> {
        s.iter().filter(|t| t.chars().count() >= cfg.content_min_length).cloned().collect()
    };
    let content_similarity = jaccard(&content(&a), &content(&b));
    PairResult {
        similarity,
        content_similarity,
        consistent: similarity > cfg.jaccard_threshold || content_similarity > cfg.content_threshold,
    }
}
