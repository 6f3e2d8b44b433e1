//! Scripted mock backend.
//!
//! A script is a JSON-lines file. Each line is one entry with a `response`
//! and either an exact `key` (a [`request_key`](super::request_key) digest)
//! or a `contains` list of substrings that must all occur in the
//! concatenated system and user prompt. `stage` optionally restricts a
//! substring entry to one pipeline stage.
//!
//! ```text
//! {"key":"3f1c...","response":"ANSWER: B\nCONFIDENCE: 0.8"}
//! {"contains":["[Q01/cardiology/1]"],"stage":"verify_independent","response":"ANSWERS:\n1. ..."}
//! ```
//!
//! Exact keys win; otherwise the first matching substring entry in file
//! order answers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{request_key, word_count, BackendError, ChatBackend, ChatRequest, Completion, Stage, Usage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub response: String,
}

impl ScriptEntry {
    pub fn keyed(key: impl Into<String>, response: impl Into<String>) -> Self {
        ScriptEntry { key: Some(key.into()), contains: vec![], stage: None, response: response.into() }
    }

    pub fn matching<S: Into<String>>(
        contains: impl IntoIterator<Item = S>,
        stage: Option<Stage>,
        response: impl Into<String>,
    ) -> Self {
        ScriptEntry {
            key: None,
            contains: contains.into_iter().map(Into::into).collect(),
            stage,
            response: response.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockScript {
    by_key: HashMap<String, String>,
    matchers: Vec<ScriptEntry>,
}

impl MockScript {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Result<Self, BackendError> {
        let mut script = MockScript::default();
        for (i, e) in entries.into_iter().enumerate() {
            match &e.key {
                Some(k) => {
                    script.by_key.entry(k.to_ascii_lowercase()).or_insert(e.response);
                }
                None if e.contains.is_empty() => {
                    return Err(BackendError::Config(format!("script entry {} has neither key nor contains", i + 1)))
                }
                None => script.matchers.push(e),
            }
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path).map_err(|source| BackendError::Io { path: path.to_path_buf(), source })?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: ScriptEntry = serde_json::from_str(line)
                .map_err(|e| BackendError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
            entries.push(e);
        }
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.by_key.len() + self.matchers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(&self, request: &ChatRequest, key: &str) -> Option<&str> {
        if let Some(r) = self.by_key.get(key) {
            return Some(r);
        }
        let haystack = format!("{}\n{}", request.system_prompt, request.user_prompt);
        self.matchers
            .iter()
            .find(|m| {
                m.stage.map_or(true, |s| s == request.stage()) && m.contains.iter().all(|c| haystack.contains(c.as_str()))
            })
            .map(|m| m.response.as_str())
    }
}

/// Pure function of (script, request).
pub struct ScriptedBackend {
    script: MockScript,
}

impl ScriptedBackend {
    pub fn new(script: MockScript) -> Self {
        ScriptedBackend { script }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let key = request_key(request);
        match self.script.lookup(request, &key) {
            Some(text) => Ok(Completion {
                text: text.to_string(),
                usage: Usage {
                    prompt_tokens: word_count(&request.system_prompt) + word_count(&request.user_prompt),
                    completion_tokens: word_count(text),
                },
                latency_ms: 0,
            }),
            None => {
                let excerpt: String = request.user_prompt.chars().take(120).collect();
                Err(BackendError::ScriptMiss { key, stage: request.stage(), excerpt })
            }
        }
    }
}
