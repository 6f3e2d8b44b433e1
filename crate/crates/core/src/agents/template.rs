//! Prompt templates with `{name}` placeholders.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template `{template}` is missing a value for placeholder `{{{placeholder}}}`")]
    MissingPlaceholder { template: String, placeholder: String },
}

pub const SPECIALIST_SYSTEM: &str = include_str!("../../assets/templates/specialist_system.txt");
pub const SPECIALIST_USER: &str = include_str!("../../assets/templates/specialist_user.txt");
pub const VERIFY_QUESTIONS: &str = include_str!("../../assets/templates/verify_questions.txt");
pub const VERIFY_INDEPENDENT: &str = include_str!("../../assets/templates/verify_independent.txt");
pub const VERIFY_REFERENCE: &str = include_str!("../../assets/templates/verify_reference.txt");
pub const CURATION_USER: &str = include_str!("../../assets/templates/curation_user.txt");

/// Every shipped template asset by file stem.
pub const ASSETS: [(&str, &str); 6] = [
    ("specialist_system", SPECIALIST_SYSTEM),
    ("specialist_user", SPECIALIST_USER),
    ("verify_questions", VERIFY_QUESTIONS),
    ("verify_independent", VERIFY_INDEPENDENT),
    ("verify_reference", VERIFY_REFERENCE),
    ("curation_user", CURATION_USER),
];

/// SHA-256 of each template asset, for run manifests.
pub fn asset_hashes() -> BTreeMap<String, String> {
    ASSETS
        .iter()
        .map(|(name, body)| (name.to_string(), hex::encode(Sha256::digest(body.as_bytes()))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub system_template: String,
    pub user_template: String,
    pub required_placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, system_template: &str, user_template: &str) -> Self {
        let mut required = placeholders(system_template);
        required.extend(placeholders(user_template));
        PromptTemplate {
            name: name.into(),
            system_template: system_template.to_string(),
            user_template: user_template.to_string(),
            required_placeholders: required,
        }
    }

    /// A single verbatim prompt split at its first blank line: the persona
    /// paragraph becomes the system prompt, the rest the user prompt.
    pub fn split_persona(name: impl Into<String>, template: &str) -> Self {
        let (system, user) = template.split_once("\n\n").unwrap_or((template, ""));
        Self::new(name, system, user)
    }

    /// Renders `(system, user)`. Substituted values are never re-scanned.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<(String, String), TemplateError> {
        if let Some(missing) = self.required_placeholders.iter().find(|p| !values.contains_key(p.as_str())) {
            return Err(TemplateError::MissingPlaceholder {
                template: self.name.clone(),
                placeholder: missing.clone(),
            });
        }
        Ok((substitute(&self.system_template, values), substitute(&self.user_template, values)))
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c == '_')
}

/// Names of all `{ident}` placeholders in `template`.
pub fn placeholders(template: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_ident(&after[..close]) => {
                out.insert(after[..close].to_string());
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

fn substitute(template: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_ident(&after[..close]) && values.contains_key(&after[..close]) => {
                out.push_str(&values[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
