//! MedQA-USMLE and MedMCQA JSON-lines loaders.
//!
//! MedQA rows carry `question`, `options` (letter → text) and
//! `answer_idx`. MedMCQA rows carry `question`, `opa`..`opd` and a
//! one-based `cop`. Rows without a usable gold label, or without four
//! non-empty options, are dropped and counted.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::DatasetError;
use crate::model::{AnswerLetter, QuestionRecord, Source};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedDataset {
    pub questions: Vec<QuestionRecord>,
    pub dropped_invalid_label: usize,
    pub dropped_invalid_options: usize,
}

impl LoadedDataset {
    pub fn dropped(&self) -> usize {
        self.dropped_invalid_label + self.dropped_invalid_options
    }
}

fn read_rows(path: &Path) -> Result<Vec<(usize, Value)>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| DatasetError::FormatError {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !v.is_object() {
            return Err(DatasetError::FormatError {
                path: path.to_path_buf(),
                line: i + 1,
                message: "row is not a JSON object".into(),
            });
        }
        rows.push((i + 1, v));
    }
    Ok(rows)
}

fn text_field(v: &Value, key: &str) -> Option<String> {
    v.get(key).and_then(Value::as_str).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

fn push_unique(out: &mut LoadedDataset, seen: &mut HashSet<String>, q: QuestionRecord, path: &Path) -> Result<(), DatasetError> {
    if !seen.insert(q.id.clone()) {
        return Err(DatasetError::DuplicateId { path: path.to_path_buf(), id: q.id });
    }
    out.questions.push(q);
    Ok(())
}

pub fn load_medqa(path: &Path) -> Result<LoadedDataset, DatasetError> {
    let mut out = LoadedDataset::default();
    let mut seen = HashSet::new();
    for (line, row) in read_rows(path)? {
        let gold = match row.get("answer_idx").and_then(Value::as_str).map(str::parse::<AnswerLetter>) {
            Some(Ok(l)) => l,
            _ => {
                out.dropped_invalid_label += 1;
                continue;
            }
        };
        let options = match row.get("options").and_then(Value::as_object) {
            Some(map) if map.len() == 4 => AnswerLetter::ALL.map(|l| {
                map.get(&l.to_string()).and_then(Value::as_str).unwrap_or("").trim().to_string()
            }),
            _ => {
                out.dropped_invalid_options += 1;
                continue;
            }
        };
        let id = text_field(&row, "id").unwrap_or_else(|| format!("medqa-{line}"));
        let stem = text_field(&row, "question").unwrap_or_default();
        match QuestionRecord::new(id, stem, options, gold, Source::MedQA) {
            Ok(mut q) => {
                q.meta = meta(&row, line, &["meta_info"]);
                push_unique(&mut out, &mut seen, q, path)?;
            }
            Err(_) => out.dropped_invalid_options += 1,
        }
    }
    Ok(out)
}

pub fn load_medmcqa(path: &Path) -> Result<LoadedDataset, DatasetError> {
    let mut out = LoadedDataset::default();
    let mut seen = HashSet::new();
    for (line, row) in read_rows(path)? {
        let cop = match row.get("cop") {
            Some(Value::Number(n)) => n.as_i64(),
            Some(Value::String(s)) => s.trim().parse::<i64>().ok(),
            _ => None,
        };
        let gold = match cop.and_then(AnswerLetter::from_one_based) {
            Some(l) => l,
            None => {
                out.dropped_invalid_label += 1;
                continue;
            }
        };
        let options = ["opa", "opb", "opc", "opd"].map(|k| text_field(&row, k).unwrap_or_default());
        let id = text_field(&row, "id").unwrap_or_else(|| format!("medmcqa-{line}"));
        let stem = text_field(&row, "question").unwrap_or_default();
        match QuestionRecord::new(id, stem, options, gold, Source::MedMCQA) {
            Ok(mut q) => {
                q.meta = meta(&row, line, &["subject_name", "topic_name", "choice_type"]);
                push_unique(&mut out, &mut seen, q, path)?;
            }
            Err(_) => out.dropped_invalid_options += 1,
        }
    }
    Ok(out)
}

fn meta(row: &Value, line: usize, keys: &[&str]) -> BTreeMap<String, String> {
    let mut m = BTreeMap::from([("source_line".to_string(), line.to_string())]);
    for k in keys {
        if let Some(v) = text_field(row, k) {
            m.insert(k.to_string(), v);
        }
    }
    m
}
