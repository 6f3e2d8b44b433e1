//! Source-dataset ingestion, curation, and subset construction.

pub mod curation;
pub mod loaders;
pub mod subset;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agents::AgentError;
use crate::model::{deserialize_record, serialize_record, QuestionRecord};

pub use curation::{curate, curate_to_dir, read_curation, CurationEntry, CurationOutcome, CurationRecord, StopRule};
pub use loaders::{load_medmcqa, load_medqa, LoadedDataset};
pub use subset::{build_subset, SubsetSpec};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}:{line}: {message}")]
    FormatError { path: PathBuf, line: usize, message: String },
    #[error("{path}: duplicate question id `{id}`")]
    DuplicateId { path: PathBuf, id: String },
    #[error("{path}:{line}: existing curation file does not match the input dataset")]
    CheckpointMismatch { path: PathBuf, line: usize },
    #[error(
        "insufficient pool: need {disagreement_needed} disagreement (have {disagreement_available}) \
         and {agreement_needed} agreement (have {agreement_available})"
    )]
    InsufficientPool {
        disagreement_available: usize,
        disagreement_needed: usize,
        agreement_available: usize,
        agreement_needed: usize,
    },
    #[error("invalid subset spec: {0}")]
    InvalidSubset(String),
    #[error("curation aborted after {processed} question(s): {source}")]
    Curation {
        processed: usize,
        #[source]
        source: AgentError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Writes questions as JSON lines in the given order.
pub fn write_questions(path: &Path, questions: &[QuestionRecord]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let body: String = questions.iter().map(|q| serialize_record(q) + "\n").collect();
    fs::write(path, body).map_err(io)
}

/// Reads a subset file and checks every record's invariants.
pub fn read_questions(path: &Path) -> Result<Vec<QuestionRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fmt = |message: String| DatasetError::FormatError { path: path.to_path_buf(), line: i + 1, message };
        let q: QuestionRecord = deserialize_record(line).map_err(|e| fmt(e.to_string()))?;
        q.validate().map_err(|e| fmt(e.to_string()))?;
        if !seen.insert(q.id.clone()) {
            return Err(DatasetError::DuplicateId { path: path.to_path_buf(), id: q.id });
        }
        out.push(q);
    }
    Ok(out)
}
