//! Letter-only curation sweep and disagreement labeling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::thread;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::agents::{consult_letter, AgentError};
use crate::backend::ChatBackend;
use crate::model::{deserialize_record, serialize_record, AnswerLetter, QuestionRecord, SpecialistIdentity, Specialty};

pub const CURATION_FILE: &str = "curation.jsonl";
pub const CHECKPOINT_FILE: &str = "curation.checkpoint.json";
pub const CHECKPOINT_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub target_disagreement: usize,
    pub target_agreement: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { target_disagreement: 220, target_agreement: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationRecord {
    pub question_id: String,
    /// Position of the question in the loaded dataset.
    pub dataset_index: usize,
    /// `None` where the reply held no letter.
    pub answers: BTreeMap<Specialty, Option<AnswerLetter>>,
    pub distinct_answer_count: usize,
    pub high_disagreement: bool,
}

impl CurationRecord {
    pub fn from_answers(question_id: &str, dataset_index: usize, answers: BTreeMap<Specialty, Option<AnswerLetter>>) -> Self {
        let distinct: BTreeSet<AnswerLetter> = answers.values().flatten().copied().collect();
        CurationRecord {
            question_id: question_id.to_string(),
            dataset_index,
            distinct_answer_count: distinct.len(),
            high_disagreement: distinct.len() >= 2,
            answers,
        }
    }

    /// Every parsed letter identical.
    pub fn is_agreement(&self) -> bool {
        self.distinct_answer_count == 1
    }

    pub fn unparsed(&self) -> Vec<Specialty> {
        self.answers.iter().filter(|(_, a)| a.is_none()).map(|(s, _)| *s).collect()
    }
}

/// A curation line on disk: the labels plus the question they describe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationEntry {
    #[serde(flatten)]
    pub record: CurationRecord,
    pub question: QuestionRecord,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurationOutcome {
    pub entries: Vec<CurationEntry>,
    pub disagreement: usize,
    pub agreement: usize,
    /// Questions inspected (equals `entries.len()`).
    pub processed: usize,
    /// True when both targets were met before the dataset ran out.
    pub stopped_early: bool,
}

impl CurationOutcome {
    fn push(&mut self, e: CurationEntry) {
        if e.record.high_disagreement {
            self.disagreement += 1;
        } else if e.record.is_agreement() {
            self.agreement += 1;
        }
        self.entries.push(e);
        self.processed += 1;
    }

    fn targets_met(&self, rule: &StopRule) -> bool {
        self.disagreement >= rule.target_disagreement && self.agreement >= rule.target_agreement
    }
}

/// Asks all four specialists for a letter, concurrently.
pub fn label_question(question: &QuestionRecord, dataset_index: usize, backend: &dyn ChatBackend) -> Result<CurationRecord, AgentError> {
    let panel = SpecialistIdentity::panel();
    let results: Vec<Result<Option<AnswerLetter>, AgentError>> = thread::scope(|s| {
        let handles: Vec<_> = panel.iter().map(|sp| s.spawn(move || consult_letter(sp, question, backend))).collect();
        handles.into_iter().map(|h| h.join().expect("curation worker panicked")).collect()
    });
    let mut answers = BTreeMap::new();
    for (sp, r) in panel.iter().zip(results) {
        answers.insert(sp.specialty, r?);
    }
    Ok(CurationRecord::from_answers(&question.id, dataset_index, answers))
}

fn sweep(
    questions: &[QuestionRecord],
    backend: &dyn ChatBackend,
    rule: StopRule,
    mut outcome: CurationOutcome,
    mut on_batch: impl FnMut(&[CurationEntry], &CurationOutcome) -> Result<(), DatasetError>,
) -> Result<CurationOutcome, DatasetError> {
    let mut flushed = outcome.entries.len();
    let mut i = outcome.processed;
    while i < questions.len() && !outcome.targets_met(&rule) {
        let record = match label_question(&questions[i], i, backend) {
            Ok(r) => r,
            Err(source) => {
                on_batch(&outcome.entries[flushed..], &outcome)?;
                return Err(DatasetError::Curation { processed: outcome.processed, source });
            }
        };
        outcome.push(CurationEntry { record, question: questions[i].clone() });
        i += 1;
        if outcome.processed % CHECKPOINT_EVERY == 0 {
            on_batch(&outcome.entries[flushed..], &outcome)?;
            flushed = outcome.entries.len();
        }
    }
    on_batch(&outcome.entries[flushed..], &outcome)?;
    outcome.stopped_early = outcome.targets_met(&rule);
    Ok(outcome)
}

/// In-memory sweep in dataset order until both targets are met.
pub fn curate(questions: &[QuestionRecord], backend: &dyn ChatBackend, rule: StopRule) -> Result<CurationOutcome, DatasetError> {
    sweep(questions, backend, rule, CurationOutcome::default(), |_, _| Ok(()))
}

#[derive(Serialize)]
struct Checkpoint {
    processed: usize,
    disagreement: usize,
    agreement: usize,
    target_disagreement: usize,
    target_agreement: usize,
}

pub fn read_curation(path: &Path) -> Result<Vec<CurationEntry>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            deserialize_record(l).map_err(|e| DatasetError::FormatError {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Restartable sweep writing `curation.jsonl` under `out_dir`.
///
/// Entries are appended in batches of [`CHECKPOINT_EVERY`] questions and on
/// abort; an existing file is treated as a prefix of the run and continued.
pub fn curate_to_dir(
    questions: &[QuestionRecord],
    backend: &dyn ChatBackend,
    rule: StopRule,
    out_dir: &Path,
) -> Result<CurationOutcome, DatasetError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let path = out_dir.join(CURATION_FILE);
    let mut outcome = CurationOutcome::default();
    if path.exists() {
        for (i, e) in read_curation(&path)?.into_iter().enumerate() {
            if e.record.dataset_index != i || questions.get(i).map(|q| &q.id) != Some(&e.record.question_id) {
                return Err(DatasetError::CheckpointMismatch { path, line: i + 1 });
            }
            outcome.push(e);
        }
    }
    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    sweep(questions, backend, rule, outcome, |batch, state| {
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        let mut buf = String::new();
        for e in batch {
            buf.push_str(&serialize_record(e));
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).and_then(|_| f.flush()).map_err(io(&path))?;
        let cp = Checkpoint {
            processed: state.processed,
            disagreement: state.disagreement,
            agreement: state.agreement,
            target_disagreement: rule.target_disagreement,
            target_agreement: rule.target_agreement,
        };
        fs::write(&checkpoint, serde_json::to_string_pretty(&cp).expect("checkpoint serializes") + "\n")
            .map_err(io(&checkpoint))
    })
}
