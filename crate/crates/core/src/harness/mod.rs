//! Ablation runs: configurations C1–C4 over a question subset.

mod ablation;

use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{consult, AgentError, TemplateError};
use crate::backend::{BackendError, ChatBackend, CountingBackend};
use crate::fusion::{fuse, FusionError, Vote, DEFAULT_AGENTS};
use crate::metrics::MetricsError;
use crate::model::{
    ConfigId, EvaluationRecord, QuestionRecord, SScoreVariant, SpecialistIdentity, SpecialistResponse, Specialty,
    VerificationTrace,
};
use crate::verification::{verify, SimilarityConfig, VerificationError};

pub use ablation::{
    load_report, read_failures, read_records, report_rows, run_ablation, run_config, write_run_report, AblationOptions, RunManifest, RunReport, COMPARISON_FILE,
    MANIFEST_FILE,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("subset is empty")]
    EmptySubset,
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}:{line}: corrupt record: {message}")]
    CorruptRecords { path: std::path::PathBuf, line: usize, message: String },
    #[error("{config}: aborted after {persisted} persisted question(s): {source}")]
    Aborted {
        config: ConfigId,
        persisted: usize,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Settings for one configuration's run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub config: ConfigId,
    pub s_score_variant: SScoreVariant,
    pub similarity: SimilarityConfig,
    /// The lone agent of C1 and C2.
    pub baseline_specialist: SpecialistIdentity,
    pub max_parallel_questions: usize,
    pub knowledge_context: String,
}

impl RunConfig {
    pub fn new(config: ConfigId) -> Self {
        RunConfig {
            config,
            s_score_variant: SScoreVariant::default(),
            similarity: SimilarityConfig::default(),
            baseline_specialist: SpecialistIdentity::new(Specialty::Respiratory),
            max_parallel_questions: 1,
            knowledge_context: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.max_parallel_questions == 0 {
            return Err(HarnessError::InvalidConfig("max_parallel_questions must be at least 1".into()));
        }
        self.s_score_variant.validate().map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.similarity.validate().map_err(HarnessError::InvalidConfig)
    }

    /// Agents consulted under this configuration.
    pub fn specialists(&self) -> Vec<SpecialistIdentity> {
        if self.config.uses_panel() {
            SpecialistIdentity::panel()
        } else {
            vec![self.baseline_specialist.clone()]
        }
    }
}

/// A question excluded from metrics because a completion could not be used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub question_id: String,
    pub config: ConfigId,
    pub specialist: Option<Specialty>,
    pub error: String,
    pub raw_text: Option<String>,
    pub llm_calls: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuestionOutcome {
    Scored(EvaluationRecord),
    Quarantined(FailureRecord),
}

impl QuestionOutcome {
    pub fn question_id(&self) -> &str {
        match self {
            QuestionOutcome::Scored(r) => &r.question_id,
            QuestionOutcome::Quarantined(f) => &f.question_id,
        }
    }
}

enum AgentFailure {
    Quarantine { specialist: Specialty, error: String, raw: Option<String> },
    Fatal(HarnessError),
}

impl AgentFailure {
    fn from_agent(specialist: Specialty, e: AgentError) -> Self {
        match e {
            AgentError::NoAnswerLetter { raw } => AgentFailure::Quarantine {
                specialist,
                error: "no answer letter (A-D) found in completion".into(),
                raw: Some(raw),
            },
            AgentError::Backend(b) => AgentFailure::Fatal(b.into()),
            AgentError::Template(t) => AgentFailure::Fatal(t.into()),
        }
    }

    fn from_verification(e: VerificationError) -> Self {
        match e {
            VerificationError::Backend(b) => AgentFailure::Fatal(b.into()),
            VerificationError::Template(t) => AgentFailure::Fatal(t.into()),
            // verify() folds parse failures into the trace
            other => AgentFailure::Fatal(HarnessError::InvalidConfig(other.to_string())),
        }
    }
}

type AgentResult = Result<(SpecialistResponse, Option<VerificationTrace>), AgentFailure>;

fn run_agent(specialist: &SpecialistIdentity, question: &QuestionRecord, cfg: &RunConfig, backend: &dyn ChatBackend) -> AgentResult {
    let response = consult(specialist, question, &cfg.knowledge_context, backend)
        .map_err(|e| AgentFailure::from_agent(specialist.specialty, e))?;
    if !cfg.config.uses_verification() {
        return Ok((response, None));
    }
    let trace = verify(question, &response, cfg.s_score_variant, &cfg.similarity, backend)
        .map_err(AgentFailure::from_verification)?;
    Ok((response, Some(trace)))
}

/// Runs one question under `cfg`.
///
/// Unusable completions quarantine the question; backend and template
/// errors abort.
pub fn run_question(question: &QuestionRecord, cfg: &RunConfig, backend: &dyn ChatBackend) -> Result<QuestionOutcome, HarnessError> {
    let started = Instant::now();
    let counting = CountingBackend::new(backend);
    let specialists = cfg.specialists();

    let results: Vec<AgentResult> = if specialists.len() == 1 {
        vec![run_agent(&specialists[0], question, cfg, &counting)]
    } else {
        let counting = &counting;
        thread::scope(|s| {
            let handles: Vec<_> =
                specialists.iter().map(|sp| s.spawn(move || run_agent(sp, question, cfg, counting))).collect();
            handles.into_iter().map(|h| h.join().expect("specialist worker panicked")).collect()
        })
    };

    let mut responses = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    let mut quarantine = None;
    for r in results {
        match r {
            Ok((resp, trace)) => {
                responses.push(resp);
                traces.extend(trace);
            }
            Err(AgentFailure::Fatal(e)) => return Err(e),
            Err(AgentFailure::Quarantine { specialist, error, raw }) => {
                quarantine.get_or_insert((specialist, error, raw));
            }
        }
    }
    if let Some((specialist, error, raw_text)) = quarantine {
        return Ok(QuestionOutcome::Quarantined(FailureRecord {
            question_id: question.id.clone(),
            config: cfg.config,
            specialist: Some(specialist),
            error,
            raw_text,
            llm_calls: counting.calls(),
        }));
    }

    let (predicted, confidence, fusion) = match cfg.config {
        ConfigId::C1 => (responses[0].answer, responses[0].initial_confidence, None),
        ConfigId::C2 => (responses[0].answer, traces[0].s_score, None),
        ConfigId::C3 | ConfigId::C4 => {
            let votes: Vec<Vote> = if cfg.config == ConfigId::C3 {
                responses.iter().map(|r| Vote::new(r.answer, r.initial_confidence)).collect()
            } else {
                responses.iter().zip(&traces).map(|(r, t)| Vote::new(r.answer, t.s_score)).collect()
            };
            let outcome = fuse(&votes, DEFAULT_AGENTS)?;
            (outcome.final_answer, outcome.calibrated_confidence, Some(outcome))
        }
    };

    Ok(QuestionOutcome::Scored(EvaluationRecord {
        question_id: question.id.clone(),
        config: cfg.config,
        gold: question.gold,
        predicted,
        confidence,
        correct: predicted == question.gold,
        specialist_responses: responses,
        verification_traces: traces,
        fusion,
        wall_time_ms: started.elapsed().as_millis() as u64,
        llm_calls: counting.calls(),
    }))
}
