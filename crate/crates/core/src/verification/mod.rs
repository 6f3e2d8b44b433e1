//! Two-phase consistency verification.
//!
//! A specialist's reasoning is turned into up to four verification
//! questions. Each question is answered once without the reasoning and once
//! with it; position-aligned answer pairs are compared by token-set
//! similarity, the fraction of inconsistent pairs is the inconsistency, and
//! the S-score discounts the specialist's initial confidence by it.

pub mod lists;
pub mod scoring;
pub mod similarity;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::agents::template::{self, PromptTemplate, TemplateError};
use crate::backend::{derive_seed, BackendError, ChatBackend, ChatRequest, GenerationParams, Stage};
use crate::model::{
    QuestionRecord, SScoreVariant, SpecialistResponse, TraceFlag, VerificationFailure, VerificationTrace,
};

pub use scoring::{inconsistency_score, s_score, NEUTRAL_INCONSISTENCY};
pub use similarity::{jaccard, pair_consistent, tokenize_filtered, SimilarityConfig, SimilaritySummary, Stopwords};

pub const MAX_QUESTIONS: usize = 4;

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("no verification questions parsed")]
    NoQuestionsParsed,
    #[error("no verification answers parsed")]
    NoAnswersParsed,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn request(
    template: PromptTemplate,
    values: BTreeMap<&str, String>,
    stage: Stage,
    question: &QuestionRecord,
    response: &SpecialistResponse,
) -> Result<ChatRequest, VerificationError> {
    let (system, user) = template.render(&values)?;
    let seed = derive_seed(&question.id, response.specialist.specialty, stage);
    Ok(ChatRequest::new(system, user, GenerationParams::for_stage(stage, Some(seed)))?)
}

fn numbered(questions: &[String]) -> String {
    questions
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{}. {}", i + 1, q))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_formulation_prompt(question: &QuestionRecord, response: &SpecialistResponse) -> Result<ChatRequest, VerificationError> {
    let values = BTreeMap::from([
        ("question", question.stem.clone()),
        ("answer", format!("{}. {}", response.answer, question.option(response.answer))),
        ("reasoning", response.reasoning.clone()),
    ]);
    let t = PromptTemplate::split_persona("verify_questions", template::VERIFY_QUESTIONS);
    request(t, values, Stage::VerifyQuestions, question, response)
}

/// Independent prompt when `reasoning` is `None`, reference prompt otherwise.
pub fn render_answer_prompt(
    question: &QuestionRecord,
    response: &SpecialistResponse,
    verification_questions: &[String],
    reasoning: Option<&str>,
) -> Result<ChatRequest, VerificationError> {
    let mut values = BTreeMap::from([
        ("question", question.stem.clone()),
        ("verification_questions", numbered(verification_questions)),
    ]);
    let (t, stage) = match reasoning {
        None => (PromptTemplate::split_persona("verify_independent", template::VERIFY_INDEPENDENT), Stage::VerifyIndependent),
        Some(r) => {
            values.insert("reasoning", r.to_string());
            (PromptTemplate::split_persona("verify_reference", template::VERIFY_REFERENCE), Stage::VerifyReference)
        }
    };
    request(t, values, stage, question, response)
}

/// Asks the backend for verification questions about the specialist's
/// reasoning. Returns the numbered items in order, at most four.
pub fn formulate_questions(
    question: &QuestionRecord,
    response: &SpecialistResponse,
    backend: &dyn ChatBackend,
) -> Result<Vec<String>, VerificationError> {
    Ok(formulate_inner(question, response, backend)?.0)
}

fn formulate_inner(
    question: &QuestionRecord,
    response: &SpecialistResponse,
    backend: &dyn ChatBackend,
) -> Result<(Vec<String>, bool), VerificationError> {
    let completion = backend.complete(&render_formulation_prompt(question, response)?)?;
    let items = lists::parse_numbered(&completion.text, "VERIFICATION_QUESTIONS:");
    if items.is_empty() {
        return Err(VerificationError::NoQuestionsParsed);
    }
    let truncated = items.len() > MAX_QUESTIONS;
    Ok((items.into_values().take(MAX_QUESTIONS).collect(), truncated))
}

/// Answers the verification questions in one call. Position `i` holds the
/// answer numbered `i + 1`, or `None` when that number did not parse.
pub fn answer_batch(
    question: &QuestionRecord,
    response: &SpecialistResponse,
    verification_questions: &[String],
    reasoning: Option<&str>,
    backend: &dyn ChatBackend,
) -> Result<Vec<Option<String>>, VerificationError> {
    let completion = backend.complete(&render_answer_prompt(question, response, verification_questions, reasoning)?)?;
    let mut items = lists::parse_numbered(&completion.text, "ANSWERS:");
    let answers: Vec<Option<String>> = (1..=verification_questions.len()).map(|i| items.remove(&i)).collect();
    if answers.iter().all(Option::is_none) {
        return Err(VerificationError::NoAnswersParsed);
    }
    Ok(answers)
}

/// Full verification of one specialist response.
///
/// Parse failures do not error: they produce a trace carrying a failure
/// marker and the neutral inconsistency. Backend errors propagate.
pub fn verify(
    question: &QuestionRecord,
    response: &SpecialistResponse,
    variant: SScoreVariant,
    cfg: &SimilarityConfig,
    backend: &dyn ChatBackend,
) -> Result<VerificationTrace, VerificationError> {
    let mut trace = VerificationTrace {
        specialist: response.specialist.clone(),
        questions: vec![],
        independent_answers: vec![],
        reference_answers: vec![],
        pair_results: vec![],
        parsed_pairs: 0,
        inconsistency: NEUTRAL_INCONSISTENCY,
        initial_confidence: response.initial_confidence,
        s_score: 0.0,
        variant,
        failure: None,
        flags: BTreeSet::new(),
    };

    let failure = match run_phases(question, response, cfg, backend, &mut trace) {
        Ok(()) => None,
        Err(VerificationError::NoQuestionsParsed) => Some(VerificationFailure::NoQuestionsParsed),
        Err(VerificationError::NoAnswersParsed) if trace.independent_answers.is_empty() => {
            Some(VerificationFailure::NoIndependentAnswers)
        }
        Err(VerificationError::NoAnswersParsed) => Some(VerificationFailure::NoReferenceAnswers),
        Err(e) => return Err(e),
    };

    // Keep the position-aligned lists the same length after an early stop.
    let n = trace.questions.len();
    trace.independent_answers.resize(n, None);
    trace.reference_answers.resize(n, None);
    trace.pair_results.resize(n, None);

    match inconsistency_score(trace.pair_results.iter().flatten()) {
        Some((i, parsed)) => {
            trace.inconsistency = i;
            trace.parsed_pairs = parsed;
        }
        None => {
            trace.inconsistency = NEUTRAL_INCONSISTENCY;
            trace.parsed_pairs = 0;
            trace.flags.insert(TraceFlag::NeutralInconsistency);
            trace.failure = Some(failure.unwrap_or(VerificationFailure::NoPairsParsed));
        }
    }
    trace.s_score = s_score(response.initial_confidence, trace.inconsistency, variant);
    Ok(trace)
}

fn run_phases(
    question: &QuestionRecord,
    response: &SpecialistResponse,
    cfg: &SimilarityConfig,
    backend: &dyn ChatBackend,
    trace: &mut VerificationTrace,
) -> Result<(), VerificationError> {
    let (questions, truncated) = formulate_inner(question, response, backend)?;
    if truncated {
        trace.flags.insert(TraceFlag::ExtraQuestionsDropped);
    }
    if questions.len() < MAX_QUESTIONS {
        trace.flags.insert(TraceFlag::FewerThanFourQuestions);
    }
    trace.questions = questions;

    trace.independent_answers = answer_batch(question, response, &trace.questions, None, backend)?;
    trace.reference_answers = answer_batch(question, response, &trace.questions, Some(&response.reasoning), backend)?;

    trace.pair_results = trace
        .independent_answers
        .iter()
        .zip(&trace.reference_answers)
        .map(|(ind, rf)| match (ind, rf) {
            (Some(a), Some(b)) => Some(pair_consistent(a, b, cfg)),
            _ => None,
        })
        .collect();
    if trace.pair_results.iter().any(Option::is_none) {
        trace.flags.insert(TraceFlag::AnswerPositionMissing);
    }
    Ok(())
}
