//! Specialist agents: prompt rendering, the backend call, response parsing.

pub mod parse;
pub mod template;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::backend::{derive_seed, BackendError, ChatBackend, ChatRequest, GenerationParams, Stage};
use crate::model::{AnswerLetter, QuestionRecord, SpecialistIdentity, SpecialistResponse};

pub use parse::{parse_curation_letter, ParsedResponse};
pub use template::{PromptTemplate, TemplateError};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no answer letter (A-D) found in completion")]
    NoAnswerLetter { raw: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub fn specialist_template() -> PromptTemplate {
    PromptTemplate::new("specialist", template::SPECIALIST_SYSTEM, template::SPECIALIST_USER)
}

pub fn curation_template() -> PromptTemplate {
    PromptTemplate::new("curation", template::SPECIALIST_SYSTEM, template::CURATION_USER)
}

fn question_values(specialist: &SpecialistIdentity, question: &QuestionRecord, knowledge_context: &str) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("specialty", specialist.specialty.prompt_name().to_string()),
        ("knowledge_context", knowledge_context.to_string()),
        ("question", question.stem.clone()),
        ("options", question.formatted_options()),
    ])
}

/// Phase-1 request for one specialist (greedy decoding).
pub fn render_specialist_prompt(
    specialist: &SpecialistIdentity,
    question: &QuestionRecord,
    knowledge_context: &str,
) -> Result<ChatRequest, AgentError> {
    let (system, user) = specialist_template().render(&question_values(specialist, question, knowledge_context))?;
    let seed = derive_seed(&question.id, specialist.specialty, Stage::SpecialistAnswer);
    Ok(ChatRequest::new(system, user, GenerationParams::for_stage(Stage::SpecialistAnswer, Some(seed)))?)
}

/// Letter-only request used by the curation sweep (8-token budget).
pub fn render_curation_prompt(specialist: &SpecialistIdentity, question: &QuestionRecord) -> Result<ChatRequest, AgentError> {
    let (system, user) = curation_template().render(&question_values(specialist, question, ""))?;
    let seed = derive_seed(&question.id, specialist.specialty, Stage::CurationLetter);
    Ok(ChatRequest::new(system, user, GenerationParams::for_stage(Stage::CurationLetter, Some(seed)))?)
}

pub fn parse_specialist_response(raw: &str, specialist: &SpecialistIdentity) -> Result<SpecialistResponse, AgentError> {
    let parsed = parse::parse_response(raw).ok_or_else(|| AgentError::NoAnswerLetter { raw: raw.to_string() })?;
    Ok(SpecialistResponse {
        specialist: specialist.clone(),
        answer: parsed.answer,
        reasoning: parsed.reasoning,
        initial_confidence: parsed.confidence,
        parse_flags: parsed.flags,
        raw_text: raw.to_string(),
    })
}

/// One specialist answers one question: render, one backend call, parse.
pub fn consult(
    specialist: &SpecialistIdentity,
    question: &QuestionRecord,
    knowledge_context: &str,
    backend: &dyn ChatBackend,
) -> Result<SpecialistResponse, AgentError> {
    let request = render_specialist_prompt(specialist, question, knowledge_context)?;
    let completion = backend.complete(&request)?;
    parse_specialist_response(&completion.text, specialist)
}

/// Letter-only consultation. `Ok(None)` when the reply holds no letter.
pub fn consult_letter(
    specialist: &SpecialistIdentity,
    question: &QuestionRecord,
    backend: &dyn ChatBackend,
) -> Result<Option<AnswerLetter>, AgentError> {
    let request = render_curation_prompt(specialist, question)?;
    let completion = backend.complete(&request)?;
    Ok(parse_curation_letter(&completion.text))
}
