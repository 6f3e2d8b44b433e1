//! Shared domain types and their JSON-lines serialization.
//!
//! Every type here is an immutable value object once constructed. Records
//! persist as one JSON object per line so runs can be appended to and
//! resumed after a crash.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid answer letter `{0}`")]
    BadLetter(String),
    #[error("question `{id}`: {reason}")]
    InvalidQuestion { id: String, reason: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
}

/// One of the four admissible option letters. Ordered `A < B < C < D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnswerLetter {
    A,
    B,
    C,
    D,
}

impl AnswerLetter {
    pub const ALL: [AnswerLetter; 4] = [AnswerLetter::A, AnswerLetter::B, AnswerLetter::C, AnswerLetter::D];

    pub fn as_char(self) -> char {
        match self {
            AnswerLetter::A => 'A',
            AnswerLetter::B => 'B',
            AnswerLetter::C => 'C',
            AnswerLetter::D => 'D',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'A' => Some(AnswerLetter::A),
            'B' => Some(AnswerLetter::B),
            'C' => Some(AnswerLetter::C),
            'D' => Some(AnswerLetter::D),
            _ => None,
        }
    }

    /// Zero-based position (`A` = 0).
    pub fn index(self) -> usize {
        self as usize
    }

    /// Maps a one-based option index (`1` = `A`).
    pub fn from_one_based(i: i64) -> Option<Self> {
        match i {
            1..=4 => Some(Self::ALL[(i - 1) as usize]),
            _ => None,
        }
    }
}

impl fmt::Display for AnswerLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for AnswerLetter {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let mut chars = t.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::from_char(c).ok_or_else(|| ModelError::BadLetter(s.to_string())),
            _ => Err(ModelError::BadLetter(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    MedQA,
    MedMCQA,
    Synthetic,
}

/// One multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub stem: String,
    pub options: BTreeMap<AnswerLetter, String>,
    pub gold: AnswerLetter,
    pub source: Source,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl QuestionRecord {
    /// Builds a question and checks the option invariants.
    pub fn new(
        id: impl Into<String>,
        stem: impl Into<String>,
        options: [String; 4],
        gold: AnswerLetter,
        source: Source,
    ) -> Result<Self, ModelError> {
        let q = QuestionRecord {
            id: id.into(),
            stem: stem.into(),
            options: AnswerLetter::ALL.into_iter().zip(options).collect(),
            gold,
            source,
            meta: BTreeMap::new(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::InvalidQuestion {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.trim().is_empty() {
            return Err(bad("empty id"));
        }
        if self.stem.trim().is_empty() {
            return Err(bad("empty stem"));
        }
        for letter in AnswerLetter::ALL {
            match self.options.get(&letter) {
                Some(text) if !text.trim().is_empty() => {}
                _ => return Err(bad(&format!("option {letter} missing or empty"))),
            }
        }
        Ok(())
    }

    pub fn option(&self, letter: AnswerLetter) -> &str {
        self.options.get(&letter).map(String::as_str).unwrap_or("")
    }

    /// Options as `A. <text>` lines, one per letter.
    pub fn formatted_options(&self) -> String {
        AnswerLetter::ALL
            .iter()
            .map(|l| format!("{}. {}", l, self.option(*l)))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Specialty {
    Respiratory,
    Cardiology,
    Neurology,
    Gastroenterology,
}

impl Specialty {
    pub const ALL: [Specialty; 4] = [
        Specialty::Respiratory,
        Specialty::Cardiology,
        Specialty::Neurology,
        Specialty::Gastroenterology,
    ];

    /// Text substituted for `{specialty}` in prompt templates.
    pub fn prompt_name(self) -> &'static str {
        match self {
            Specialty::Respiratory => "respiratory medicine",
            Specialty::Cardiology => "cardiology",
            Specialty::Neurology => "neurology",
            Specialty::Gastroenterology => "gastroenterology",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Specialty::Respiratory => "Pulmonologist",
            Specialty::Cardiology => "Cardiologist",
            Specialty::Neurology => "Neurologist",
            Specialty::Gastroenterology => "Gastroenterologist",
        }
    }

    /// Stable lowercase tag used in seeds, keys and file names.
    pub fn tag(self) -> &'static str {
        match self {
            Specialty::Respiratory => "respiratory",
            Specialty::Cardiology => "cardiology",
            Specialty::Neurology => "neurology",
            Specialty::Gastroenterology => "gastroenterology",
        }
    }
}

impl fmt::Display for Specialty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Specialty {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Specialty::ALL
            .into_iter()
            .find(|sp| sp.tag().eq_ignore_ascii_case(s.trim()) || format!("{sp:?}").eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ModelError::InvalidRecord(format!("unknown specialty `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecialistIdentity {
    pub specialty: Specialty,
    pub display_name: String,
}

impl SpecialistIdentity {
    pub fn new(specialty: Specialty) -> Self {
        SpecialistIdentity {
            specialty,
            display_name: specialty.display_name().to_string(),
        }
    }

    /// The full four-agent panel in fixed order.
    pub fn panel() -> Vec<SpecialistIdentity> {
        Specialty::ALL.into_iter().map(SpecialistIdentity::new).collect()
    }
}

/// Markers for every fallback taken while parsing a specialist completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFlag {
    /// Letter taken from the first standalone A-D token after the last "answer" mention.
    AnswerRegexFallback,
    /// Letter taken from the first standalone A-D token anywhere in the text.
    AnswerAnywhereFallback,
    /// More than one letter offered; the first was kept.
    AnswerAmbiguous,
    ConfidenceDefaulted,
    ConfidencePercent,
    ConfidenceCommaDecimal,
    ConfidenceClamped,
    ReasoningFromSteps,
    ReasoningFromRaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistResponse {
    pub specialist: SpecialistIdentity,
    pub answer: AnswerLetter,
    pub reasoning: String,
    pub initial_confidence: f64,
    #[serde(default)]
    pub parse_flags: BTreeSet<ParseFlag>,
    pub raw_text: String,
}

/// How an S-score combines initial confidence with measured inconsistency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SScoreVariant {
    /// `C * (1 - I)`
    Multiplicative,
    /// `alpha * C + (1 - alpha) * (1 - I)`
    WeightedAverage { alpha: f64 },
    /// `1 - I`
    PureConsistency,
}

impl SScoreVariant {
    pub const DEFAULT_ALPHA: f64 = 0.65;

    pub fn weighted_average() -> Self {
        SScoreVariant::WeightedAverage { alpha: Self::DEFAULT_ALPHA }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            SScoreVariant::WeightedAverage { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(ModelError::InvalidRecord(format!("alpha {alpha} outside (0,1)")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for SScoreVariant {
    fn default() -> Self {
        SScoreVariant::Multiplicative
    }
}

impl FromStr for SScoreVariant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mult" | "multiplicative" => Ok(SScoreVariant::Multiplicative),
            "wavg" | "weighted_average" | "weighted-average" => Ok(SScoreVariant::weighted_average()),
            "pure" | "pure_consistency" | "pure-consistency" => Ok(SScoreVariant::PureConsistency),
            other => Err(ModelError::InvalidRecord(format!("unknown S-score variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub similarity: f64,
    pub content_similarity: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationFailure {
    NoQuestionsParsed,
    NoIndependentAnswers,
    NoReferenceAnswers,
    NoPairsParsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFlag {
    FewerThanFourQuestions,
    ExtraQuestionsDropped,
    AnswerPositionMissing,
    /// No pair could be scored; inconsistency set to the neutral 0.5.
    NeutralInconsistency,
}

/// Everything the two-phase verification of one specialist produced.
///
/// `questions`, `independent_answers`, `reference_answers` and
/// `pair_results` are position-aligned. A position whose answer failed to
/// parse holds `None` and has no pair result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationTrace {
    pub specialist: SpecialistIdentity,
    pub questions: Vec<String>,
    pub independent_answers: Vec<Option<String>>,
    pub reference_answers: Vec<Option<String>>,
    pub pair_results: Vec<Option<PairResult>>,
    pub parsed_pairs: usize,
    pub inconsistency: f64,
    pub initial_confidence: f64,
    pub s_score: f64,
    pub variant: SScoreVariant,
    #[serde(default)]
    pub failure: Option<VerificationFailure>,
    #[serde(default)]
    pub flags: BTreeSet<TraceFlag>,
}

impl VerificationTrace {
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.questions.len();
        if self.independent_answers.len() != n || self.reference_answers.len() != n || self.pair_results.len() != n {
            return Err(ModelError::InvalidRecord("verification trace lists differ in length".into()));
        }
        if n > 4 || self.parsed_pairs > 4 {
            return Err(ModelError::InvalidRecord("more than four verification pairs".into()));
        }
        let parsed = self.pair_results.iter().flatten().count();
        if parsed != self.parsed_pairs {
            return Err(ModelError::InvalidRecord("parsed_pairs disagrees with pair results".into()));
        }
        if parsed > 0 {
            let bad = self.pair_results.iter().flatten().filter(|p| !p.consistent).count();
            if (self.inconsistency - bad as f64 / parsed as f64).abs() > 1e-12 {
                return Err(ModelError::InvalidRecord("inconsistency disagrees with pair results".into()));
            }
        }
        check_unit("s_score", self.s_score)?;
        check_unit("inconsistency", self.inconsistency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub votes: usize,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOutcome {
    pub final_answer: AnswerLetter,
    pub calibrated_confidence: f64,
    pub candidate_scores: BTreeMap<AnswerLetter, CandidateScore>,
    pub vote_fraction: f64,
    pub unanimous: bool,
    pub tie_broken: bool,
}

/// Ablation arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConfigId {
    C1,
    C2,
    C3,
    C4,
}

impl ConfigId {
    pub const ALL: [ConfigId; 4] = [ConfigId::C1, ConfigId::C2, ConfigId::C3, ConfigId::C4];

    /// Backend calls per question on the happy path.
    pub fn call_budget(self) -> u32 {
        match self {
            ConfigId::C1 => 1,
            ConfigId::C2 => 4,
            ConfigId::C3 => 4,
            ConfigId::C4 => 16,
        }
    }

    pub fn uses_panel(self) -> bool {
        matches!(self, ConfigId::C3 | ConfigId::C4)
    }

    pub fn uses_verification(self) -> bool {
        matches!(self, ConfigId::C2 | ConfigId::C4)
    }

    pub fn label(self) -> &'static str {
        match self {
            ConfigId::C1 => "Single Specialist",
            ConfigId::C2 => "Single + Two-Phase",
            ConfigId::C3 => "Multi + S-Score (No 2P)",
            ConfigId::C4 => "Full System",
        }
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ConfigId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" | "1" => Ok(ConfigId::C1),
            "C2" | "2" => Ok(ConfigId::C2),
            "C3" | "3" => Ok(ConfigId::C3),
            "C4" | "4" => Ok(ConfigId::C4),
            other => Err(ModelError::InvalidRecord(format!("unknown config `{other}`"))),
        }
    }
}

/// Outcome of one question under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub question_id: String,
    pub config: ConfigId,
    pub gold: AnswerLetter,
    pub predicted: AnswerLetter,
    pub confidence: f64,
    pub correct: bool,
    pub specialist_responses: Vec<SpecialistResponse>,
    #[serde(default)]
    pub verification_traces: Vec<VerificationTrace>,
    #[serde(default)]
    pub fusion: Option<FusionOutcome>,
    pub wall_time_ms: u64,
    pub llm_calls: u32,
}

impl EvaluationRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_unit("confidence", self.confidence)?;
        if self.correct != (self.predicted == self.gold) {
            return Err(ModelError::InvalidRecord(format!(
                "{}: correct flag disagrees with predicted/gold",
                self.question_id
            )));
        }
        for r in &self.specialist_responses {
            check_unit("initial_confidence", r.initial_confidence)?;
        }
        for t in &self.verification_traces {
            t.validate()?;
        }
        if let Some(f) = &self.fusion {
            check_unit("calibrated_confidence", f.calibrated_confidence)?;
        }
        Ok(())
    }

    /// True when the recorded call count equals the configuration's budget.
    pub fn within_budget(&self) -> bool {
        self.llm_calls == self.config.call_budget()
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ModelError::InvalidRecord(format!("{name} = {v} outside [0,1]")))
    }
}

/// Encodes a record as one JSON line (no trailing newline).
pub fn serialize_record<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("record types serialize infallibly")
}

pub fn deserialize_record<T: for<'de> Deserialize<'de>>(line: &str) -> Result<T, ModelError> {
    Ok(serde_json::from_str(line.trim_end_matches(['\r', '\n']))?)
}
