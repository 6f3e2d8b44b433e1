//! Scripted scenarios for tests and demos.
//!
//! [`scenario`] is a ten-question panel fixture. Every specialist who picks
//! the gold answer verifies cleanly (I = 0). Every specialist who picks a
//! wrong answer is overconfident and sees two of its four verification
//! pairs disagree (I = 0.5).
//!
//! | questions | panel                                            |
//! |-----------|--------------------------------------------------|
//! | Q01–Q05   | all correct; respiratory 0.9, others 0.8         |
//! | Q06       | respiratory wrong (0.95), others correct (0.7)   |
//! | Q07       | neurology wrong (0.95), others correct (0.7)     |
//! | Q08–Q09   | respiratory + cardiology wrong (0.95), others 0.6|
//! | Q10       | all wrong, 0.9                                   |

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};

use crate::agents::render_curation_prompt;
use crate::backend::{request_key, BackendError, ChatBackend, ChatRequest, Completion, MockScript, ScriptEntry, Stage};
use crate::model::{serialize_record, AnswerLetter, QuestionRecord, Source, SpecialistIdentity, Specialty};

pub const SCENARIO_SIZE: usize = 10;

#[derive(Debug, Clone, Copy)]
pub struct Pick {
    pub answer: AnswerLetter,
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioQuestion {
    pub question: QuestionRecord,
    /// In [`Specialty::ALL`] order.
    pub picks: [Pick; 4],
}

const STEMS: [&str; SCENARIO_SIZE] = [
    "A 62-year-old smoker reports progressive exertional dyspnea and chronic productive cough.",
    "A 45-year-old woman develops sudden pleuritic chest pain after a long-haul flight.",
    "A 70-year-old man has crushing substernal pain radiating to the left arm.",
    "A 30-year-old man presents with the worst headache of his life and neck stiffness.",
    "A 55-year-old woman vomits bright red blood after several days of heavy drinking.",
    "A 25-year-old athlete collapses during exercise with a harsh systolic murmur.",
    "A 68-year-old woman has sudden right-sided weakness and slurred speech.",
    "A 50-year-old man with cirrhosis develops confusion and asterixis.",
    "A 40-year-old woman has episodic wheeze worse at night and with cold air.",
    "A 35-year-old man has burning epigastric pain relieved by meals.",
];

fn qid(i: usize) -> String {
    format!("Q{:02}", i + 1)
}

fn pick(answer: AnswerLetter, confidence: f64) -> Pick {
    Pick { answer, confidence }
}

fn other(gold: AnswerLetter) -> AnswerLetter {
    AnswerLetter::ALL[(gold.index() + 1) % 4]
}

pub fn scenario() -> Vec<ScenarioQuestion> {
    (0..SCENARIO_SIZE)
        .map(|i| {
            let gold = AnswerLetter::ALL[i % 4];
            let wrong = other(gold);
            let question = QuestionRecord::new(
                qid(i),
                format!("[{}] {} Which option is most likely?", qid(i), STEMS[i]),
                [1, 2, 3, 4].map(|k| format!("Fixture option {k} for {}", qid(i))),
                gold,
                Source::Synthetic,
            )
            .expect("fixture question is valid");
            let picks = match i {
                0..=4 => [pick(gold, 0.9), pick(gold, 0.8), pick(gold, 0.8), pick(gold, 0.8)],
                5 => [pick(wrong, 0.95), pick(gold, 0.7), pick(gold, 0.7), pick(gold, 0.7)],
                6 => [pick(gold, 0.7), pick(gold, 0.7), pick(wrong, 0.95), pick(gold, 0.7)],
                7 | 8 => [pick(wrong, 0.95), pick(wrong, 0.95), pick(gold, 0.6), pick(gold, 0.6)],
                _ => [pick(wrong, 0.9); 4],
            };
            ScenarioQuestion { question, picks }
        })
        .collect()
}

pub fn scenario_questions() -> Vec<QuestionRecord> {
    scenario().into_iter().map(|s| s.question).collect()
}

fn marker(q: &QuestionRecord, s: Specialty) -> String {
    format!("[{}/{}]", q.id, s.tag())
}

fn specialist_reply(q: &QuestionRecord, s: Specialty, p: Pick) -> String {
    format!(
        "STEP_1_ANALYSIS: Key findings reviewed from the {spec} perspective.\n\
         STEP_2_DIFFERENTIAL: Several conditions considered.\n\
         STEP_3_OPTION_EVALUATION: Each option weighed against the presentation.\n\
         STEP_4_COMPARISON: Option {a} fits best.\n\
         STEP_5_DECISION: Selecting option {a}.\n\
         ANSWER: {a}\n\
         CONFIDENCE: {c}\n\
         REASONING: {m} Option {a} best explains the presentation described in the stem.",
        spec = s.prompt_name(),
        a = p.answer,
        c = p.confidence,
        m = marker(q, s),
    )
}

fn numbered(prefix: &str, lines: &[String]) -> String {
    let mut s = String::from(prefix);
    for (i, l) in lines.iter().enumerate() {
        s.push_str(&format!("\n{}. {}", i + 1, l));
    }
    s
}

const SHARED: [&str; 4] = [
    "persistent airway inflammation narrows bronchial lumen",
    "elevated troponin indicates myocardial injury",
    "focal deficits localize cerebral lesions",
    "portal hypertension dilates esophageal varices",
];

const DIVERGENT: [&str; 2] = ["ventricular hypertrophy obstructs outflow", "hepatic encephalopathy follows ammonia accumulation"];

/// Script entries answering every request the scenario produces under C1–C4.
pub fn scenario_script() -> Vec<ScriptEntry> {
    let mut entries = Vec::new();
    for sq in scenario() {
        let q = &sq.question;
        for (s, p) in Specialty::ALL.into_iter().zip(sq.picks) {
            let m = marker(q, s);
            let system_marker = format!("specialist in {}.", s.prompt_name());
            entries.push(ScriptEntry::matching(
                [format!("[{}]", q.id), system_marker],
                Some(Stage::SpecialistAnswer),
                specialist_reply(q, s, p),
            ));
            let vqs: Vec<String> = (1..=4).map(|k| format!("{}/{k}] Which fact supports claim {k}?", &m[..m.len() - 1])).collect();
            entries.push(ScriptEntry::matching([m.clone()], Some(Stage::VerifyQuestions), numbered("VERIFICATION_QUESTIONS:", &vqs)));

            let first_vq = format!("{}/1]", &m[..m.len() - 1]);
            let independent: Vec<String> = SHARED.iter().map(|t| t.to_string()).collect();
            let reference: Vec<String> = if p.answer == q.gold {
                independent.clone()
            } else {
                vec![SHARED[0].into(), SHARED[1].into(), DIVERGENT[0].into(), DIVERGENT[1].into()]
            };
            entries.push(ScriptEntry::matching([first_vq.clone()], Some(Stage::VerifyIndependent), numbered("ANSWERS:", &independent)));
            entries.push(ScriptEntry::matching([first_vq], Some(Stage::VerifyReference), numbered("ANSWERS:", &reference)));
        }
    }
    entries
}

pub fn scenario_backend() -> crate::backend::ScriptedBackend {
    crate::backend::ScriptedBackend::new(MockScript::new(scenario_script()).expect("fixture script is valid"))
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let body: String = items.iter().map(|i| serialize_record(i) + "\n").collect();
    fs::write(path, body)
}

/// Writes `subset.jsonl` and `script.jsonl` into `dir`.
pub fn write_scenario(dir: &Path) -> io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let subset = dir.join("subset.jsonl");
    let script = dir.join("script.jsonl");
    write_jsonl(&subset, &scenario_questions())?;
    write_jsonl(&script, &scenario_script())?;
    Ok((subset, script))
}

/// Letters for a curation stream where question `i` (0-based) is an
/// agreement case when `i % 20 >= 17` and a disagreement case otherwise.
///
/// Under the default 220/60 rule the sweep stops after exactly 400
/// questions: the 60th agreement case is question 399.
pub fn curation_letters(i: usize) -> [AnswerLetter; 4] {
    use AnswerLetter::*;
    let gold = AnswerLetter::ALL[i % 4];
    if i % 20 >= 17 {
        return [gold; 4];
    }
    match i % 3 {
        0 => [gold, other(gold), gold, gold],
        1 => [gold, other(gold), other(other(gold)), gold],
        _ => [A, B, C, D],
    }
}

pub fn curation_questions(n: usize) -> Vec<QuestionRecord> {
    (0..n)
        .map(|i| {
            QuestionRecord::new(
                format!("cur-{i:04}"),
                format!("Curation stem {i}: which option applies?"),
                [1, 2, 3, 4].map(|k| format!("choice {k} of {i}")),
                AnswerLetter::ALL[i % 4],
                Source::Synthetic,
            )
            .expect("curation question is valid")
        })
        .collect()
}

/// Keyed entries answering each specialist's letter request.
pub fn curation_script(questions: &[QuestionRecord]) -> Vec<ScriptEntry> {
    let panel = SpecialistIdentity::panel();
    let mut entries = Vec::with_capacity(questions.len() * 4);
    for (i, q) in questions.iter().enumerate() {
        for (sp, letter) in panel.iter().zip(curation_letters(i)) {
            let req = render_curation_prompt(sp, q).expect("curation prompt renders");
            entries.push(ScriptEntry::keyed(request_key(&req), letter.to_string()));
        }
    }
    entries
}

/// Passes the first `limit` calls through, then fails every call.
pub struct FailAfter<B> {
    inner: B,
    limit: u32,
    calls: AtomicU32,
}

impl<B: ChatBackend> FailAfter<B> {
    pub fn new(inner: B, limit: u32) -> Self {
        FailAfter { inner, limit, calls: AtomicU32::new(0) }
    }
}

impl<B: ChatBackend> ChatBackend for FailAfter<B> {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) >= self.limit {
            return Err(BackendError::EndpointUnreachable { attempts: 1, message: "injected failure".into() });
        }
        self.inner.complete(request)
    }
}
