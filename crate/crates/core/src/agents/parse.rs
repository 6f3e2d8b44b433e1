//! Parsing of free-text specialist completions.
//!
//! The answer letter is resolved by a three-level fallback chain:
//! the `ANSWER:` field, then the first standalone A-D token after the last
//! "answer" mention, then the first standalone A-D token anywhere. Every
//! fallback and normalization is recorded as a [`ParseFlag`].

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use crate::model::{AnswerLetter, ParseFlag};

pub const DEFAULT_CONFIDENCE: f64 = 0.5;

static ANSWER_FIELD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[\s>*#_-]*(?:final\s+)?answer[\s*_]*[:：][ \t]*(.*)$").unwrap());
static CONFIDENCE_FIELD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?im)^[\s>*#_-]*(?:final\s+)?confidence(?:[ \t]+score)?[\s*_]*[:：=][ \t]*(.*)$").unwrap()
});
static REASONING_FIELD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[\s>*#_-]*reasoning[\s*_]*[:：][ \t]*").unwrap());
static FIELD_START: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[\s>*#_-]*(?:(?:final\s+)?answer|(?:final\s+)?confidence|reasoning|step[ _]?\d)").unwrap()
});
static STEP_ONE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?im)^[\s>*#_-]*step[ _]?1").unwrap());
static LETTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-D])\b").unwrap());
static MULTI_LETTER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\W*([A-D])\)?\s*(?:/|,|&|\bor\b|\band\b)\s*\(?([A-D])\b").unwrap()
});
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[\s*\[(]*(-?(?:\d+(?:[.,]\d+)?|[.,]\d+))\s*(%)?").unwrap());

/// Fields recovered from one completion.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub answer: AnswerLetter,
    pub confidence: f64,
    pub reasoning: String,
    pub flags: BTreeSet<ParseFlag>,
}

/// Returns `None` only when the text holds no A-D token at all.
pub fn parse_response(raw: &str) -> Option<ParsedResponse> {
    let mut flags = BTreeSet::new();
    let answer = parse_answer(raw, &mut flags)?;
    let confidence = parse_confidence(raw, &mut flags);
    let reasoning = parse_reasoning(raw, &mut flags);
    Some(ParsedResponse { answer, confidence, reasoning, flags })
}

fn first_letter(text: &str) -> Option<AnswerLetter> {
    LETTER
        .captures(text)
        .and_then(|c| c[1].chars().next())
        .and_then(AnswerLetter::from_char)
}

/// Letter from one `ANSWER:` field value.
fn letter_from_field(value: &str, flags: &mut BTreeSet<ParseFlag>) -> Option<AnswerLetter> {
    let bare = value.trim_matches(|c: char| !c.is_alphanumeric());
    if bare.chars().count() == 1 {
        if let Some(l) = bare.chars().next().and_then(AnswerLetter::from_char) {
            return Some(l);
        }
    }
    if value.contains("Single letter") {
        // echoed template line
        return None;
    }
    if let Some(c) = MULTI_LETTER.captures(value) {
        if c[1] != c[2] {
            flags.insert(ParseFlag::AnswerAmbiguous);
        }
        return c[1].chars().next().and_then(AnswerLetter::from_char);
    }
    first_letter(value)
}

fn parse_answer(raw: &str, flags: &mut BTreeSet<ParseFlag>) -> Option<AnswerLetter> {
    let values: Vec<&str> = ANSWER_FIELD.captures_iter(raw).map(|c| c.get(1).unwrap().as_str()).collect();
    for value in values.iter().rev() {
        let mut local = BTreeSet::new();
        if let Some(l) = letter_from_field(value, &mut local) {
            flags.extend(local);
            return Some(l);
        }
    }
    let lower = raw.to_ascii_lowercase();
    if let Some(pos) = lower.rfind("answer") {
        if let Some(l) = first_letter(&raw[pos + "answer".len()..]) {
            flags.insert(ParseFlag::AnswerRegexFallback);
            return Some(l);
        }
    }
    let l = first_letter(raw)?;
    flags.insert(ParseFlag::AnswerAnywhereFallback);
    Some(l)
}

/// Parses one confidence value, normalizing percent and comma-decimal forms.
pub fn parse_confidence_value(value: &str, flags: &mut BTreeSet<ParseFlag>) -> Option<f64> {
    if value.contains("0.0-1.0") {
        return None;
    }
    let caps = NUMBER.captures(value)?;
    let mut num = caps[1].to_string();
    if num.contains(',') {
        num = num.replace(',', ".");
        flags.insert(ParseFlag::ConfidenceCommaDecimal);
    }
    let mut v: f64 = num.parse().ok()?;
    if caps.get(2).is_some() {
        v /= 100.0;
        flags.insert(ParseFlag::ConfidencePercent);
    }
    if !v.is_finite() {
        return None;
    }
    let clamped = v.clamp(0.0, 1.0);
    if clamped != v {
        flags.insert(ParseFlag::ConfidenceClamped);
    }
    Some(clamped)
}

fn parse_confidence(raw: &str, flags: &mut BTreeSet<ParseFlag>) -> f64 {
    let values: Vec<&str> = CONFIDENCE_FIELD.captures_iter(raw).map(|c| c.get(1).unwrap().as_str()).collect();
    for value in values.iter().rev() {
        let mut local = BTreeSet::new();
        if let Some(v) = parse_confidence_value(value, &mut local) {
            flags.extend(local);
            return v;
        }
    }
    flags.insert(ParseFlag::ConfidenceDefaulted);
    DEFAULT_CONFIDENCE
}

fn parse_reasoning(raw: &str, flags: &mut BTreeSet<ParseFlag>) -> String {
    if let Some(m) = REASONING_FIELD.find_iter(raw).last() {
        let body = take_until_field(&raw[m.end()..]);
        if !body.is_empty() {
            return body;
        }
    }
    if let Some(m) = STEP_ONE.find(raw) {
        let tail = &raw[m.start()..];
        let end = ANSWER_FIELD.find(tail).map_or(tail.len(), |a| a.start());
        let body = tail[..end].trim();
        if !body.is_empty() {
            flags.insert(ParseFlag::ReasoningFromSteps);
            return body.to_string();
        }
    }
    flags.insert(ParseFlag::ReasoningFromRaw);
    raw.trim().to_string()
}

/// Text up to the next line that opens another known field.
fn take_until_field(text: &str) -> String {
    let mut lines = text.lines();
    let mut out = vec![lines.next().unwrap_or("")];
    out.extend(lines.take_while(|l| !FIELD_START.is_match(l)));
    out.join("\n").trim().to_string()
}

/// First standalone A-D token; used for letter-only curation replies.
pub fn parse_curation_letter(raw: &str) -> Option<AnswerLetter> {
    let bare = raw.trim().trim_matches(|c: char| !c.is_alphanumeric());
    if bare.chars().count() == 1 {
        if let Some(l) = bare.chars().next().and_then(AnswerLetter::from_char) {
            return Some(l);
        }
    }
    first_letter(raw)
}
