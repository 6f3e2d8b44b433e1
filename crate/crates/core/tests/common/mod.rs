//! Shared test data: the malformed-output parser corpus.

#![allow(dead_code)]

use std::collections::BTreeSet;

use medcal::agents::parse::parse_response;
use medcal::verification::lists::parse_numbered;

pub enum Expect {
    Specialist { answer: char, confidence: f64, flags: &'static [&'static str] },
    /// The single documented specialist error: no A-D letter anywhere.
    NoLetter,
    List { header: &'static str, numbers: &'static [usize] },
}

pub struct Case {
    pub name: &'static str,
    pub text: &'static str,
    pub expect: Expect,
}

const fn sp(name: &'static str, text: &'static str, answer: char, confidence: f64, flags: &'static [&'static str]) -> Case {
    Case { name, text, expect: Expect::Specialist { answer, confidence, flags } }
}

const fn none(name: &'static str, text: &'static str) -> Case {
    Case { name, text, expect: Expect::NoLetter }
}

const fn list(name: &'static str, header: &'static str, text: &'static str, numbers: &'static [usize]) -> Case {
    Case { name, text, expect: Expect::List { header, numbers } }
}

const VQ: &str = "VERIFICATION_QUESTIONS:";
const ANS: &str = "ANSWERS:";

pub fn corpus() -> Vec<Case> {
    vec![
        sp("well_formed", "STEP_1_ANALYSIS: a\nANSWER: B\nCONFIDENCE: 0.85\nREASONING: r", 'B', 0.85, &[]),
        sp("missing_confidence", "ANSWER: C\nREASONING: r", 'C', 0.5, &["confidence_defaulted"]),
        sp("percent_confidence", "ANSWER: A\nCONFIDENCE: 85%\nREASONING: r", 'A', 0.85, &["confidence_percent"]),
        sp("comma_decimal", "ANSWER: D\nCONFIDENCE: 0,7\nREASONING: r", 'D', 0.7, &["confidence_comma_decimal"]),
        sp("comma_percent", "ANSWER: D\nCONFIDENCE: 85,5%\nREASONING: r", 'D', 0.855, &["confidence_comma_decimal", "confidence_percent"]),
        sp("confidence_above_one", "ANSWER: B\nCONFIDENCE: 1.5\nREASONING: r", 'B', 1.0, &["confidence_clamped"]),
        sp("confidence_negative", "ANSWER: B\nCONFIDENCE: -0.2\nREASONING: r", 'B', 0.0, &["confidence_clamped"]),
        sp("confidence_bare_ninety", "ANSWER: B\nCONFIDENCE: 90\nREASONING: r", 'B', 1.0, &["confidence_clamped"]),
        sp("confidence_word", "ANSWER: A\nCONFIDENCE: high\nREASONING: r", 'A', 0.5, &["confidence_defaulted"]),
        sp("confidence_score_label", "ANSWER: A\nConfidence score: 0.9\nREASONING: r", 'A', 0.9, &[]),
        sp("confidence_equals", "ANSWER: A\nCONFIDENCE = 0.4\nREASONING: r", 'A', 0.4, &[]),
        sp("confidence_leading_dot", "ANSWER: A\nCONFIDENCE: .8\nREASONING: r", 'A', 0.8, &[]),
        sp("confidence_bracketed", "ANSWER: A\nCONFIDENCE: [0.75]\nREASONING: r", 'A', 0.75, &[]),
        sp(
            "confidence_echo_then_value",
            "CONFIDENCE: [0.0-1.0]\nANSWER: C\nCONFIDENCE: 0.3\nREASONING: r",
            'C',
            0.3,
            &[],
        ),
        sp("multi_letter_or", "ANSWER: A or C\nCONFIDENCE: 0.6\nREASONING: r", 'A', 0.6, &["answer_ambiguous"]),
        sp("multi_letter_slash", "ANSWER: B/D\nCONFIDENCE: 0.6\nREASONING: r", 'B', 0.6, &["answer_ambiguous"]),
        sp("multi_letter_comma", "ANSWER: A, B\nCONFIDENCE: 0.6\nREASONING: r", 'A', 0.6, &["answer_ambiguous"]),
        sp("multi_letter_and", "ANSWER: A and B\nCONFIDENCE: 0.6\nREASONING: r", 'A', 0.6, &["answer_ambiguous"]),
        sp("repeated_same_letter", "ANSWER: C or C\nCONFIDENCE: 0.6\nREASONING: r", 'C', 0.6, &[]),
        sp("parenthesized_letter", "ANSWER: (C)\nCONFIDENCE: 0.6\nREASONING: r", 'C', 0.6, &[]),
        sp("bold_value", "ANSWER: **B**\nCONFIDENCE: 0.6\nREASONING: r", 'B', 0.6, &[]),
        sp("bold_label", "**ANSWER:** B\nCONFIDENCE: 0.6\nREASONING: r", 'B', 0.6, &[]),
        sp("markdown_heading", "### ANSWER: C\nCONFIDENCE: 0.6\nREASONING: r", 'C', 0.6, &[]),
        sp("lowercase_field", "answer: c\nconfidence: 0.6\nreasoning: r", 'C', 0.6, &[]),
        sp("letter_with_text", "ANSWER: B. Pulmonary embolism\nCONFIDENCE: 0.6\nREASONING: r", 'B', 0.6, &[]),
        sp("sentence_value", "ANSWER: The correct option is D\nCONFIDENCE: 0.6\nREASONING: r", 'D', 0.6, &[]),
        sp("final_answer_label", "Final Answer: D\nCONFIDENCE: 0.6\nREASONING: r", 'D', 0.6, &[]),
        sp("fullwidth_colon", "ANSWER： A\nCONFIDENCE: 0.6\nREASONING: r", 'A', 0.6, &[]),
        sp("crlf_line_endings", "ANSWER: C\r\nCONFIDENCE: 0.65\r\nREASONING: r\r\n", 'C', 0.65, &[]),
        sp(
            "template_echo_then_answer",
            "ANSWER: [Single letter: A, B, C, or D]\nCONFIDENCE: [0.0-1.0]\nANSWER: C\nCONFIDENCE: 0.7\nREASONING: r",
            'C',
            0.7,
            &[],
        ),
        sp(
            "template_echo_only",
            "ANSWER: [Single letter: A, B, C, or D]\nCONFIDENCE: [0.0-1.0]",
            'A',
            0.5,
            &["answer_regex_fallback", "confidence_defaulted", "reasoning_from_raw"],
        ),
        sp(
            "prose_answer",
            "I believe the answer is B given the findings.",
            'B',
            0.5,
            &["answer_regex_fallback", "confidence_defaulted", "reasoning_from_raw"],
        ),
        sp(
            "letter_anywhere",
            "Option C is correct.",
            'C',
            0.5,
            &["answer_anywhere_fallback", "confidence_defaulted", "reasoning_from_raw"],
        ),
        sp(
            "steps_without_reasoning",
            "STEP_1_ANALYSIS: x\nSTEP_5_DECISION: y\nANSWER: A\nCONFIDENCE: 0.6",
            'A',
            0.6,
            &["reasoning_from_steps"],
        ),
        sp(
            "empty_reasoning_field",
            "STEP_1_ANALYSIS: x\nANSWER: A\nCONFIDENCE: 0.6\nREASONING:",
            'A',
            0.6,
            &["reasoning_from_steps"],
        ),
        sp("no_reasoning_no_steps", "ANSWER: D\nCONFIDENCE: 0.2", 'D', 0.2, &["reasoning_from_raw"]),
        sp(
            "multiline_reasoning",
            "ANSWER: B\nCONFIDENCE: 0.7\nREASONING: line one\nline two",
            'B',
            0.7,
            &[],
        ),
        none("no_letter", "I cannot determine this."),
        none("empty", ""),
        none("lowercase_prose_letter", "the answer is probably b"),
        none("out_of_range_letter", "ANSWER: E\nCONFIDENCE: 0.5\nREASONING: none"),
        list("dot_numbering", VQ, "VERIFICATION_QUESTIONS:\n1. a\n2. b\n3. c\n4. d", &[1, 2, 3, 4]),
        list("paren_numbering", VQ, "VERIFICATION_QUESTIONS:\n1) a\n2) b", &[1, 2]),
        list("wrapped_numbering", VQ, "(1) a\n(2) b\n(3) c", &[1, 2, 3]),
        list("bracket_numbering", ANS, "ANSWERS:\n[1] a\n[2] b", &[1, 2]),
        list("bold_numbering", ANS, "ANSWERS:\n**1.** a\n**2.** b", &[1, 2]),
        list("q_prefix", VQ, "Q1: a\nQ2: b", &[1, 2]),
        list("answer_prefix", ANS, "ANSWERS:\nAnswer 1: x\nAnswer 2: y", &[1, 2]),
        list("a_prefix", ANS, "A1: x\nA2: y", &[1, 2]),
        list("dash_separator", ANS, "1 - a\n2 - b", &[1, 2]),
        list("bullets_only", ANS, "ANSWERS:\n- a\n- b\n- c", &[1, 2, 3]),
        list("gap_in_numbering", ANS, "ANSWERS:\n1. a\n3. c", &[1, 3]),
        list("duplicate_numbers", ANS, "ANSWERS:\n1. a\n1. b\n2. c", &[1, 2]),
        list("no_list", ANS, "I could not answer.", &[]),
        list("six_items", VQ, "1. a\n2. b\n3. c\n4. d\n5. e\n6. f", &[1, 2, 3, 4, 5, 6]),
        list("continuation_lines", ANS, "ANSWERS:\n1. a\n   more detail\n2. b", &[1, 2]),
        list("lowercase_header", ANS, "answers:\n1. x", &[1]),
        list("numbers_before_header", ANS, "2. preamble\nANSWERS:\n1. x\n2. y", &[1, 2]),
    ]
}

pub fn flag_names(flags: &BTreeSet<medcal::model::ParseFlag>) -> BTreeSet<String> {
    flags.iter().map(|f| serde_json::to_value(f).unwrap().as_str().unwrap().to_string()).collect()
}

/// Checks one case; `Err` carries a description of the mismatch.
pub fn check(case: &Case) -> Result<(), String> {
    match &case.expect {
        Expect::Specialist { answer, confidence, flags } => {
            let p = parse_response(case.text).ok_or("no letter found")?;
            let want: BTreeSet<String> = flags.iter().map(|s| s.to_string()).collect();
            let got = flag_names(&p.flags);
            if p.answer.as_char() != *answer || (p.confidence - confidence).abs() > 1e-12 || got != want {
                return Err(format!("got {} {} {:?}", p.answer, p.confidence, got));
            }
        }
        Expect::NoLetter => {
            if let Some(p) = parse_response(case.text) {
                return Err(format!("expected no letter, got {}", p.answer));
            }
        }
        Expect::List { header, numbers } => {
            let got: Vec<usize> = parse_numbered(case.text, header).into_keys().collect();
            if got != *numbers {
                return Err(format!("got items {got:?}"));
            }
        }
    }
    Ok(())
}
