//! S-score weighted fusion of specialist answers.
//!
//! Each candidate letter scores `votes × mean supporter S`. The highest
//! score wins; ties go to the candidate with the larger maximum supporter
//! S-score, then to the earlier letter. Confidence is the largest S-score
//! when every agent agrees, otherwise `v·mean + (1−v)·min` over the winner's
//! supporters with `v` the winner's vote fraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AnswerLetter, CandidateScore, FusionOutcome};

pub const DEFAULT_AGENTS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("no specialist inputs")]
    EmptyInput,
    #[error("S-score {0} outside [0,1]")]
    BadScore(f64),
    #[error("expected {expected} inputs, got {got}")]
    WrongCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub answer: AnswerLetter,
    pub s_score: f64,
}

impl Vote {
    pub fn new(answer: AnswerLetter, s_score: f64) -> Self {
        Vote { answer, s_score }
    }
}

pub fn fuse(inputs: &[Vote], expected_agents: usize) -> Result<FusionOutcome, FusionError> {
    if inputs.is_empty() {
        return Err(FusionError::EmptyInput);
    }
    if inputs.len() != expected_agents {
        return Err(FusionError::WrongCount { expected: expected_agents, got: inputs.len() });
    }
    if let Some(bad) = inputs.iter().find(|v| !(0.0..=1.0).contains(&v.s_score)) {
        return Err(FusionError::BadScore(bad.s_score));
    }

    let mut supporters: BTreeMap<AnswerLetter, Vec<f64>> = BTreeMap::new();
    for v in inputs {
        supporters.entry(v.answer).or_default().push(v.s_score);
    }

    let candidate_scores: BTreeMap<AnswerLetter, CandidateScore> = supporters
        .iter_mut()
        .map(|(letter, scores)| {
            // Sorted summation keeps the result independent of input order.
            scores.sort_by(f64::total_cmp);
            let votes = scores.len();
            let mean_s = scores.iter().sum::<f64>() / votes as f64;
            let cs = CandidateScore {
                votes,
                mean_s,
                min_s: scores[0],
                max_s: scores[votes - 1],
                score: votes as f64 * mean_s,
            };
            (*letter, cs)
        })
        .collect();

    let best = candidate_scores.values().map(|c| c.score).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<AnswerLetter> = candidate_scores.iter().filter(|(_, c)| c.score == best).map(|(l, _)| *l).collect();
    let tie_broken = tied.len() > 1;
    // `tied` is in letter order, so keeping the first maximum honours A<B<C<D.
    let final_answer = tied
        .iter()
        .copied()
        .reduce(|a, b| if candidate_scores[&b].max_s > candidate_scores[&a].max_s { b } else { a })
        .expect("at least one candidate");

    let win = candidate_scores[&final_answer];
    let unanimous = candidate_scores.len() == 1;
    let vote_fraction = win.votes as f64 / expected_agents as f64;
    let calibrated_confidence = if unanimous {
        inputs.iter().map(|v| v.s_score).fold(0.0, f64::max)
    } else {
        vote_fraction * win.mean_s + (1.0 - vote_fraction) * win.min_s
    };

    Ok(FusionOutcome {
        final_answer,
        calibrated_confidence: calibrated_confidence.clamp(0.0, 1.0),
        candidate_scores,
        vote_fraction,
        unanimous,
        tie_broken,
    })
}
