//! Seeded evaluation-subset construction from a curated pool.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curation::CurationEntry;
use super::DatasetError;
use crate::model::QuestionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub size: usize,
    pub seed: u64,
    pub high_disagreement_quota: usize,
    pub agreement_quota: usize,
}

impl SubsetSpec {
    /// Default quotas: 250 = 220 + 30 and 100 = 80 + 20.
    pub fn with_default_quotas(size: usize, seed: u64) -> Result<Self, DatasetError> {
        let (d, a) = match size {
            250 => (220, 30),
            100 => (80, 20),
            other => {
                return Err(DatasetError::InvalidSubset(format!(
                    "no default quotas for size {other}; pass explicit quotas"
                )))
            }
        };
        Self::new(size, seed, d, a)
    }

    pub fn new(size: usize, seed: u64, high_disagreement_quota: usize, agreement_quota: usize) -> Result<Self, DatasetError> {
        if size == 0 || high_disagreement_quota + agreement_quota != size {
            return Err(DatasetError::InvalidSubset(format!(
                "quotas {high_disagreement_quota}+{agreement_quota} do not sum to size {size}"
            )));
        }
        Ok(SubsetSpec { size, seed, high_disagreement_quota, agreement_quota })
    }
}

/// Top-ranked disagreement questions plus a seeded agreement sample,
/// shuffled together with the same seed.
///
/// Disagreement questions rank by distinct-answer count (descending), then
/// dataset position (ascending).
pub fn build_subset(pool: &[CurationEntry], spec: &SubsetSpec) -> Result<Vec<QuestionRecord>, DatasetError> {
    let mut seen = HashSet::new();
    let pool: Vec<&CurationEntry> = pool.iter().filter(|e| seen.insert(e.record.question_id.as_str())).collect();

    let mut disagreement: Vec<&CurationEntry> = pool.iter().copied().filter(|e| e.record.high_disagreement).collect();
    let mut agreement: Vec<&CurationEntry> = pool.iter().copied().filter(|e| e.record.is_agreement()).collect();
    if disagreement.len() < spec.high_disagreement_quota || agreement.len() < spec.agreement_quota {
        return Err(DatasetError::InsufficientPool {
            disagreement_available: disagreement.len(),
            disagreement_needed: spec.high_disagreement_quota,
            agreement_available: agreement.len(),
            agreement_needed: spec.agreement_quota,
        });
    }

    disagreement.sort_by(|a, b| {
        b.record
            .distinct_answer_count
            .cmp(&a.record.distinct_answer_count)
            .then(a.record.dataset_index.cmp(&b.record.dataset_index))
    });
    agreement.sort_by_key(|e| e.record.dataset_index);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sampled = index::sample(&mut rng, agreement.len(), spec.agreement_quota);

    let mut subset: Vec<QuestionRecord> = disagreement[..spec.high_disagreement_quota]
        .iter()
        .map(|e| e.question.clone())
        .chain(sampled.iter().map(|i| agreement[i].question.clone()))
        .collect();
    subset.shuffle(&mut rng);
    Ok(subset)
}
