use crate::model::{PairResult, SScoreVariant};

/// Inconsistency assigned when no pair could be scored.
pub const NEUTRAL_INCONSISTENCY: f64 = 0.5;

/// Fraction of parsed pairs that are inconsistent, with the parsed count.
/// Returns `None` for zero parsed pairs; the caller applies its fallback.
pub fn inconsistency_score<'a>(pairs: impl IntoIterator<Item = &'a PairResult>) -> Option<(f64, usize)> {
    let (bad, n) = pairs
        .into_iter()
        .fold((0usize, 0usize), |(bad, n), p| (bad + usize::from(!p.consistent), n + 1));
    (n > 0).then(|| (bad as f64 / n as f64, n))
}

pub fn s_score(initial_confidence: f64, inconsistency: f64, variant: SScoreVariant) -> f64 {
    let s = match variant {
        SScoreVariant::Multiplicative => initial_confidence * (1.0 - inconsistency),
        SScoreVariant::WeightedAverage { alpha } => alpha * initial_confidence + (1.0 - alpha) * (1.0 - inconsistency),
        SScoreVariant::PureConsistency => 1.0 - inconsistency,
    };
    s.clamp(0.0, 1.0)
}
