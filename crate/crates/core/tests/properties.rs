use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use medcal::fusion::{fuse, Vote};
use medcal::metrics::{auroc, ece, Outcome};
use medcal::model::*;
use medcal::verification::{jaccard, s_score};

fn letter() -> impl Strategy<Value = AnswerLetter> {
    prop::sample::select(AnswerLetter::ALL.to_vec())
}

fn specialist() -> impl Strategy<Value = SpecialistIdentity> {
    prop::sample::select(Specialty::ALL.to_vec()).prop_map(SpecialistIdentity::new)
}

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0]
}

fn variant() -> impl Strategy<Value = SScoreVariant> {
    prop_oneof![
        Just(SScoreVariant::Multiplicative),
        Just(SScoreVariant::PureConsistency),
        unit().prop_map(|alpha| SScoreVariant::WeightedAverage { alpha }),
    ]
}

fn parse_flag() -> impl Strategy<Value = ParseFlag> {
    prop::sample::select(vec![
        ParseFlag::AnswerRegexFallback,
        ParseFlag::AnswerAnywhereFallback,
        ParseFlag::AnswerAmbiguous,
        ParseFlag::ConfidenceDefaulted,
        ParseFlag::ConfidencePercent,
        ParseFlag::ConfidenceCommaDecimal,
        ParseFlag::ConfidenceClamped,
        ParseFlag::ReasoningFromSteps,
        ParseFlag::ReasoningFromRaw,
    ])
}

fn response() -> impl Strategy<Value = SpecialistResponse> {
    (specialist(), letter(), ".{0,40}", unit(), prop::collection::btree_set(parse_flag(), 0..4), ".{0,60}").prop_map(
        |(specialist, answer, reasoning, initial_confidence, parse_flags, raw_text)| SpecialistResponse {
            specialist,
            answer,
            reasoning,
            initial_confidence,
            parse_flags,
            raw_text,
        },
    )
}

fn trace() -> impl Strategy<Value = VerificationTrace> {
    (specialist(), prop::collection::vec(("[a-z ]{1,20}", prop::option::of((unit(), unit(), any::<bool>()))), 0..=4), unit(), variant())
        .prop_map(|(specialist, items, c, variant)| {
            let questions: Vec<String> = items.iter().map(|(q, _)| q.clone()).collect();
            let pair_results: Vec<Option<PairResult>> = items
                .iter()
                .map(|(_, p)| p.map(|(similarity, content_similarity, consistent)| PairResult { similarity, content_similarity, consistent }))
                .collect();
            let answers: Vec<Option<String>> =
                pair_results.iter().map(|p| p.map(|_| "answer text".to_string())).collect();
            let parsed = pair_results.iter().flatten().count();
            let bad = pair_results.iter().flatten().filter(|p| !p.consistent).count();
            let (inconsistency, failure, flags) = if parsed == 0 {
                (0.5, Some(VerificationFailure::NoPairsParsed), BTreeSet::from([TraceFlag::NeutralInconsistency]))
            } else {
                (bad as f64 / parsed as f64, None, BTreeSet::new())
            };
            VerificationTrace {
                specialist,
                questions,
                independent_answers: answers.clone(),
                reference_answers: answers,
                pair_results,
                parsed_pairs: parsed,
                inconsistency,
                initial_confidence: c,
                s_score: s_score(c, inconsistency, variant),
                variant,
                failure,
                flags,
            }
        })
}

fn record() -> impl Strategy<Value = EvaluationRecord> {
    (
        "[a-z0-9-]{1,12}",
        prop::sample::select(ConfigId::ALL.to_vec()),
        letter(),
        letter(),
        unit(),
        prop::collection::vec(response(), 1..=4),
        prop::collection::vec(trace(), 0..=4),
        any::<u32>(),
    )
        .prop_map(|(question_id, config, gold, predicted, confidence, specialist_responses, verification_traces, t)| {
            let fusion = config.uses_panel().then(|| {
                let votes: Vec<Vote> = specialist_responses
                    .iter()
                    .map(|r| Vote::new(r.answer, r.initial_confidence))
                    .collect();
                fuse(&votes, votes.len()).unwrap()
            });
            EvaluationRecord {
                question_id,
                config,
                gold,
                predicted,
                confidence,
                correct: gold == predicted,
                specialist_responses,
                verification_traces,
                fusion,
                wall_time_ms: t as u64,
                llm_calls: config.call_budget(),
            }
        })
}

fn question() -> impl Strategy<Value = QuestionRecord> {
    ("[a-z0-9]{1,8}", "[A-Za-z][A-Za-z ?]{0,40}", prop::array::uniform4("[a-z]{1,10}"), letter()).prop_map(|(id, stem, opts, gold)| {
        QuestionRecord::new(id, stem, opts, gold, Source::MedQA).unwrap().with_meta("k", "v")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn evaluation_record_round_trips(r in record()) {
        r.validate().unwrap();
        let line = serialize_record(&r);
        prop_assert!(!line.contains('\n'));
        let back: EvaluationRecord = deserialize_record(&line).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn question_record_round_trips(q in question()) {
        let back: QuestionRecord = deserialize_record(&serialize_record(&q)).unwrap();
        prop_assert_eq!(back, q);
    }
}

fn token_set() -> impl Strategy<Value = BTreeSet<String>> {
    prop::collection::btree_set("[a-e]{1,2}", 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn jaccard_symmetric_and_bounded(a in token_set(), b in token_set()) {
        let j = jaccard(&a, &b);
        prop_assert_eq!(j, jaccard(&b, &a));
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(jaccard(&a, &a), 1.0);
    }
}

fn votes() -> impl Strategy<Value = Vec<Vote>> {
    prop::collection::vec((letter(), unit()), 4).prop_map(|v| v.into_iter().map(|(l, s)| Vote::new(l, s)).collect())
}

proptest! {
    #[test]
    fn fusion_invariant_under_permutation(v in votes(), perm in Just(()).prop_perturb(|_, mut rng| {
        let mut idx = vec![0usize, 1, 2, 3];
        for i in (1..4).rev() {
            idx.swap(i, (rng.next_u32() as usize) % (i + 1));
        }
        idx
    })) {
        let permuted: Vec<Vote> = perm.iter().map(|&i| v[i]).collect();
        prop_assert_eq!(fuse(&v, 4).unwrap(), fuse(&permuted, 4).unwrap());
    }

    #[test]
    fn fusion_confidence_in_unit_and_winner_has_max_score(v in votes()) {
        let f = fuse(&v, 4).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.calibrated_confidence));
        let best = f.candidate_scores.values().map(|c| c.score).fold(f64::MIN, f64::max);
        prop_assert_eq!(f.candidate_scores[&f.final_answer].score, best);
        let votes: usize = f.candidate_scores.values().map(|c| c.votes).sum();
        prop_assert_eq!(votes, 4);
    }

    #[test]
    fn fusion_winner_stable_under_positive_scaling(v in votes(), k in 0.01f64..1.0) {
        // Scaling by a power of two is exact, so scores scale without rounding.
        let k = 2f64.powi(-((k * 10.0) as i32));
        let scaled: Vec<Vote> = v.iter().map(|x| Vote::new(x.answer, x.s_score * k)).collect();
        let a = fuse(&v, 4).unwrap();
        let b = fuse(&scaled, 4).unwrap();
        prop_assert_eq!(a.final_answer, b.final_answer);
        prop_assert_eq!(a.calibrated_confidence * k, b.calibrated_confidence);
    }

    #[test]
    fn ece_invariant_under_record_order(mut o in prop::collection::vec((unit(), any::<bool>()), 1..200)) {
        let a: Vec<Outcome> = o.iter().map(|&(c, y)| Outcome::new(c, y)).collect();
        o.reverse();
        let b: Vec<Outcome> = o.iter().map(|&(c, y)| Outcome::new(c, y)).collect();
        let (ea, eb) = (ece(&a, 5).unwrap().ece, ece(&b, 5).unwrap().ece);
        prop_assert!((ea - eb).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ea));
    }

    #[test]
    fn auroc_invariant_under_monotone_transform(o in prop::collection::vec((unit(), any::<bool>()), 2..200)) {
        prop_assume!(o.iter().any(|x| x.1) && o.iter().any(|x| !x.1));
        let a: Vec<Outcome> = o.iter().map(|&(c, y)| Outcome::new(c, y)).collect();
        let b: Vec<Outcome> = o.iter().map(|&(c, y)| Outcome::new(c * c, y)).collect();
        let flipped: Vec<Outcome> = o.iter().map(|&(c, y)| Outcome::new(c, !y)).collect();
        let (x, y) = (auroc(&a).unwrap(), auroc(&b).unwrap());
        // squaring can merge distinct tiny confidences into equal values
        if a.iter().map(|r| (r.confidence * r.confidence).to_bits()).collect::<BTreeSet<_>>().len()
            == a.iter().map(|r| r.confidence.to_bits()).collect::<BTreeSet<_>>().len()
        {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((auroc(&flipped).unwrap() - (1.0 - x)).abs() < 1e-12);
    }

    #[test]
    fn s_score_in_unit(c in unit(), i in unit(), v in variant()) {
        prop_assert!((0.0..=1.0).contains(&s_score(c, i, v)));
    }
}

#[test]
fn letter_order_is_stable() {
    let mut m = BTreeMap::new();
    for l in [AnswerLetter::D, AnswerLetter::B, AnswerLetter::A, AnswerLetter::C] {
        m.insert(l, ());
    }
    assert_eq!(m.into_keys().collect::<Vec<_>>(), AnswerLetter::ALL.to_vec());
}
