use std::fs;

use medcal::backend::{CountingBackend, MockScript, ScriptedBackend};
use medcal::dataset::{build_subset, curate, curate_to_dir, read_curation, DatasetError, StopRule, SubsetSpec};
use medcal::fixtures::{curation_letters, curation_questions, curation_script, FailAfter};
use medcal::model::AnswerLetter;

fn backend(n: usize) -> ScriptedBackend {
    ScriptedBackend::new(MockScript::new(curation_script(&curation_questions(n))).unwrap())
}

#[test]
fn labels_follow_two_of_four_rule() {
    let qs = curation_questions(40);
    let out = curate(&qs, &backend(40), StopRule { target_disagreement: 1000, target_agreement: 1000 }).unwrap();
    assert_eq!(out.processed, 40);
    assert!(!out.stopped_early);
    for (i, e) in out.entries.iter().enumerate() {
        let letters = curation_letters(i);
        let distinct: std::collections::BTreeSet<AnswerLetter> = letters.into_iter().collect();
        assert_eq!(e.record.distinct_answer_count, distinct.len());
        assert_eq!(e.record.high_disagreement, distinct.len() >= 2);
        assert_eq!(e.record.is_agreement(), distinct.len() == 1);
    }
}

#[test]
fn default_rule_stops_at_question_400() {
    let qs = curation_questions(1000);
    let counting = CountingBackend::new(backend(1000));
    let out = curate(&qs, &counting, StopRule::default()).unwrap();
    assert_eq!(out.processed, 400);
    assert_eq!(out.agreement, 60);
    assert!(out.disagreement >= 220);
    assert!(out.stopped_early);
    assert_eq!(counting.calls(), 1600);
}

#[test]
fn resume_after_interrupt_equals_uninterrupted() {
    let qs = curation_questions(1000);
    let full = tempfile::tempdir().unwrap();
    curate_to_dir(&qs, &backend(1000), StopRule::default(), full.path()).unwrap();

    let part = tempfile::tempdir().unwrap();
    let failing = FailAfter::new(backend(1000), 4 * 130 + 2);
    match curate_to_dir(&qs, &failing, StopRule::default(), part.path()) {
        Err(DatasetError::Curation { processed, .. }) => assert_eq!(processed, 130),
        other => panic!("{other:?}"),
    }
    assert_eq!(read_curation(&part.path().join("curation.jsonl")).unwrap().len(), 130);

    let counting = CountingBackend::new(backend(1000));
    let out = curate_to_dir(&qs, &counting, StopRule::default(), part.path()).unwrap();
    assert_eq!(out.processed, 400);
    assert_eq!(counting.calls(), 4 * 270);
    assert_eq!(
        fs::read(full.path().join("curation.jsonl")).unwrap(),
        fs::read(part.path().join("curation.jsonl")).unwrap()
    );
    let cp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(part.path().join("curation.checkpoint.json")).unwrap()).unwrap();
    assert_eq!(cp["processed"], 400);
}

#[test]
fn resume_against_different_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let qs = curation_questions(60);
    curate_to_dir(&qs, &backend(60), StopRule { target_disagreement: 5, target_agreement: 1 }, dir.path()).unwrap();
    let mut other = curation_questions(60);
    other.swap(0, 1);
    assert!(matches!(
        curate_to_dir(&other, &backend(60), StopRule::default(), dir.path()),
        Err(DatasetError::CheckpointMismatch { line: 1, .. })
    ));
}

#[test]
fn subset_from_curated_pool_is_seed_deterministic() {
    let qs = curation_questions(1000);
    let pool = curate(&qs, &backend(1000), StopRule::default()).unwrap().entries;
    let spec = SubsetSpec::with_default_quotas(250, 2024).unwrap();
    let a = build_subset(&pool, &spec).unwrap();
    assert_eq!(a, build_subset(&pool, &spec).unwrap());
    assert_eq!(a.len(), 250);
    let b = build_subset(&pool, &SubsetSpec::with_default_quotas(250, 2025).unwrap()).unwrap();
    assert_ne!(a, b);
    let small = build_subset(&pool, &SubsetSpec::with_default_quotas(100, 2024).unwrap()).unwrap();
    assert_eq!(small.len(), 100);
}
