use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use medcal::fixtures::{curation_questions, curation_script, write_jsonl, write_scenario};

fn medcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medcal")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = medcal(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Scenario subset, script and a mock backend config in `dir`.
fn scenario_setup(dir: &Path) -> (PathBuf, PathBuf) {
    let (subset, _script) = write_scenario(dir).unwrap();
    let cfg = dir.join("backend.toml");
    fs::write(&cfg, "[backend]\nkind = \"scripted_mock\"\nscript_path = \"script.jsonl\"\n").unwrap();
    (subset, cfg)
}

fn strip_records(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_ms");
            v.to_string() + "\n"
        })
        .collect()
}

fn strip_time_column(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let t = header.iter().position(|h| *h == "time_min").unwrap();
    let keep = |row: &str| -> String {
        row.split(',').enumerate().filter(|(i, _)| *i != t).map(|(_, c)| c).collect::<Vec<_>>().join(",")
    };
    std::iter::once(keep(&header.join(","))).chain(lines.map(keep)).collect::<Vec<_>>().join("\n")
}

#[test]
fn run_all_writes_records_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let (subset, cfg) = scenario_setup(dir.path());
    let out = dir.path().join("out");
    ok(&["run", "--subset", s(&subset), "--config", "all", "--backend", s(&cfg), "--out", s(&out)]);
    for c in ["C1", "C2", "C3", "C4"] {
        assert!(out.join(format!("records_{c}.jsonl")).exists());
        assert!(out.join(format!("report_{c}/summary.json")).exists());
    }
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().next().unwrap().contains("delta_acc_pp"));
    assert!(out.join("run_manifest.json").exists());
}

#[test]
fn runs_are_reproducible_across_repeats_and_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let (subset, cfg) = scenario_setup(dir.path());
    let mut snapshots = Vec::new();
    for (i, par) in ["1", "1", "1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        ok(&["run", "--subset", s(&subset), "--backend", s(&cfg), "--out", s(&out), "--parallel", par]);
        let mut snap = String::new();
        for c in ["C1", "C2", "C3", "C4"] {
            snap += &strip_records(&out.join(format!("records_{c}.jsonl")));
        }
        snap += &strip_time_column(&fs::read_to_string(out.join("comparison.csv")).unwrap());
        snapshots.push(snap);
    }
    assert!(snapshots.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn single_config_suppresses_delta_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (subset, cfg) = scenario_setup(dir.path());
    let out = dir.path().join("out");
    ok(&["run", "--subset", s(&subset), "--config", "C3", "--backend", s(&cfg), "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(!csv.contains("delta"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn variant_recorded_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (subset, cfg) = scenario_setup(dir.path());
    let out = dir.path().join("out");
    ok(&["run", "--subset", s(&subset), "--config", "C2", "--backend", s(&cfg), "--variant", "wavg", "--out", s(&out)]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["s_score_variant"]["kind"], "weighted_average");
    assert_eq!(m["s_score_variant"]["alpha"], 0.65);
    assert_eq!(m["subset_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn resume_completes_remainder() {
    let dir = tempfile::tempdir().unwrap();
    let (subset, cfg) = scenario_setup(dir.path());
    let full = dir.path().join("full");
    ok(&["run", "--subset", s(&subset), "--config", "C4", "--backend", s(&cfg), "--out", s(&full)]);

    let part = dir.path().join("part");
    fs::create_dir_all(&part).unwrap();
    let head: String = fs::read_to_string(full.join("records_C4.jsonl")).unwrap().lines().take(6).map(|l| l.to_string() + "\n").collect();
    fs::write(part.join("records_C4.jsonl"), head).unwrap();
    ok(&["run", "--subset", s(&subset), "--config", "C4", "--backend", s(&cfg), "--out", s(&part), "--resume"]);
    assert_eq!(strip_records(&full.join("records_C4.jsonl")), strip_records(&part.join("records_C4.jsonl")));
}

#[test]
fn report_reproduces_run_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (subset, cfg) = scenario_setup(dir.path());
    let out = dir.path().join("out");
    ok(&["run", "--subset", s(&subset), "--backend", s(&cfg), "--out", s(&out)]);
    let rep = dir.path().join("rep");
    let recs: Vec<String> = ["C1", "C2", "C3", "C4"].iter().map(|c| s(&out.join(format!("records_{c}.jsonl"))).to_string()).collect();
    let mut args = vec!["report", "--out", s(&rep), "--svg", "--records"];
    args.extend(recs.iter().map(String::as_str));
    ok(&args);
    for c in ["C1", "C2", "C3", "C4"] {
        for f in ["summary.json", "reliability.csv", "calibration_hist.csv", "confidence_hist.csv", "roc.csv", "quarantined.json"] {
            let a = fs::read(out.join(format!("report_{c}/{f}"))).unwrap();
            let b = fs::read(rep.join(format!("report_{c}/{f}"))).unwrap();
            assert_eq!(a, b, "{c}/{f}");
        }
        for f in ["reliability.svg", "calibration_hist.svg", "confidence_hist.svg", "roc.svg"] {
            assert!(rep.join(format!("report_{c}/{f}")).exists());
        }
    }
    assert_eq!(fs::read(out.join("comparison.csv")).unwrap(), fs::read(rep.join("comparison.csv")).unwrap());
}

#[test]
fn report_two_files_side_by_side() {
    let dir = tempfile::tempdir().unwrap();
    let (subset, cfg) = scenario_setup(dir.path());
    let out = dir.path().join("out");
    ok(&["run", "--subset", s(&subset), "--config", "C1,C4", "--backend", s(&cfg), "--out", s(&out)]);
    let rep = dir.path().join("rep");
    let o = ok(&[
        "report",
        "--out",
        s(&rep),
        "--records",
        s(&out.join("records_C1.jsonl")),
        s(&out.join("records_C4.jsonl")),
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("C1") && text.contains("C4"));
    assert_eq!(fs::read_to_string(rep.join("comparison.csv")).unwrap().lines().count(), 3);
}

#[test]
fn report_on_corrupt_records_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("records_C1.jsonl");
    fs::write(&p, "{not json}\n").unwrap();
    let o = medcal(&["report", "--records", s(&p), "--out", s(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("records_C1.jsonl:1"));
}

fn medqa_rows(n: usize) -> String {
    curation_questions(n)
        .iter()
        .map(|q| {
            let opts: serde_json::Map<String, serde_json::Value> =
                q.options.iter().map(|(l, t)| (l.to_string(), t.clone().into())).collect();
            serde_json::json!({"id": q.id, "question": q.stem, "options": opts, "answer_idx": q.gold.to_string()}).to_string() + "\n"
        })
        .collect()
}

fn curation_setup(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let input = dir.join("medqa.jsonl");
    fs::write(&input, medqa_rows(n)).unwrap();
    write_jsonl(&dir.join("curation_script.jsonl"), &curation_script(&curation_questions(n))).unwrap();
    let cfg = dir.join("curate.toml");
    fs::write(&cfg, "[backend]\nkind = \"scripted_mock\"\nscript_path = \"curation_script.jsonl\"\n").unwrap();
    (input, cfg)
}

#[test]
fn curate_then_subset() {
    let dir = tempfile::tempdir().unwrap();
    let (input, cfg) = curation_setup(dir.path(), 120);
    let out = dir.path().join("cur");
    let o = ok(&["curate", "--dataset", "medqa", "--input", s(&input), "--backend", s(&cfg), "--out", s(&out), "--targets", "40,9"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("processed 60 questions"));
    let curation = out.join("curation.jsonl");
    assert_eq!(fs::read_to_string(&curation).unwrap().lines().count(), 60);

    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        ok(&["subset", "--curation", s(&curation), "--size", "20", "--seed", "7", "--quotas", "15,5", "--out", s(p)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 20);
    assert!(dir.path().join("a.jsonl.summary.json").exists());

    let o = medcal(&["subset", "--curation", s(&curation), "--size", "100", "--seed", "7", "--out", s(&a)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient pool"));
}

#[test]
fn missing_input_is_usage_error() {
    let o = medcal(&["curate", "--dataset", "medqa", "--backend", "x.toml", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    let o = medcal(&["subset", "--curation", "c", "--size", "ten", "--seed", "1", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_subset_file_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_subset, cfg) = scenario_setup(dir.path());
    let o = medcal(&["run", "--subset", s(&dir.path().join("nope.jsonl")), "--backend", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}
