//! Worker pool, ordered persistence, resume and run artifacts.
//!
//! Output layout under the run directory:
//!
//! - `records_<C>.jsonl`: scored questions in subset order
//! - `failures_<C>.jsonl`: quarantined questions in subset order
//! - `report_<C>/`: metric tables plus `quarantined.json`
//! - `comparison.csv`: one row per configuration, deltas against C1
//! - `run_manifest.json`: settings, hashes and seed scheme

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{run_question, FailureRecord, HarnessError, QuestionOutcome, RunConfig};
use crate::agents::template::asset_hashes;
use crate::backend::{BackendConfig, ChatBackend};
use crate::metrics::{
    comparison_rows, report_tables, write_comparison_csv, write_report, ComparisonInput, ComparisonRow, Outcome,
    ReportTables, DEFAULT_HISTOGRAM_WIDTH,
};
use crate::model::{deserialize_record, serialize_record, ConfigId, EvaluationRecord, QuestionRecord, SScoreVariant, Specialty};
use crate::verification::SimilaritySummary;

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";

const SEED_SCHEME: &str =
    "seed = u64::from_be_bytes(sha256(question_id 0x1f specialty_tag 0x1f stage_tag)[0..8]), one per (question, specialist, stage)";

#[derive(Debug, Clone, Default)]
pub struct AblationOptions {
    pub output_dir: PathBuf,
    /// Continue from existing record files instead of truncating them.
    pub resume: bool,
    pub write_svg: bool,
    /// Recorded in the manifest only.
    pub backend_config: Option<BackendConfig>,
    /// Recorded (with its hash) in the manifest only.
    pub subset_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub created_at: String,
    pub tool_version: String,
    pub configs: Vec<ConfigId>,
    pub s_score_variant: SScoreVariant,
    pub similarity: SimilaritySummary,
    pub baseline_specialist: Specialty,
    pub max_parallel_questions: usize,
    pub knowledge_context_sha256: String,
    pub template_sha256: BTreeMap<String, String>,
    pub backend: Option<BackendConfig>,
    pub subset_path: Option<PathBuf>,
    pub subset_sha256: Option<String>,
    pub subset_size: usize,
    pub seed_scheme: String,
    pub resumed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ConfigId,
    pub records: Vec<EvaluationRecord>,
    pub failures: Vec<FailureRecord>,
    /// `None` when every question was quarantined.
    pub tables: Option<ReportTables>,
}

impl RunReport {
    pub fn outcomes(&self) -> Vec<Outcome> {
        self.records.iter().map(Outcome::from).collect()
    }

    pub fn wall_time_ms(&self) -> u64 {
        self.records.iter().map(|r| r.wall_time_ms).sum()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    if !path.exists() {
        return Ok(vec![]);
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            deserialize_record(l).map_err(|e| HarnessError::CorruptRecords {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads a records file; a missing file reads as empty.
pub fn read_records(path: &Path) -> Result<Vec<EvaluationRecord>, HarnessError> {
    let records: Vec<EvaluationRecord> = read_lines(path)?;
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|e| HarnessError::CorruptRecords {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(records)
}

pub fn read_failures(path: &Path) -> Result<Vec<FailureRecord>, HarnessError> {
    read_lines(path)
}

fn records_path(dir: &Path, c: ConfigId) -> PathBuf {
    dir.join(format!("records_{c}.jsonl"))
}

fn failures_path(dir: &Path, c: ConfigId) -> PathBuf {
    dir.join(format!("failures_{c}.jsonl"))
}

fn open_output(path: &Path, resume: bool) -> Result<File, HarnessError> {
    let mut opts = OpenOptions::new();
    opts.create(true);
    if resume {
        opts.append(true);
    } else {
        opts.write(true).truncate(true);
    }
    opts.open(path).map_err(io_err(path))
}

fn append_line(file: &mut File, path: &Path, line: String) -> Result<(), HarnessError> {
    file.write_all((line + "\n").as_bytes()).and_then(|_| file.flush()).map_err(io_err(path))
}

/// Runs one configuration over `subset`, writing records as they complete.
///
/// Questions are handed to `max_parallel_questions` workers; results are
/// written by a single writer in subset order. On a fatal error the
/// contiguous completed prefix stays on disk and the error is returned.
pub fn run_config(
    subset: &[QuestionRecord],
    cfg: &RunConfig,
    backend: &dyn ChatBackend,
    dir: &Path,
    resume: bool,
) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    if subset.is_empty() {
        return Err(HarnessError::EmptySubset);
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rpath = records_path(dir, cfg.config);
    let fpath = failures_path(dir, cfg.config);

    let mut done = HashSet::new();
    if resume {
        let records = read_records(&rpath)?;
        for (i, r) in records.iter().enumerate() {
            if r.config != cfg.config {
                return Err(HarnessError::CorruptRecords {
                    path: rpath.clone(),
                    line: i + 1,
                    message: format!("record belongs to {}", r.config),
                });
            }
        }
        done.extend(records.into_iter().map(|r| r.question_id));
        done.extend(read_failures(&fpath)?.into_iter().map(|f| f.question_id));
    }
    let pending: Vec<&QuestionRecord> = subset.iter().filter(|q| !done.contains(&q.id)).collect();

    let mut rfile = open_output(&rpath, resume)?;
    let mut ffile = open_output(&fpath, resume)?;
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = cfg.max_parallel_questions.min(pending.len()).max(1);
    let (tx, rx) = mpsc::channel::<(usize, Result<QuestionOutcome, HarnessError>)>();

    let mut persisted = 0usize;
    let first_err = thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop, pending) = (&next, &stop, &pending);
            s.spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(q) = pending.get(i) else { break };
                    let result = run_question(q, cfg, backend);
                    if result.is_err() {
                        stop.store(true, Ordering::SeqCst);
                    }
                    if tx.send((i, result)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);

        let mut buffer = BTreeMap::new();
        let mut want = 0usize;
        let mut first_err: Option<HarnessError> = None;
        for (i, result) in rx {
            buffer.insert(i, result);
            while first_err.is_none() {
                let Some(result) = buffer.remove(&want) else { break };
                want += 1;
                let written = result.and_then(|outcome| match outcome {
                    QuestionOutcome::Scored(r) => append_line(&mut rfile, &rpath, serialize_record(&r)),
                    QuestionOutcome::Quarantined(f) => append_line(&mut ffile, &fpath, serialize_record(&f)),
                });
                match written {
                    Ok(()) => persisted += 1,
                    Err(e) => {
                        stop.store(true, Ordering::SeqCst);
                        first_err = Some(e);
                    }
                }
            }
        }
        first_err
    });
    if let Some(e) = first_err {
        return Err(HarnessError::Aborted {
            config: cfg.config,
            persisted: done.len() + persisted,
            source: Box::new(e),
        });
    }

    let records = read_records(&rpath)?;
    let failures = read_failures(&fpath)?;
    let outcomes: Vec<Outcome> = records.iter().map(Outcome::from).collect();
    let tables = if outcomes.is_empty() { None } else { Some(report_tables(&outcomes, DEFAULT_HISTOGRAM_WIDTH)?) };
    Ok(RunReport { config: cfg.config, records, failures, tables })
}

/// Writes `report_<C>/` under `dir`.
pub fn write_run_report(dir: &Path, report: &RunReport, with_svg: bool) -> Result<(), HarnessError> {
    let rdir = dir.join(format!("report_{}", report.config));
    if let Some(t) = &report.tables {
        write_report(&rdir, t, with_svg).map_err(io_err(&rdir))?;
    } else {
        fs::create_dir_all(&rdir).map_err(io_err(&rdir))?;
    }
    let q = rdir.join("quarantined.json");
    let body = serde_json::to_string_pretty(&report.failures).expect("failures serialize") + "\n";
    fs::write(&q, body).map_err(io_err(&q))
}

/// Rebuilds a report from a records file and its sibling failures file.
///
/// The configuration comes from the records, or from a `records_<C>.jsonl`
/// file name when the file holds no records.
pub fn load_report(records: &Path) -> Result<RunReport, HarnessError> {
    let recs = read_records(records)?;
    let stem = records.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let from_name = stem.strip_prefix("records_").and_then(|c| c.parse::<ConfigId>().ok());
    let config = match (recs.first(), from_name) {
        (Some(r), _) => r.config,
        (None, Some(c)) => c,
        (None, None) => {
            return Err(HarnessError::CorruptRecords {
                path: records.to_path_buf(),
                line: 0,
                message: "no records and no configuration in the file name".into(),
            })
        }
    };
    if let Some(i) = recs.iter().position(|r| r.config != config) {
        return Err(HarnessError::CorruptRecords {
            path: records.to_path_buf(),
            line: i + 1,
            message: "records mix configurations".into(),
        });
    }
    let failures = match from_name {
        Some(c) => read_failures(&failures_path(records.parent().unwrap_or(Path::new(".")), c))?,
        None => vec![],
    };
    let outcomes: Vec<Outcome> = recs.iter().map(Outcome::from).collect();
    let tables = if outcomes.is_empty() { None } else { Some(report_tables(&outcomes, DEFAULT_HISTOGRAM_WIDTH)?) };
    Ok(RunReport { config, records: recs, failures, tables })
}

fn manifest(subset: &[QuestionRecord], configs: &[RunConfig], opts: &AblationOptions) -> Result<RunManifest, HarnessError> {
    let first = &configs[0];
    let subset_sha256 = match &opts.subset_path {
        Some(p) => Some(hex::encode(Sha256::digest(fs::read(p).map_err(io_err(p))?))),
        None => None,
    };
    let backend = opts.backend_config.clone();
    Ok(RunManifest {
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        configs: configs.iter().map(|c| c.config).collect(),
        s_score_variant: first.s_score_variant,
        similarity: first.similarity.summary(),
        baseline_specialist: first.baseline_specialist.specialty,
        max_parallel_questions: first.max_parallel_questions,
        knowledge_context_sha256: hex::encode(Sha256::digest(first.knowledge_context.as_bytes())),
        template_sha256: asset_hashes(),
        backend,
        subset_path: opts.subset_path.clone(),
        subset_sha256,
        subset_size: subset.len(),
        seed_scheme: SEED_SCHEME.to_string(),
        resumed: opts.resume,
    })
}

/// Comparison rows for finished reports, named by configuration.
pub fn report_rows(reports: &[RunReport]) -> Result<Vec<ComparisonRow>, HarnessError> {
    let outcomes: Vec<Vec<Outcome>> = reports.iter().map(RunReport::outcomes).collect();
    let inputs: Vec<ComparisonInput<'_>> = reports
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| !o.is_empty())
        .map(|(r, o)| ComparisonInput {
            name: r.config.to_string(),
            config: Some(r.config),
            outcomes: o,
            wall_time_ms: r.wall_time_ms(),
            quarantined: r.failures.len(),
        })
        .collect();
    Ok(comparison_rows(&inputs)?)
}

/// Runs every configuration in order and writes all run artifacts.
pub fn run_ablation(
    subset: &[QuestionRecord],
    configs: &[RunConfig],
    backend: &dyn ChatBackend,
    opts: &AblationOptions,
) -> Result<Vec<RunReport>, HarnessError> {
    if subset.is_empty() {
        return Err(HarnessError::EmptySubset);
    }
    if configs.is_empty() {
        return Err(HarnessError::InvalidConfig("no configurations to run".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let dir = &opts.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let m = manifest(subset, configs, opts)?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n").map_err(io_err(&mpath))?;

    let mut reports = Vec::with_capacity(configs.len());
    for cfg in configs {
        let report = run_config(subset, cfg, backend, dir, opts.resume)?;
        write_run_report(dir, &report, opts.write_svg)?;
        reports.push(report);
    }
    let rows = report_rows(&reports)?;
    let cpath = dir.join(COMPARISON_FILE);
    write_comparison_csv(&cpath, &rows).map_err(io_err(&cpath))?;
    Ok(reports)
}
