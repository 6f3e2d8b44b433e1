use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use medcal::backend::connect;
use medcal::config::FileConfig;
use medcal::dataset::{
    build_subset, curate_to_dir, load_medmcqa, load_medqa, read_curation, read_questions, write_questions, StopRule,
    SubsetSpec,
};
use medcal::harness::{load_report, report_rows, run_ablation, write_run_report, AblationOptions, COMPARISON_FILE};
use medcal::metrics::{comparison_text, write_comparison_csv};
use medcal::model::ConfigId;

#[derive(Parser)]
#[command(name = "medcal", version, about = "Multi-specialist answering with verification-based confidence calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Medqa,
    Medmcqa,
}

#[derive(Subcommand)]
enum Command {
    /// Letter-only panel sweep labeling high-disagreement and agreement questions.
    Curate {
        #[arg(long, value_enum)]
        dataset: DatasetKind,
        #[arg(long)]
        input: PathBuf,
        /// TOML config file with a [backend] table.
        #[arg(long)]
        backend: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stop once both counts are reached: <disagreement>,<agreement>.
        #[arg(long, default_value = "220,60", value_parser = parse_pair)]
        targets: (usize, usize),
    },
    /// Seeded evaluation subset from a curation file.
    Subset {
        #[arg(long)]
        curation: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        seed: u64,
        /// <disagreement>,<agreement>; required for sizes other than 100 and 250.
        #[arg(long, value_parser = parse_pair)]
        quotas: Option<(usize, usize)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run ablation configurations over a subset.
    Run {
        #[arg(long)]
        subset: PathBuf,
        /// C1, C2, C3, C4 or all.
        #[arg(long, default_value = "all")]
        config: String,
        #[arg(long)]
        backend: PathBuf,
        /// mult, wavg or pure (overrides the config file).
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Questions in flight at once (overrides the config file).
        #[arg(long)]
        parallel: Option<usize>,
        /// Continue from existing record files.
        #[arg(long)]
        resume: bool,
        /// Also render SVG figures.
        #[arg(long)]
        svg: bool,
    },
    /// Recompute report tables from record files.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected <n>,<m>, got `{s}`"))?;
    let n = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((n(a)?, n(b)?))
}

fn parse_configs(s: &str) -> Result<Vec<ConfigId>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(ConfigId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let c: ConfigId = part.parse()?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

fn curate(dataset: DatasetKind, input: &Path, backend: &Path, out: &Path, targets: (usize, usize)) -> Result<()> {
    let loaded = match dataset {
        DatasetKind::Medqa => load_medqa(input),
        DatasetKind::Medmcqa => load_medmcqa(input),
    }?;
    eprintln!(
        "loaded {} questions ({} dropped: {} invalid label, {} invalid options)",
        loaded.questions.len(),
        loaded.dropped(),
        loaded.dropped_invalid_label,
        loaded.dropped_invalid_options
    );
    let cfg = FileConfig::load(backend)?;
    let backend = connect(&cfg.backend)?;
    let rule = StopRule { target_disagreement: targets.0, target_agreement: targets.1 };
    let outcome = curate_to_dir(&loaded.questions, &backend, rule, out)?;
    let stop = if outcome.stopped_early { "targets met" } else { "dataset exhausted" };
    println!(
        "processed {} questions: {} high-disagreement, {} agreement ({stop})",
        outcome.processed, outcome.disagreement, outcome.agreement
    );
    Ok(())
}

fn subset(curation: &Path, size: usize, seed: u64, quotas: Option<(usize, usize)>, out: &Path) -> Result<()> {
    let spec = match quotas {
        Some((d, a)) => SubsetSpec::new(size, seed, d, a)?,
        None => SubsetSpec::with_default_quotas(size, seed)?,
    };
    let pool = read_curation(curation)?;
    let questions = build_subset(&pool, &spec)?;
    write_questions(out, &questions)?;

    let by_id: BTreeMap<&str, usize> = pool.iter().map(|e| (e.record.question_id.as_str(), e.record.distinct_answer_count)).collect();
    let mut distinct: BTreeMap<usize, usize> = BTreeMap::new();
    for q in &questions {
        *distinct.entry(by_id[q.id.as_str()]).or_default() += 1;
    }
    let summary = serde_json::json!({
        "size": spec.size,
        "seed": spec.seed,
        "high_disagreement": spec.high_disagreement_quota,
        "agreement": spec.agreement_quota,
        "pool": pool.len(),
        "distinct_answer_counts": distinct,
    });
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".summary.json");
    fs::write(&sidecar, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", PathBuf::from(&sidecar).display()))?;
    println!(
        "wrote {} questions ({} high-disagreement, {} agreement) to {}",
        questions.len(),
        spec.high_disagreement_quota,
        spec.agreement_quota,
        out.display()
    );
    for (k, n) in &distinct {
        println!("  {n} with {k} distinct answer(s)");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    subset: &Path,
    config: &str,
    backend: &Path,
    variant: Option<&str>,
    out: &Path,
    parallel: Option<usize>,
    resume: bool,
    svg: bool,
) -> Result<()> {
    let questions = read_questions(subset)?;
    if questions.is_empty() {
        bail!("{}: subset is empty", subset.display());
    }
    let file = FileConfig::load(backend)?;
    let configs = parse_configs(config)?
        .into_iter()
        .map(|c| file.run_config(c, variant, parallel))
        .collect::<Result<Vec<_>, _>>()?;
    let chat = connect(&file.backend)?;
    let opts = AblationOptions {
        output_dir: out.to_path_buf(),
        resume,
        write_svg: svg,
        backend_config: Some(file.backend.clone()),
        subset_path: Some(subset.to_path_buf()),
    };
    let reports = run_ablation(&questions, &configs, &chat, &opts)?;
    for r in &reports {
        eprintln!("{}: {} scored, {} quarantined", r.config, r.records.len(), r.failures.len());
    }
    print!("{}", comparison_text(&report_rows(&reports)?));
    Ok(())
}

fn report(records: &[PathBuf], out: &Path, svg: bool) -> Result<()> {
    let mut reports = Vec::with_capacity(records.len());
    for path in records {
        let r = load_report(path)?;
        write_run_report(out, &r, svg)?;
        reports.push(r);
    }
    let rows = report_rows(&reports)?;
    let cpath = out.join(COMPARISON_FILE);
    write_comparison_csv(&cpath, &rows).with_context(|| format!("writing {}", cpath.display()))?;
    print!("{}", comparison_text(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Curate { dataset, input, backend, out, targets } => curate(*dataset, input, backend, out, *targets),
        Command::Subset { curation, size, seed, quotas, out } => subset(curation, *size, *seed, *quotas, out),
        Command::Run { subset, config, backend, variant, out, parallel, resume, svg } => {
            run(subset, config, backend, variant.as_deref(), out, *parallel, *resume, *svg)
        }
        Command::Report { records, out, svg } => report(records, out, *svg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
