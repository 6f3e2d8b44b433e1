//! Report tables and their on-disk layout.
//!
//! A report directory holds:
//!
//! | file                   | columns                                                      |
//! |------------------------|--------------------------------------------------------------|
//! | `summary.json`         | `n, accuracy, ece, auroc, mean_confidence, ...`              |
//! | `reliability.csv`      | `bin_lower,bin_upper,count,mean_confidence,accuracy` (0.2)   |
//! | `calibration_hist.csv` | same columns, fine bins (0.05 by default)                    |
//! | `confidence_hist.csv`  | `bin_lower,bin_upper,correct,incorrect`                      |
//! | `roc.csv`              | `fpr,tpr,threshold`                                          |
//!
//! plus `reliability.svg`, `calibration_hist.svg`, `confidence_hist.svg`
//! and `roc.svg` when SVG output is requested. Empty bins leave the mean
//! and accuracy cells blank.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    accuracy, auroc, bin_edges, bin_index, ece, mean_confidence, roc_points, svg, BinnedCalibration, MetricsError,
    Outcome, RocPoint,
};
use crate::model::ConfigId;

pub const RELIABILITY_BINS: usize = 5;
pub const DEFAULT_HISTOGRAM_WIDTH: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub correct: usize,
    pub incorrect: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub accuracy: f64,
    pub ece: f64,
    /// `None` when every record shares one correctness label.
    pub auroc: Option<f64>,
    pub mean_confidence: f64,
    pub reliability_bins: usize,
    pub histogram_bin_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTables {
    pub reliability: BinnedCalibration,
    pub calibration_hist: BinnedCalibration,
    pub confidence_hist: Vec<HistogramBin>,
    pub roc: Option<Vec<RocPoint>>,
    pub summary: Summary,
}

fn fine_bins(width: f64) -> Result<usize, MetricsError> {
    let n = (1.0 / width).round();
    if !(width > 0.0) || n < 1.0 || ((n * width) - 1.0).abs() > 1e-9 {
        return Err(MetricsError::BadBinWidth(width));
    }
    Ok(n as usize)
}

pub fn report_tables(records: &[Outcome], histogram_bin_width: f64) -> Result<ReportTables, MetricsError> {
    let reliability = ece(records, RELIABILITY_BINS)?;
    let nfine = fine_bins(histogram_bin_width)?;
    let calibration_hist = ece(records, nfine)?;
    let edges = bin_edges(nfine);
    let mut confidence_hist: Vec<HistogramBin> = edges
        .windows(2)
        .map(|w| HistogramBin { lower: w[0], upper: w[1], correct: 0, incorrect: 0 })
        .collect();
    for r in records {
        let bin = &mut confidence_hist[bin_index(r.confidence, &edges)];
        if r.correct {
            bin.correct += 1;
        } else {
            bin.incorrect += 1;
        }
    }
    let (auc, roc) = match (auroc(records), roc_points(records)) {
        (Ok(a), Ok(p)) => (Some(a), Some(p)),
        (Err(MetricsError::DegenerateLabels), _) => (None, None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let summary = Summary {
        n: records.len(),
        accuracy: accuracy(records)?,
        ece: reliability.ece,
        auroc: auc,
        mean_confidence: mean_confidence(records)?,
        reliability_bins: RELIABILITY_BINS,
        histogram_bin_width,
    };
    Ok(ReportTables { reliability, calibration_hist, confidence_hist, roc, summary })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn calibration_csv(b: &BinnedCalibration) -> String {
    let mut s = String::from("bin_lower,bin_upper,count,mean_confidence,accuracy\n");
    for bin in &b.bins {
        let _ = writeln!(s, "{},{},{},{},{}", bin.lower, bin.upper, bin.count, opt(bin.mean_confidence), opt(bin.accuracy));
    }
    s
}

fn histogram_csv(h: &[HistogramBin]) -> String {
    let mut s = String::from("bin_lower,bin_upper,correct,incorrect\n");
    for b in h {
        let _ = writeln!(s, "{},{},{},{}", b.lower, b.upper, b.correct, b.incorrect);
    }
    s
}

fn roc_csv(points: Option<&[RocPoint]>) -> String {
    let mut s = String::from("fpr,tpr,threshold\n");
    for p in points.unwrap_or_default() {
        let _ = writeln!(s, "{},{},{}", p.fpr, p.tpr, opt(p.threshold));
    }
    s
}

/// Writes every table into `dir` (created if needed).
pub fn write_report(dir: &Path, tables: &ReportTables, with_svg: bool) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let summary = serde_json::to_string_pretty(&tables.summary).expect("summary serializes");
    fs::write(dir.join("summary.json"), summary + "\n")?;
    fs::write(dir.join("reliability.csv"), calibration_csv(&tables.reliability))?;
    fs::write(dir.join("calibration_hist.csv"), calibration_csv(&tables.calibration_hist))?;
    fs::write(dir.join("confidence_hist.csv"), histogram_csv(&tables.confidence_hist))?;
    fs::write(dir.join("roc.csv"), roc_csv(tables.roc.as_deref()))?;
    if with_svg {
        fs::write(dir.join("reliability.svg"), svg::reliability(&tables.reliability, "Reliability"))?;
        fs::write(dir.join("calibration_hist.svg"), svg::reliability(&tables.calibration_hist, "Calibration histogram"))?;
        fs::write(dir.join("confidence_hist.svg"), svg::stacked_histogram(&tables.confidence_hist))?;
        fs::write(dir.join("roc.svg"), svg::roc(tables.roc.as_deref().unwrap_or_default(), tables.summary.auroc))?;
    }
    Ok(())
}

/// One row of the cross-configuration comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub config: Option<ConfigId>,
    pub n: usize,
    pub accuracy: f64,
    pub ece: f64,
    pub auroc: Option<f64>,
    pub avg_conf: f64,
    /// Summed per-question wall time.
    pub time_min: f64,
    pub quarantined: usize,
    /// Percentage points versus the C1 row.
    pub delta_acc_pp: Option<f64>,
    /// Relative change in percent versus the C1 row.
    pub delta_ece_pct: Option<f64>,
    pub delta_auroc: Option<f64>,
}

/// Input for one comparison row.
pub struct ComparisonInput<'a> {
    pub name: String,
    pub config: Option<ConfigId>,
    pub outcomes: &'a [Outcome],
    pub wall_time_ms: u64,
    pub quarantined: usize,
}

/// Builds rows; deltas are filled against the C1 row when one is present
/// alongside at least one other row.
pub fn comparison_rows(inputs: &[ComparisonInput<'_>]) -> Result<Vec<ComparisonRow>, MetricsError> {
    let mut rows = Vec::with_capacity(inputs.len());
    for i in inputs {
        let t = report_tables(i.outcomes, DEFAULT_HISTOGRAM_WIDTH)?;
        rows.push(ComparisonRow {
            name: i.name.clone(),
            config: i.config,
            n: t.summary.n,
            accuracy: t.summary.accuracy,
            ece: t.summary.ece,
            auroc: t.summary.auroc,
            avg_conf: t.summary.mean_confidence,
            time_min: i.wall_time_ms as f64 / 60_000.0,
            quarantined: i.quarantined,
            delta_acc_pp: None,
            delta_ece_pct: None,
            delta_auroc: None,
        });
    }
    if rows.len() > 1 {
        if let Some(base) = rows.iter().find(|r| r.config == Some(ConfigId::C1)).cloned() {
            for r in rows.iter_mut().filter(|r| r.name != base.name) {
                r.delta_acc_pp = Some((r.accuracy - base.accuracy) * 100.0);
                r.delta_ece_pct = (base.ece > 0.0).then(|| (r.ece - base.ece) / base.ece * 100.0);
                r.delta_auroc = r.auroc.zip(base.auroc).map(|(a, b)| a - b);
            }
        }
    }
    Ok(rows)
}

fn fixed(v: Option<f64>, places: usize) -> String {
    v.map(|x| format!("{x:.places$}")).unwrap_or_default()
}

/// CSV shaped like a results table. Delta columns are omitted when no row
/// carries a delta.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let deltas = rows.iter().any(|r| r.delta_acc_pp.is_some());
    let mut s = String::from("name,config,label,n,accuracy");
    s.push_str(if deltas { ",delta_acc_pp,ece,delta_ece_pct,auroc,delta_auroc" } else { ",ece,auroc" });
    s.push_str(",avg_conf,time_min,quarantined\n");
    for r in rows {
        let config = r.config.map(|c| c.to_string()).unwrap_or_default();
        let label = r.config.map(|c| c.label()).unwrap_or_default();
        let _ = write!(s, "{},{},{},{},{:.6}", r.name, config, label, r.n, r.accuracy);
        if deltas {
            let _ = write!(
                s,
                ",{},{:.6},{},{},{}",
                fixed(r.delta_acc_pp, 4),
                r.ece,
                fixed(r.delta_ece_pct, 4),
                fixed(r.auroc, 6),
                fixed(r.delta_auroc, 6)
            );
        } else {
            let _ = write!(s, ",{:.6},{}", r.ece, fixed(r.auroc, 6));
        }
        let _ = writeln!(s, ",{:.6},{:.3},{}", r.avg_conf, r.time_min, r.quarantined);
    }
    s
}

pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, comparison_csv(rows))
}

/// Human-readable table for terminal output.
pub fn comparison_text(rows: &[ComparisonRow]) -> String {
    let mut s = format!(
        "{:<28} {:>7} {:>8} {:>6} {:>7} {:>6} {:>8} {:>8} {:>9}\n",
        "Configuration", "Acc", "ΔAcc", "ECE", "ΔECE", "AUROC", "ΔAUROC", "AvgConf", "Time(min)"
    );
    for r in rows {
        let name = match r.config {
            Some(c) => format!("{c}: {}", c.label()),
            None => r.name.clone(),
        };
        let _ = writeln!(
            s,
            "{:<28} {:>6.1}% {:>8} {:>6.3} {:>7} {:>6} {:>8} {:>8.3} {:>9.1}",
            name,
            r.accuracy * 100.0,
            r.delta_acc_pp.map(|d| format!("{d:+.1}pp")).unwrap_or_else(|| "---".into()),
            r.ece,
            r.delta_ece_pct.map(|d| format!("{d:+.0}%")).unwrap_or_else(|| "---".into()),
            fixed(r.auroc, 3),
            r.delta_auroc.map(|d| format!("{d:+.3}")).unwrap_or_else(|| "---".into()),
            r.avg_conf,
            r.time_min,
        );
    }
    s
}
