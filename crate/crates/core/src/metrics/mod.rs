//! Accuracy, expected calibration error, AUROC and ROC curves.

pub mod report;
pub mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::EvaluationRecord;

pub use report::{
    comparison_csv, comparison_rows, comparison_text, report_tables, write_comparison_csv, write_report, ComparisonInput,
    ComparisonRow, HistogramBin, ReportTables, Summary, DEFAULT_HISTOGRAM_WIDTH, RELIABILITY_BINS,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no records")]
    EmptyInput,
    #[error("confidence {0} outside [0,1]")]
    BadScore(f64),
    #[error("AUROC undefined: every record has the same correctness label")]
    DegenerateLabels,
    #[error("bin width {0} does not evenly divide [0,1]")]
    BadBinWidth(f64),
}

/// The two fields every metric reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub confidence: f64,
    pub correct: bool,
}

impl Outcome {
    pub fn new(confidence: f64, correct: bool) -> Self {
        Outcome { confidence, correct }
    }
}

impl From<&EvaluationRecord> for Outcome {
    fn from(r: &EvaluationRecord) -> Self {
        Outcome { confidence: r.confidence, correct: r.correct }
    }
}

pub fn accuracy(records: &[Outcome]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(records.iter().filter(|r| r.correct).count() as f64 / records.len() as f64)
}

fn check(records: &[Outcome]) -> Result<(), MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    match records.iter().find(|r| !(0.0..=1.0).contains(&r.confidence)) {
        Some(r) => Err(MetricsError::BadScore(r.confidence)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCalibration {
    pub bin_edges: Vec<f64>,
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
}

/// `num_bins + 1` edges `k / num_bins`.
pub fn bin_edges(num_bins: usize) -> Vec<f64> {
    (0..=num_bins).map(|k| k as f64 / num_bins as f64).collect()
}

/// Index of the half-open bin `[e_k, e_{k+1})` holding `c`; the top bin is
/// closed so 1.0 lands in it.
pub fn bin_index(c: f64, edges: &[f64]) -> usize {
    let n = edges.len() - 1;
    let mut k = ((c * n as f64).floor() as usize).min(n - 1);
    // floor(c·n) can be off by one against the stored edges
    while k > 0 && c < edges[k] {
        k -= 1;
    }
    while k + 1 < n && c >= edges[k + 1] {
        k += 1;
    }
    k
}

/// Equal-width reliability binning and the resulting ECE.
pub fn ece(records: &[Outcome], num_bins: usize) -> Result<BinnedCalibration, MetricsError> {
    check(records)?;
    let num_bins = num_bins.max(1);
    let edges = bin_edges(num_bins);
    let mut counts = vec![0usize; num_bins];
    let mut conf_sum = vec![0.0f64; num_bins];
    let mut hits = vec![0usize; num_bins];
    for r in records {
        let k = bin_index(r.confidence, &edges);
        counts[k] += 1;
        conf_sum[k] += r.confidence;
        hits[k] += usize::from(r.correct);
    }
    let n = records.len() as f64;
    let mut ece = 0.0;
    let bins = (0..num_bins)
        .map(|k| {
            let (mean_confidence, acc) = if counts[k] == 0 {
                (None, None)
            } else {
                let m = conf_sum[k] / counts[k] as f64;
                let a = hits[k] as f64 / counts[k] as f64;
                ece += counts[k] as f64 / n * (a - m).abs();
                (Some(m), Some(a))
            };
            CalibrationBin { lower: edges[k], upper: edges[k + 1], count: counts[k], mean_confidence, accuracy: acc }
        })
        .collect();
    Ok(BinnedCalibration { bin_edges: edges, bins, ece: ece.clamp(0.0, 1.0) })
}

fn label_counts(records: &[Outcome]) -> Result<(usize, usize), MetricsError> {
    check(records)?;
    let pos = records.iter().filter(|r| r.correct).count();
    let neg = records.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::DegenerateLabels);
    }
    Ok((pos, neg))
}

/// Mann–Whitney AUROC with midranks for tied confidences.
pub fn auroc(records: &[Outcome]) -> Result<f64, MetricsError> {
    let (pos, neg) = label_counts(records)?;
    let mut sorted: Vec<&Outcome> = records.iter().collect();
    sorted.sort_by(|a, b| a.confidence.total_cmp(&b.confidence));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].confidence == sorted[i].confidence {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let midrank = (i + 1 + j) as f64 / 2.0;
        let group_pos = sorted[i..j].iter().filter(|r| r.correct).count();
        rank_sum_pos += midrank * group_pos as f64;
        i = j;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Confidence at or above which records are predicted correct;
    /// `None` for the (0,0) origin.
    pub threshold: Option<f64>,
}

/// ROC staircase from (0,0) to (1,1), one point per distinct confidence
/// in descending order.
pub fn roc_points(records: &[Outcome]) -> Result<Vec<RocPoint>, MetricsError> {
    let (pos, neg) = label_counts(records)?;
    let mut sorted: Vec<&Outcome> = records.iter().collect();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: None }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].confidence;
        while i < sorted.len() && sorted[i].confidence == t {
            if sorted[i].correct {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64, threshold: Some(t) });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC polyline.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

pub fn mean_confidence(records: &[Outcome]) -> Result<f64, MetricsError> {
    check(records)?;
    Ok(records.iter().map(|r| r.confidence).sum::<f64>() / records.len() as f64)
}
