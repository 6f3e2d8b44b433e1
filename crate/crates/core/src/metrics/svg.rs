//! Minimal static SVG renders of the report tables.

use std::fmt::Write as _;

use super::report::HistogramBin;
use super::{BinnedCalibration, RocPoint};

const W: f64 = 400.0;
const H: f64 = 400.0;
const PAD: f64 = 40.0;

fn x(v: f64) -> f64 {
    PAD + v * (W - 2.0 * PAD)
}

fn y(v: f64) -> f64 {
    H - PAD - v * (H - 2.0 * PAD)
}

fn frame(title: &str, body: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for t in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#, x(t), H - PAD + 14.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#, PAD - 4.0, y(t) + 4.0);
    }
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn diagonal() -> String {
    format!(
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    ) + "\n"
}

/// Per-bin accuracy bars against the perfect-calibration diagonal.
pub fn reliability(b: &BinnedCalibration, title: &str) -> String {
    let mut body = diagonal();
    for bin in &b.bins {
        if let Some(acc) = bin.accuracy {
            let _ = writeln!(
                body,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="steelblue" fill-opacity="0.7" stroke="white"/>"#,
                x(bin.lower),
                y(acc),
                x(bin.upper) - x(bin.lower),
                y(0.0) - y(acc)
            );
        }
    }
    let pts: Vec<String> = b
        .bins
        .iter()
        .filter_map(|bin| Some(format!("{:.2},{:.2}", x(bin.mean_confidence?), y(bin.accuracy?))))
        .collect();
    if !pts.is_empty() {
        let _ = writeln!(body, r#"<polyline points="{}" fill="none" stroke="darkblue" stroke-width="2"/>"#, pts.join(" "));
    }
    frame(&format!("{title} (ECE {:.3})", b.ece), &body)
}

pub fn roc(points: &[RocPoint], auc: Option<f64>) -> String {
    let mut body = diagonal();
    if !points.is_empty() {
        let pts: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", x(p.fpr), y(p.tpr))).collect();
        let _ = writeln!(body, r#"<polyline points="{}" fill="none" stroke="darkblue" stroke-width="2"/>"#, pts.join(" "));
    }
    let title = match auc {
        Some(a) => format!("ROC (AUROC {a:.3})"),
        None => "ROC (undefined: single label)".to_string(),
    };
    frame(&title, &body)
}

/// Correct (blue) stacked under incorrect (red) counts per bin.
pub fn stacked_histogram(bins: &[HistogramBin]) -> String {
    let max = bins.iter().map(|b| b.correct + b.incorrect).max().unwrap_or(0).max(1) as f64;
    let mut body = String::new();
    for b in bins {
        let w = x(b.upper) - x(b.lower);
        let hc = b.correct as f64 / max;
        let hi = b.incorrect as f64 / max;
        let _ = writeln!(
            body,
            r#"<rect x="{}" y="{}" width="{w}" height="{}" fill="royalblue" stroke="white"/>"#,
            x(b.lower),
            y(hc),
            y(0.0) - y(hc)
        );
        let _ = writeln!(
            body,
            r#"<rect x="{}" y="{}" width="{w}" height="{}" fill="indianred" stroke="white"/>"#,
            x(b.lower),
            y(hc + hi),
            y(hc) - y(hc + hi)
        );
    }
    frame(&format!("Confidence histogram (max count {max})"), &body)
}
