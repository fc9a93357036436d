//! Markdown tables and static SVG figures for a bench run.

use std::fmt::Write as _;
use std::path::Path;

use super::stats::CdData;
use super::{cell_means, detector_order, BenchSummary, RunRecord, TimingReport};
use crate::detectors::DetectorId;
use crate::error::Result;
use crate::io;
use crate::metrics::METRIC_NAMES;

/// Column titles of the accuracy table, in [`METRIC_NAMES`] order.
pub const METRIC_TITLES: [&str; 8] = [
    "Precision", "Recall", "F1", "Range-F1", "AUC-ROC", "AUC-PR", "VUS-ROC", "VUS-PR",
];

fn fmt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

fn header(first: &str, out: &mut String) {
    let _ = writeln!(out, "| {first} | {} |", METRIC_TITLES.join(" | "));
    let _ = writeln!(out, "|---|{}", "---:|".repeat(METRIC_TITLES.len()));
}

pub fn markdown(summary: &BenchSummary, timing: Option<&TimingReport>) -> String {
    let mut out = String::from("# Benchmark report\n\n");
    let dets: Vec<DetectorId> = summary
        .metrics
        .first()
        .map(|m| m.aggregates.iter().map(|a| a.detector).collect())
        .unwrap_or_default();

    out.push_str("## Mean accuracy\n\nWindow configurations are averaged within a bundle, then over bundles.\n\n");
    header("Detector", &mut out);
    for d in &dets {
        let cells: Vec<String> = summary
            .metrics
            .iter()
            .map(|m| fmt(m.aggregates.iter().find(|a| a.detector == *d).and_then(|a| a.mean)))
            .collect();
        let _ = writeln!(out, "| {} | {} |", d.name(), cells.join(" | "));
    }

    out.push_str("\n## Mean ranks\n\nRank 1 is best; ties share the mean position.\n\n");
    header("Detector", &mut out);
    for d in &dets {
        let cells: Vec<String> = summary
            .metrics
            .iter()
            .map(|m| {
                fmt(m.ranks.as_ref().and_then(|t| {
                    t.detectors
                        .iter()
                        .position(|n| n == d.name())
                        .map(|i| t.mean_ranks[i])
                }))
            })
            .collect();
        let _ = writeln!(out, "| {} | {} |", d.name(), cells.join(" | "));
    }

    out.push_str("\n## Friedman test\n\n| Measure | Bundles | chi2 | p |\n|---|---:|---:|---:|\n");
    for (m, title) in summary.metrics.iter().zip(METRIC_TITLES) {
        let n = m.ranks.as_ref().map(|t| t.n_bundles()).unwrap_or(0);
        let _ = writeln!(
            out,
            "| {title} | {n} | {} | {} |",
            fmt(m.friedman.map(|f| f.chi2)),
            fmt(m.friedman.map(|f| f.p_value))
        );
    }

    if let Some(cd) = summary.metrics.iter().find(|m| m.metric == "auc_roc").and_then(|m| m.cd.as_ref()) {
        let _ = writeln!(
            out,
            "\n## Critical difference (AUC-ROC)\n\nGroups of detectors with no pairwise difference at alpha = {}:\n",
            cd.alpha
        );
        if cd.cliques.is_empty() {
            out.push_str("- none\n");
        }
        for c in &cd.cliques {
            let _ = writeln!(out, "- {}", c.join(", "));
        }
    }

    if !summary.family_ranks.is_empty() {
        out.push_str("\n## Family mean ranks (AUC-ROC)\n\n| Family | Mean rank |\n|---|---:|\n");
        for (f, r) in &summary.family_ranks {
            let _ = writeln!(out, "| {} | {r:.3} |", f.name());
        }
    }

    if let Some(m) = summary.metrics.iter().find(|m| m.metric == "auc_roc") {
        out.push_str("\n## AUC-ROC by KNC band\n\n");
        let bands: Vec<String> = m
            .knc
            .slices
            .iter()
            .map(|s| format!("KNC {} ({})", s.band.label(), s.bundles))
            .collect();
        let _ = writeln!(out, "| Detector | {} | Decline |", bands.join(" | "));
        let _ = writeln!(out, "|---|{}---:|", "---:|".repeat(bands.len()));
        for (d, decline) in &m.knc.decline {
            let cells: Vec<String> = m
                .knc
                .slices
                .iter()
                .map(|s| fmt(s.aggregates.iter().find(|a| a.detector == *d).and_then(|a| a.mean)))
                .collect();
            let _ = writeln!(out, "| {} | {} | {} |", d.name(), cells.join(" | "), fmt(*decline));
        }
        if !m.knc.omitted.is_empty() {
            let omitted: Vec<&str> = m.knc.omitted.iter().map(|b| b.label()).collect();
            let _ = writeln!(out, "\nEmpty bands omitted: {}", omitted.join(", "));
        }
    }

    out.push_str("\n## Quality filter\n\nBundles where no detector reaches the AUC-ROC floor are listed, not removed.\n\n");
    let dropped: Vec<_> = summary.quality.iter().filter(|q| !q.kept).collect();
    if dropped.is_empty() {
        out.push_str("- none dropped\n");
    }
    for q in dropped {
        let _ = writeln!(out, "- {} (best AUC-ROC {})", q.bundle, fmt(q.best_auc_roc));
    }

    if let Some(t) = timing {
        out.push_str("\n## Timing\n\nMean seconds of fit plus test scoring per cell.\n\n");
        if let Some(n) = &t.note {
            let _ = writeln!(out, "{n}.\n");
        }
        out.push_str("| Detector | Seconds |\n|---|---:|\n");
        for (d, s) in &t.rows {
            let _ = writeln!(out, "| {} | {s:.4} |", d.name());
        }
    }

    if !summary.errors.is_empty() {
        out.push_str("\n## Failed cells\n\n");
        for e in &summary.errors {
            let _ = writeln!(out, "- {e}");
        }
    }
    out
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Box plot of per-bundle values (window means) per detector, on [0, 1].
pub fn boxplot_svg(records: &[RunRecord], metric: &str, title: &str) -> String {
    let means = cell_means(records, metric);
    let dets = detector_order(records);
    let (left, top, plot_h, step) = (50.0, 30.0, 240.0, 44.0);
    let width = left + step * dets.len().max(1) as f64 + 20.0;
    let height = top + plot_h + 110.0;
    let y = |v: f64| top + (1.0 - v.clamp(0.0, 1.0)) * plot_h;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(s, "<text x=\"{left}\" y=\"18\" font-size=\"13\">{}</text>", escape(title));
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#ddd\"/><text x=\"{2}\" y=\"{3}\" text-anchor=\"end\">{v:.2}</text>",
            y(v),
            width - 20.0,
            left - 4.0,
            y(v) + 4.0
        );
    }
    for (i, d) in dets.iter().enumerate() {
        let cx = left + step * (i as f64 + 0.5);
        let mut v: Vec<f64> = means.iter().filter(|((id, _), _)| id == d).map(|(_, v)| *v).collect();
        if !v.is_empty() {
            v.sort_by(f64::total_cmp);
            let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
            let (lo, hi) = (v[0], v[v.len() - 1]);
            let _ = writeln!(
                s,
                "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"#333\"/>",
                y(hi),
                y(lo)
            );
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"24\" height=\"{}\" fill=\"#9cc3e6\" stroke=\"#333\"/>",
                cx - 12.0,
                y(q3),
                (y(q1) - y(q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                "<line x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\" stroke=\"#c00\" stroke-width=\"2\"/>",
                cx - 12.0,
                cx + 12.0,
                y(med)
            );
        }
        let ly = top + plot_h + 10.0;
        let _ = writeln!(
            s,
            "<text x=\"{cx}\" y=\"{ly}\" transform=\"rotate(60 {cx} {ly})\">{}</text>",
            escape(d.name())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Critical-difference diagram: mean-rank axis, detectors hung below it, and
/// a bar for each group without significant pairwise differences.
pub fn cd_svg(cd: &CdData) -> String {
    let k = cd.ranking.len().max(2);
    let (left, right, axis_y) = (150.0, 150.0, 40.0);
    let span = 500.0;
    let width = left + span + right;
    let x = |r: f64| left + (r - 1.0) / (k as f64 - 1.0) * span;
    let half = cd.ranking.len().div_ceil(2);
    let height = axis_y + 30.0 + 18.0 * (half as f64 + cd.cliques.len() as f64) + 30.0;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{axis_y}\" x2=\"{}\" y2=\"{axis_y}\" stroke=\"#000\"/>",
        x(1.0),
        x(k as f64)
    );
    for r in 1..=k {
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{axis_y}\" stroke=\"#000\"/><text x=\"{0}\" y=\"{2}\" text-anchor=\"middle\">{r}</text>",
            x(r as f64),
            axis_y - 5.0,
            axis_y - 9.0
        );
    }
    let clique_top = axis_y + 12.0;
    for (i, c) in cd.cliques.iter().enumerate() {
        let ranks: Vec<f64> = c
            .iter()
            .filter_map(|n| cd.ranking.iter().find(|(d, _)| d == n).map(|(_, r)| *r))
            .collect();
        let lo = ranks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let yy = clique_top + 6.0 * i as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{yy}\" x2=\"{}\" y2=\"{yy}\" stroke=\"#c00\" stroke-width=\"3\"/>",
            x(lo) - 3.0,
            x(hi) + 3.0
        );
    }
    let label_top = clique_top + 6.0 * cd.cliques.len() as f64 + 14.0;
    for (i, (name, r)) in cd.ranking.iter().enumerate() {
        let (row, on_left) = if i < half { (i, true) } else { (cd.ranking.len() - 1 - i, false) };
        let ly = label_top + 18.0 * row as f64;
        let (lx, anchor) = if on_left { (left - 10.0, "end") } else { (left + span + 10.0, "start") };
        let _ = writeln!(
            s,
            "<polyline points=\"{0},{axis_y} {0},{ly} {lx},{ly}\" fill=\"none\" stroke=\"#555\"/><text x=\"{1}\" y=\"{2}\" text-anchor=\"{anchor}\">{3} ({r:.2})</text>",
            x(*r),
            if on_left { lx - 2.0 } else { lx + 2.0 },
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `report.md`, one box plot per measure and the AUC-ROC CD diagram.
pub fn write_report(dir: &Path, records: &[RunRecord], summary: &BenchSummary, timing: Option<&TimingReport>) -> Result<()> {
    io::atomic_write(&dir.join("report.md"), markdown(summary, timing).as_bytes())?;
    for (m, title) in METRIC_NAMES.iter().zip(METRIC_TITLES) {
        io::atomic_write(&dir.join(format!("boxplot_{m}.svg")), boxplot_svg(records, m, title).as_bytes())?;
    }
    if let Some(cd) = summary.metrics.iter().find(|m| m.metric == "auc_roc").and_then(|m| m.cd.as_ref()) {
        io::atomic_write(&dir.join("cd_auc_roc.svg"), cd_svg(cd).as_bytes())?;
    }
    Ok(())
}
