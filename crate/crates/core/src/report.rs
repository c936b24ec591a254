//! Rendering of sweep reports and cluster files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cluster::ClusterSet;
use crate::metrics::MetricValue;
use crate::numfmt::round_sig9;
use crate::sweep::SweepReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

/// `size : count` pairs, largest size first.
pub fn format_distribution(dist: &BTreeMap<usize, usize>) -> String {
    dist.iter()
        .rev()
        .map(|(size, count)| format!("{size} : {count}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn num(x: f64) -> String {
    round_sig9(x).to_string()
}

fn metric(m: &MetricValue) -> String {
    match m {
        MetricValue::Defined(v) => num(*v),
        MetricValue::Undefined(_) => "undefined".into(),
    }
}

pub fn render_report(report: &SweepReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table => render_table(report),
    }
}

fn render_table(report: &SweepReport) -> String {
    let mut out = String::new();
    let distance = report.thresholds.first().map(|t| t.metrics.distance.to_string()).unwrap_or_default();
    let _ = writeln!(
        out,
        "n = {}  dim = {}  floor = {}  edges = {}  distance = {}",
        report.n,
        report.dim,
        num(report.min_weight_stored),
        report.edge_count,
        distance
    );
    let header = ["threshold", "clusters", "scr", "silhouette", "calinski_harabasz", "davies_bouldin", "distribution"];
    let rows: Vec<[String; 7]> = report
        .thresholds
        .iter()
        .map(|t| {
            [
                num(t.threshold),
                t.cluster_count.to_string(),
                num(t.scr),
                metric(&t.metrics.silhouette),
                metric(&t.metrics.calinski_harabasz),
                metric(&t.metrics.davies_bouldin),
                format_distribution(&t.size_distribution),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[&str]| {
        let mut l = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i + 1 == cells.len() {
                l.push_str(cell);
            } else {
                let _ = write!(l, "{cell:<w$}  ", w = widths[i]);
            }
        }
        l
    };
    let _ = writeln!(out, "{}", line(&header));
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}", line(&cells));
    }
    for t in &report.thresholds {
        for (name, m) in [
            ("silhouette", &t.metrics.silhouette),
            ("calinski_harabasz", &t.metrics.calinski_harabasz),
            ("davies_bouldin", &t.metrics.davies_bouldin),
        ] {
            if let MetricValue::Undefined(reason) = m {
                let _ = writeln!(out, "note: {name} undefined at threshold {}: {reason}", num(t.threshold));
            }
        }
    }
    if let Some(timing) = &report.timing {
        let _ = writeln!(
            out,
            "timing: graph {} ms, clustering {} ms, metrics {} ms",
            timing.graph_build.as_millis(),
            timing.clustering.as_millis(),
            timing.metrics.as_millis()
        );
    }
    out
}

/// `clusters.json` text: `{"threshold":…,"clusters":[[id,…],…]}` plus a
/// trailing newline.
pub fn render_clusters(clusters: &ClusterSet) -> String {
    let mut s = serde_json::to_string(clusters).expect("clusters serialize");
    s.push('\n');
    s
}
