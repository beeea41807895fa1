//! Report rendering: canonical JSON, CSV, a plain-text table in the fixed
//! column order, and the consistency-vs-editability tradeoff curve data.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::canonical::{format_float, write_canonical};
use crate::config::{ALL_METRICS, METRIC_HEADERS};
use crate::runner::MetricReport;

/// One labeled row of aggregate values (a full run or one sweep variant).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub label: String,
    pub aggregates: BTreeMap<String, Option<f64>>,
    pub null_counts: BTreeMap<String, usize>,
}

impl AggregateRow {
    pub fn from_report(label: impl Into<String>, report: &MetricReport) -> Self {
        Self {
            label: label.into(),
            aggregates: report.aggregates.clone(),
            null_counts: report.null_counts.clone(),
        }
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.aggregates.get(metric).copied().flatten()
    }
}

fn cell(row: &AggregateRow, metric: &str) -> String {
    match row.aggregates.get(metric) {
        Some(Some(v)) => format_float(*v),
        Some(None) => "null".to_string(),
        None => "-".to_string(),
    }
}

/// CSV with a `label` column followed by the metric columns in report order.
pub fn render_csv(rows: &[AggregateRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend(METRIC_HEADERS.iter().map(|h| h.to_string()));
    writer.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.label.clone()];
        record.extend(ALL_METRICS.iter().map(|m| cell(row, m)));
        writer.write_record(&record)?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

/// Parse a rendered CSV back into aggregate rows (used by round-trip
/// checks and the tradeoff plot).
pub fn parse_csv(text: &str) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    anyhow::ensure!(headers.get(0) == Some("label"), "missing label column");
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut aggregates = BTreeMap::new();
        for (i, metric) in ALL_METRICS.iter().enumerate() {
            let raw = record.get(i + 1).unwrap_or("-");
            match raw {
                "-" => {}
                "null" => {
                    aggregates.insert(metric.to_string(), None);
                }
                v => {
                    aggregates.insert(
                        metric.to_string(),
                        Some(v.parse::<f64>().with_context(|| format!("cell '{v}'"))?),
                    );
                }
            }
        }
        rows.push(AggregateRow {
            label: record.get(0).unwrap_or("").to_string(),
            aggregates,
            null_counts: BTreeMap::new(),
        });
    }
    Ok(rows)
}

/// Fixed-width plain-text table in the report column order.
pub fn render_text(rows: &[AggregateRow]) -> String {
    let mut widths: Vec<usize> = METRIC_HEADERS.iter().map(|h| h.len()).collect();
    let mut label_width = "label".len();
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            label_width = label_width.max(row.label.len());
            ALL_METRICS
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let c = cell(row, m);
                    widths[i] = widths[i].max(c.len());
                    c
                })
                .collect()
        })
        .collect();
    let mut out = String::new();
    out.push_str(&format!("{:<label_width$}", "label"));
    for (h, w) in METRIC_HEADERS.iter().zip(&widths) {
        out.push_str(&format!("  {h:>w$}"));
    }
    out.push('\n');
    for (row, row_cells) in rows.iter().zip(cells) {
        out.push_str(&format!("{:<label_width$}", row.label));
        for (c, w) in row_cells.iter().zip(&widths) {
            out.push_str(&format!("  {c:>w$}"));
        }
        out.push('\n');
    }
    out
}

/// One point of the consistency-vs-editability tradeoff curve: deltas of
/// Facesim and the three Posediv axes against a named baseline.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TradeoffPoint {
    pub label: String,
    pub delta_facesim: Option<f64>,
    pub delta_posediv_yaw: Option<f64>,
    pub delta_posediv_pitch: Option<f64>,
    pub delta_posediv_roll: Option<f64>,
}

fn delta(row: &AggregateRow, baseline: &AggregateRow, metric: &str) -> Option<f64> {
    match (row.get(metric), baseline.get(metric)) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    }
}

/// Compute one tradeoff point per row against the baseline.
pub fn tradeoff_curve(rows: &[AggregateRow], baseline: &AggregateRow) -> Vec<TradeoffPoint> {
    rows.iter()
        .map(|row| TradeoffPoint {
            label: row.label.clone(),
            delta_facesim: delta(row, baseline, "facesim"),
            delta_posediv_yaw: delta(row, baseline, "posediv_yaw"),
            delta_posediv_pitch: delta(row, baseline, "posediv_pitch"),
            delta_posediv_roll: delta(row, baseline, "posediv_roll"),
        })
        .collect()
}

/// CSV form of the tradeoff curve.
pub fn render_tradeoff_csv(points: &[TradeoffPoint]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "label",
        "delta_facesim",
        "delta_posediv_yaw",
        "delta_posediv_pitch",
        "delta_posediv_roll",
    ])?;
    for p in points {
        let fmt = |v: Option<f64>| v.map(format_float).unwrap_or_else(|| "null".into());
        writer.write_record([
            p.label.clone(),
            fmt(p.delta_facesim),
            fmt(p.delta_posediv_yaw),
            fmt(p.delta_posediv_pitch),
            fmt(p.delta_posediv_roll),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

/// Render every report artifact (JSON already written by the runner):
/// `report.csv`, `report.txt`, and the single-row tradeoff stub is skipped
/// for plain runs (sweeps write their own curve).
pub fn write_run_renderings(run_dir: &Path, report: &MetricReport) -> Result<()> {
    anyhow::ensure!(!report.cases.is_empty(), "report has no cases");
    let row = AggregateRow::from_report("run", report);
    std::fs::write(run_dir.join("report.csv"), render_csv(&[row.clone()])?)?;
    std::fs::write(run_dir.join("report.txt"), render_text(&[row]))?;
    Ok(())
}

/// Persist sweep renderings: canonical JSON, CSV, text, and the Fig-style
/// tradeoff data against the given baseline row.
pub fn write_sweep_renderings(
    dir: &Path,
    rows: &[AggregateRow],
    baseline: &AggregateRow,
) -> Result<()> {
    anyhow::ensure!(!rows.is_empty(), "sweep has no rows");
    std::fs::create_dir_all(dir)?;
    write_canonical(&dir.join("sweep.json"), &rows.to_vec())?;
    std::fs::write(dir.join("sweep.csv"), render_csv(rows)?)?;
    std::fs::write(dir.join("sweep.txt"), render_text(rows))?;
    let curve = tradeoff_curve(rows, baseline);
    write_canonical(&dir.join("tradeoff.json"), &curve)?;
    std::fs::write(dir.join("tradeoff.csv"), render_tradeoff_csv(&curve)?)?;
    Ok(())
}
