//! Deterministic CSV and Markdown rendering of experiment results.
//!
//! Percentages print with two decimals, undefined ratios print as `N/A`,
//! and identical inputs render byte-identical files.

use super::CaseResult;
use crate::metrics::RunMetrics;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedReport {
    pub correctness_csv: String,
    pub correctness_md: String,
    pub preservation_csv: String,
    pub preservation_md: String,
    pub response_time_csv: String,
    pub response_time_md: String,
}

/// Renders the three tables (correctness, preservation, response time) from
/// per-case aggregates.
pub fn render_report(rows: &[CaseResult]) -> RenderedReport {
    let correctness_header = vec![
        "Provider",
        "Case",
        "#LineReq",
        "#LineErr",
        "#LineEvl",
        "#LineEvlWrg",
        "Precision (%)",
        "Recall (%)",
        "ErrorRate (%)",
        "Precision (%) ratio-of-means",
        "Recall (%) ratio-of-means",
        "ErrorRate (%) ratio-of-means",
    ];
    let correctness_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let a = &row.aggregate;
            vec![
                row.provider.clone(),
                row.name.clone(),
                fmt_count(a.line_req),
                fmt_count(a.line_err),
                fmt_count(a.line_evl),
                fmt_count(a.line_evl_wrg),
                fmt_pct(a.mean_of_ratios.precision),
                fmt_pct(a.mean_of_ratios.recall),
                fmt_pct(a.mean_of_ratios.error_rate),
                fmt_pct(a.ratio_of_means.precision),
                fmt_pct(a.ratio_of_means.recall),
                fmt_pct(a.ratio_of_means.error_rate),
            ]
        })
        .collect();

    let preservation_header = vec![
        "Provider",
        "Case",
        "#LineCmtLost",
        "#LineCmtSave",
        "CmtRet (%)",
        "#LineFmtLost",
        "#LineFmtSave",
        "FmtRet (%)",
        "CmtRet (%) ratio-of-means",
        "FmtRet (%) ratio-of-means",
    ];
    let preservation_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let a = &row.aggregate;
            vec![
                row.provider.clone(),
                row.name.clone(),
                fmt_count(a.cmt_lost),
                fmt_count(a.cmt_save),
                fmt_pct(a.mean_of_ratios.cmt_ret),
                fmt_count(a.fmt_lost),
                fmt_count(a.fmt_save),
                fmt_pct(a.mean_of_ratios.fmt_ret),
                fmt_pct(a.ratio_of_means.cmt_ret),
                fmt_pct(a.ratio_of_means.fmt_ret),
            ]
        })
        .collect();

    let time_header = vec!["Provider", "Case", "Response Time (s)", "Deterministic"];
    let time_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            vec![
                row.provider.clone(),
                row.name.clone(),
                format!("{:.2}", row.aggregate.response_time_s),
                if row.deterministic { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();

    RenderedReport {
        correctness_csv: csv(&correctness_header, &correctness_rows),
        correctness_md: markdown(&correctness_header, &correctness_rows),
        preservation_csv: csv(&preservation_header, &preservation_rows),
        preservation_md: markdown(&preservation_header, &preservation_rows),
        response_time_csv: csv(&time_header, &time_rows),
        response_time_md: markdown(&time_header, &time_rows),
    }
}

/// One-run CSV (header plus row), for the single-candidate evaluation
/// command.
pub fn render_run_csv(metrics: &RunMetrics) -> String {
    let header = vec![
        "#LineReq",
        "#LineErr",
        "#LineEvl",
        "#LineEvlWrg",
        "Precision (%)",
        "Recall (%)",
        "ErrorRate (%)",
        "#LineCmtLost",
        "#LineCmtSave",
        "CmtRet (%)",
        "#LineFmtLost",
        "#LineFmtSave",
        "FmtRet (%)",
        "Response Time (s)",
    ];
    csv(&header, &[run_row(metrics)])
}

pub fn render_run_md(metrics: &RunMetrics) -> String {
    let header = vec![
        "#LineReq",
        "#LineErr",
        "#LineEvl",
        "#LineEvlWrg",
        "Precision (%)",
        "Recall (%)",
        "ErrorRate (%)",
        "#LineCmtLost",
        "#LineCmtSave",
        "CmtRet (%)",
        "#LineFmtLost",
        "#LineFmtSave",
        "FmtRet (%)",
        "Response Time (s)",
    ];
    markdown(&header, &[run_row(metrics)])
}

fn run_row(m: &RunMetrics) -> Vec<String> {
    vec![
        m.line_req.to_string(),
        m.line_err.to_string(),
        m.line_evl.to_string(),
        m.line_evl_wrg.to_string(),
        fmt_pct(m.precision),
        fmt_pct(m.recall),
        fmt_pct(Some(m.error_rate)),
        m.cmt_lost.to_string(),
        m.cmt_save.to_string(),
        fmt_pct(m.cmt_ret),
        m.fmt_lost.to_string(),
        m.fmt_save.to_string(),
        fmt_pct(m.fmt_ret),
        format!("{:.2}", m.response_time_s),
    ]
}

/// Percentage with two decimals; `N/A` when undefined.
pub fn fmt_pct(ratio: Option<f64>) -> String {
    match ratio {
        Some(value) => format!("{:.2}", value * 100.0),
        None => "N/A".to_string(),
    }
}

/// Counts print whole when integral, otherwise trimmed to two decimals
/// (means over runs are fractional).
pub fn fmt_count(value: f64) -> String {
    if (value - value.round()).abs() < 1e-9 {
        format!("{}", value.round() as i64)
    } else {
        let s = format!("{value:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let escaped: Vec<String> = row.iter().map(|cell| csv_cell(cell)).collect();
        out.push_str(&escaped.join(","));
        out.push('\n');
    }
    out
}

fn csv_cell(cell: &str) -> String {
    if cell.contains(',') || cell.contains('"') || cell.contains('\n') {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn markdown(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str("| ");
    out.push_str(&header.join(" | "));
    out.push_str(" |\n|");
    for _ in header {
        out.push_str(" --- |");
    }
    out.push('\n');
    for row in rows {
        out.push_str("| ");
        out.push_str(&row.join(" | "));
        out.push_str(" |\n");
    }
    out
}
