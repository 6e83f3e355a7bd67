use std::fmt::Write as _;
use std::io::Read;
use std::str::FromStr;

use super::grid::{GridResults, SummaryRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table" | "text" | "txt" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!(
                "unknown report format `{other}` (expected table, csv or json)"
            ))),
        }
    }
}

/// Renders the summary. Output is a pure function of `results`.
pub fn emit_report(results: &GridResults, format: ReportFormat) -> Result<String> {
    if results.summary.is_empty() {
        return Err(Error::EmptyDataset("no results to report".into()));
    }
    match format {
        ReportFormat::Table => Ok(table(results)),
        ReportFormat::Csv => summary_csv(&results.summary),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&results.summary)?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

pub fn parse_summary_csv<R: Read>(reader: R) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{:.1}", 100.0 * v))
}

fn table(results: &GridResults) -> String {
    let header = [
        "classifier", "k", "method", "acc", "pooled", "impr%", "b", "c", "p", "",
    ];
    let mut rows: Vec<[String; 10]> = Vec::new();
    for r in &results.summary {
        let stars = match r.significant {
            Some(true) => "*",
            _ => "",
        };
        rows.push([
            r.classifier.clone(),
            r.samples_per_class.to_string(),
            r.method.to_string(),
            pct(r.mean_accuracy),
            pct(r.pooled_accuracy),
            r.improvement_pct.map_or_else(|| "-".to_owned(), |v| format!("{v:+.1}")),
            r.mcnemar_b.map_or_else(|| "-".to_owned(), |v| v.to_string()),
            r.mcnemar_c.map_or_else(|| "-".to_owned(), |v| v.to_string()),
            r.p_value.map_or_else(|| "-".to_owned(), |v| format!("{v:.2e}")),
            stars.to_owned(),
        ]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            // text columns left, numbers right
            if i < 3 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "{c:>w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &rows {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let failures: usize = results.summary.iter().map(|r| r.failures).sum();
    let _ = writeln!(
        out,
        "\n* McNemar p < {} against the baseline, pooled over seeds.",
        results.significance
    );
    if failures > 0 {
        let _ = writeln!(out, "{failures} run(s) failed and were left out of the means.");
    }
    out
}
