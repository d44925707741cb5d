//! Text, TSV and JSON-lines renderings of report tables.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::json;

use super::{DesignMatrix, Fragment, ListTable, Metrics, SummaryRow};
use crate::error::Error;
use crate::tuning::{CvReport, ThresholdReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    /// Aligned columns, coefficients to 2 decimals, whole percentages.
    #[default]
    Text,
    /// Tab-separated with a header row, full precision.
    Tsv,
    /// One JSON object per line, full precision.
    JsonLines,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "tsv" => Ok(OutputFormat::Tsv),
            "json-lines" | "jsonl" => Ok(OutputFormat::JsonLines),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

/// Whitespace-aligned table; numeric columns are right-aligned.
fn aligned(header: &[String], rows: &[Vec<String>], numeric: &[bool]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if numeric[i] {
                    format!("{c:>w$}", w = widths[i])
                } else {
                    format!("{c:<w$}", w = widths[i])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn tsv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn beta_cell(beta: Option<f64>, text: bool) -> String {
    match (beta, text) {
        (None, _) => String::new(),
        (Some(b), true) => format!("{b:.2}"),
        (Some(b), false) => b.to_string(),
    }
}

fn pct_cell(p: f64, text: bool) -> String {
    if text {
        format!("{p:.0}")
    } else {
        p.to_string()
    }
}

pub fn render_summary(rows: &[SummaryRow], format: OutputFormat) -> String {
    if format == OutputFormat::JsonLines {
        return rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
            .collect();
    }
    let text = format == OutputFormat::Text;
    let header = strings(&[
        "phrase",
        "beta",
        "num_phrase",
        "num_reports",
        "num_tag",
        "pct_tag",
        "pct_phrase",
    ]);
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.phrase.clone(),
                beta_cell(r.beta, text),
                r.num_phrase.to_string(),
                r.num_reports.to_string(),
                r.num_tag.to_string(),
                pct_cell(r.pct_tag, text),
                pct_cell(r.pct_phrase, text),
            ]
        })
        .collect();
    if text {
        aligned(&header, &cells, &[false, true, true, true, true, true, true])
    } else {
        tsv(&header, &cells)
    }
}

pub fn render_list_table(table: &ListTable, format: OutputFormat) -> String {
    if format == OutputFormat::JsonLines {
        return table
            .rows
            .iter()
            .map(|r| {
                let betas: serde_json::Map<String, serde_json::Value> = table
                    .runs
                    .iter()
                    .cloned()
                    .zip(r.betas.iter().map(|b| json!(b)))
                    .collect();
                json!({
                    "phrase": r.phrase,
                    "betas": betas,
                    "num_reports": r.num_reports,
                    "num_tag": r.num_tag,
                    "pct_tag": r.pct_tag,
                    "pct_phrase": r.pct_phrase,
                })
                .to_string()
                    + "\n"
            })
            .collect();
    }
    let text = format == OutputFormat::Text;
    let mut header = vec!["phrase".to_owned()];
    header.extend(table.runs.iter().cloned());
    header.extend(strings(&["num_reports", "num_tag", "pct_tag", "pct_phrase"]));
    let cells: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.phrase.clone()];
            row.extend(r.betas.iter().map(|&b| beta_cell(b, text)));
            row.push(r.num_reports.to_string());
            row.push(r.num_tag.to_string());
            row.push(pct_cell(r.pct_tag, text));
            row.push(pct_cell(r.pct_phrase, text));
            row
        })
        .collect();
    if text {
        let mut numeric = vec![true; header.len()];
        numeric[0] = false;
        aligned(&header, &cells, &numeric)
    } else {
        tsv(&header, &cells)
    }
}

pub fn render_fragments(fragments: &[Fragment], format: OutputFormat) -> String {
    let mut out = String::new();
    for f in fragments {
        match format {
            OutputFormat::Text => {
                let _ = writeln!(out, "[{} {:+}] {}", f.doc, f.label, f);
            }
            OutputFormat::Tsv => {
                let _ = writeln!(out, "{}\t{}\t{}", f.doc, f.label, f);
            }
            OutputFormat::JsonLines => {
                let v = json!({
                    "doc": f.doc,
                    "label": f.label,
                    "before": f.before,
                    "span": f.span,
                    "after": f.after,
                    "text": f.to_string(),
                });
                let _ = writeln!(out, "{v}");
            }
        }
    }
    out
}

pub fn render_design_matrix(m: &DesignMatrix, format: OutputFormat) -> String {
    match format {
        OutputFormat::JsonLines => m
            .rows
            .iter()
            .enumerate()
            .map(|(doc, row)| json!({ "doc": doc, "values": row }).to_string() + "\n")
            .collect(),
        _ => {
            let mut header = vec!["doc".to_owned()];
            header.extend(m.columns.iter().cloned());
            let cells: Vec<Vec<String>> = m
                .rows
                .iter()
                .enumerate()
                .map(|(doc, row)| {
                    std::iter::once(doc.to_string())
                        .chain(row.iter().map(f64::to_string))
                        .collect()
                })
                .collect();
            tsv(&header, &cells)
        }
    }
}

/// Quantiles of the permutation distribution shown in text and TSV output.
const REPORTED_QUANTILES: [f64; 3] = [0.5, 0.9, 0.95];

fn key_values(pairs: &[(String, String)], format: OutputFormat) -> String {
    let mut out = String::new();
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in pairs {
        let _ = match format {
            OutputFormat::Text => writeln!(out, "{k:<width$}  {v}"),
            _ => writeln!(out, "{k}\t{v}"),
        };
    }
    out
}

/// Text and TSV list the quantiles; JSON lines carries the whole sorted
/// permutation distribution on one line.
pub fn render_threshold(report: &ThresholdReport, format: OutputFormat) -> String {
    if format == OutputFormat::JsonLines {
        return serde_json::to_string(report).expect("report serializes") + "\n";
    }
    let mut pairs = vec![
        ("c_obs".to_owned(), report.c_obs.to_string()),
        ("p_value".to_owned(), report.p_value.to_string()),
        ("permutations".to_owned(), report.r.to_string()),
        ("seed".to_owned(), report.seed.to_string()),
    ];
    for p in REPORTED_QUANTILES {
        pairs.push((format!("c_perm_q{}", p * 100.0), report.quantile(p).to_string()));
    }
    key_values(&pairs, format)
}

/// One row per grid value; `best` marks the chosen `C`.
pub fn render_cv(report: &CvReport, format: OutputFormat) -> String {
    let best = |c: f64| c.total_cmp(&report.best_c).is_eq();
    if format == OutputFormat::JsonLines {
        return report
            .c_grid
            .iter()
            .zip(&report.mse)
            .map(|(&c, &mse)| json!({ "c": c, "mse": mse, "best": best(c) }).to_string() + "\n")
            .collect();
    }
    let header = strings(&["c", "mse", "best"]);
    let cells: Vec<Vec<String>> = report
        .c_grid
        .iter()
        .zip(&report.mse)
        .map(|(&c, &mse)| {
            let mark = if best(c) { "*" } else { "" };
            vec![c.to_string(), mse.to_string(), mark.to_owned()]
        })
        .collect();
    if format == OutputFormat::Text {
        aligned(&header, &cells, &[true, true, false])
    } else {
        tsv(&header, &cells)
    }
}

/// One row per document with its score and sign class.
pub fn render_predictions(scores: &[f64], format: OutputFormat) -> String {
    let class = |s: f64| if s > 0.0 { 1 } else { -1 };
    if format == OutputFormat::JsonLines {
        return scores
            .iter()
            .enumerate()
            .map(|(doc, &s)| json!({ "doc": doc, "score": s, "class": class(s) }).to_string() + "\n")
            .collect();
    }
    let header = strings(&["doc", "score", "class"]);
    let cells: Vec<Vec<String>> = scores
        .iter()
        .enumerate()
        .map(|(doc, &s)| vec![doc.to_string(), s.to_string(), class(s).to_string()])
        .collect();
    if format == OutputFormat::Text {
        aligned(&header, &cells, &[true, true, true])
    } else {
        tsv(&header, &cells)
    }
}

/// Missing precision and F1 render as `NA` in text and TSV and as `null`
/// in JSON.
pub fn render_metrics(m: &Metrics, format: OutputFormat) -> String {
    if format == OutputFormat::JsonLines {
        return serde_json::to_string(m).expect("metrics serialize") + "\n";
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_owned(), |v| v.to_string());
    let pairs = [
        ("precision".to_owned(), opt(m.precision)),
        ("recall".to_owned(), m.recall.to_string()),
        ("f1".to_owned(), opt(m.f1)),
        ("auc".to_owned(), m.auc.to_string()),
    ];
    key_values(&pairs, format)
}
