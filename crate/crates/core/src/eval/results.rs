//! CSV results: a `#` metadata line, one row per experiment cell and
//! checkpoint, then a `#`-prefixed summary block that CSV readers configured
//! to skip comments will ignore.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{Budget, CriterionChoice};
use crate::error::{Error, Result};
use crate::filter::DiscountMode;
use crate::fsutil;
use crate::learn::Algorithm;

pub const COLUMNS: [&str; 10] = [
    "algorithm",
    "criterion",
    "seed",
    "checkpoint",
    "mean_return",
    "std_return",
    "dataset_size_transitions",
    "status",
    "fallback_steps",
    "sweeps",
];

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "algorithm",
    "criterion",
    "checkpoint",
    "seeds_ok",
    "seeds_degenerate",
    "mean_return",
    "std_return",
    "mean_dataset_size",
];

const META_PREFIX: &str = "# results v1 ";
const SUMMARY_MARKER: &str = "# summary";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    #[serde(rename = "OK")]
    Ok,
    /// Filtering left no superior episodes; no model was trained.
    #[serde(rename = "DEGENERATE")]
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMeta {
    #[serde(rename = "env")]
    pub env_id: String,
    pub gamma_train: Vec<f64>,
    pub gamma_eval: f64,
    pub budget: Budget,
    pub filter_mode: DiscountMode,
    pub filter_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub criterion: CriterionChoice,
    pub seed: u64,
    /// Checkpoint as listed in the plan (sweeps under equal-sweeps budget).
    pub checkpoint: usize,
    pub mean_return: Option<f64>,
    pub std_return: Option<f64>,
    pub dataset_size_transitions: usize,
    pub status: RowStatus,
    pub fallback_steps: usize,
    /// Sweeps actually run (may stop early on convergence).
    pub sweeps: usize,
}

/// Across-seed aggregate for one (algorithm, criterion, checkpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub criterion: CriterionChoice,
    pub checkpoint: usize,
    pub seeds_ok: usize,
    pub seeds_degenerate: usize,
    /// Mean over non-degenerate seeds of the per-seed mean return.
    pub mean_return: Option<f64>,
    /// Population std of the per-seed mean returns.
    pub std_return: Option<f64>,
    pub mean_dataset_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub meta: ResultMeta,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Summary rows in order of first appearance in `rows`.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(Algorithm, CriterionChoice, usize)> = Vec::new();
        for r in &self.rows {
            let k = (r.algorithm, r.criterion, r.checkpoint);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(algorithm, criterion, checkpoint)| {
                let cell: Vec<&ResultRow> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        r.algorithm == algorithm && r.criterion == criterion && r.checkpoint == checkpoint
                    })
                    .collect();
                let ok: Vec<&ResultRow> =
                    cell.iter().copied().filter(|r| r.status == RowStatus::Ok).collect();
                let means: Vec<f64> = ok.iter().filter_map(|r| r.mean_return).collect();
                let (mean_return, std_return, mean_dataset_size) = if means.is_empty() {
                    (None, None, None)
                } else {
                    let n = means.len() as f64;
                    let mean = means.iter().sum::<f64>() / n;
                    let var = means.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                    let size =
                        ok.iter().map(|r| r.dataset_size_transitions as f64).sum::<f64>() / ok.len() as f64;
                    (Some(mean), Some(var.sqrt()), Some(size))
                };
                SummaryRow {
                    algorithm,
                    criterion,
                    checkpoint,
                    seeds_ok: ok.len(),
                    seeds_degenerate: cell.len() - ok.len(),
                    mean_return,
                    std_return,
                    mean_dataset_size,
                }
            })
            .collect()
    }

    /// Seed-mean return of one cell, `None` if every seed was degenerate.
    pub fn seed_mean(&self, algorithm: Algorithm, criterion: CriterionChoice, checkpoint: usize) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.algorithm == algorithm && s.criterion == criterion && s.checkpoint == checkpoint)
            .and_then(|s| s.mean_return)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResults {
    pub table: ResultTable,
    pub summary: Vec<SummaryRow>,
}

fn csv_block<T: Serialize>(header: &[&str], rows: &[T]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn render_results(t: &ResultTable) -> String {
    let mut out = String::from(META_PREFIX);
    out.push_str(&serde_json::to_string(&t.meta).expect("meta serializes"));
    out.push('\n');
    out.push_str(&csv_block(&COLUMNS, &t.rows));
    if !t.rows.is_empty() {
        out.push_str(SUMMARY_MARKER);
        out.push('\n');
        for line in csv_block(&SUMMARY_COLUMNS, &t.summary()).lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Writes the table atomically; identical tables produce identical bytes.
pub fn emit_results(t: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), render_results(t).as_bytes())
}

fn parse_block<T: for<'de> Deserialize<'de>>(text: &str, header: &[&str], first_line: usize) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let found = r.headers().map_err(|e| Error::Parse {
        line: first_line,
        message: e.to_string(),
    })?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            line: first_line,
            message: format!("expected columns {}", header.join(",")),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: first_line + 1 + i,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_results(text: &str) -> Result<ParsedResults> {
    let lines: Vec<&str> = text.lines().collect();
    let meta_json = lines
        .first()
        .and_then(|l| l.strip_prefix(META_PREFIX))
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing results metadata line".into(),
        })?;
    let meta: ResultMeta = serde_json::from_str(meta_json).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let split = lines.iter().position(|l| *l == SUMMARY_MARKER).unwrap_or(lines.len());
    let rows: Vec<ResultRow> = parse_block(&lines[1..split].join("\n"), &COLUMNS, 2)?;
    let summary: Vec<SummaryRow> = if split < lines.len() {
        let body = lines[split + 1..]
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.strip_prefix("# ").ok_or_else(|| Error::Parse {
                    line: split + 2 + i,
                    message: "summary lines must start with '# '".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        parse_block(&body.join("\n"), &SUMMARY_COLUMNS, split + 2)?
    } else {
        Vec::new()
    };
    Ok(ParsedResults {
        table: ResultTable { meta, rows },
        summary,
    })
}
