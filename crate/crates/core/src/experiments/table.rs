use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::run::{run_all, RunRecord};
use super::spec::ExperimentSpec;
use crate::error::{AidError, Result};
use crate::metrics::AVERAGING_NOTE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub augmentation: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl ComparisonRow {
    pub fn from_record(r: &RunRecord) -> Self {
        let m = &r.test.metrics;
        ComparisonRow {
            name: r.name.clone(),
            augmentation: r.augmentation.clone(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            accuracy: m.accuracy,
        }
    }

    fn values(&self) -> [f64; 4] {
        [self.precision, self.recall, self.f1, self.accuracy]
    }
}

/// Unseen-speaker metrics, one row per spec in the order given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn from_records(records: &[RunRecord]) -> Self {
        ComparisonTable {
            rows: records.iter().map(ComparisonRow::from_record).collect(),
        }
    }

    fn column_max(&self) -> [f64; 4] {
        let mut best = [f64::NEG_INFINITY; 4];
        for r in &self.rows {
            for (b, v) in best.iter_mut().zip(r.values()) {
                *b = b.max(v);
            }
        }
        best
    }

    pub fn render_tsv(&self) -> String {
        let mut out = String::from("#system\taugmentation\tprecision\trecall\tf1\taccuracy\n");
        for r in &self.rows {
            let [p, rc, f, a] = r.values();
            writeln!(out, "{}\t{}\t{p:.6}\t{rc:.6}\t{f:.6}\t{a:.6}", r.name, r.augmentation).unwrap();
        }
        out
    }

    /// Human-readable table; the best value of each column is wrapped in `**`.
    pub fn render_table(&self) -> String {
        let best = self.column_max();
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        writeln!(
            out,
            "{:<width$}  {:<7}  {:>8}  {:>8}  {:>8}  {:>8}",
            "system", "aug", "prec", "rec", "f1", "acc"
        )
        .unwrap();
        for r in &self.rows {
            write!(out, "{:<width$}  {:<7}", r.name, r.augmentation).unwrap();
            for (v, b) in r.values().into_iter().zip(best) {
                let cell = if v == b {
                    format!("**{v:.2}**")
                } else {
                    format!("{v:.2}")
                };
                write!(out, "  {cell:>8}").unwrap();
            }
            out.push('\n');
        }
        writeln!(out, "# {AVERAGING_NOTE}").unwrap();
        out
    }
}

/// Run every spec and tabulate their unseen-speaker metrics.
pub fn run_matrix(specs: &[ExperimentSpec]) -> Result<(Vec<RunRecord>, ComparisonTable)> {
    if specs.is_empty() {
        return Err(AidError::Config("experiment matrix is empty".into()));
    }
    let records = run_all(specs)?;
    let table = ComparisonTable::from_records(&records);
    Ok((records, table))
}
