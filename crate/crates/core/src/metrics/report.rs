//! Text renderings of evaluation reports.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::EvalReport;

pub const AVERAGING_NOTE: &str =
    "macro (unweighted mean over classes); classes with no predictions or no support score 0";

/// Metadata block written above every rendered report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub config_hash: String,
    pub seed: u64,
    pub averaging: String,
}

impl ReportHeader {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        ReportHeader {
            config_hash: config_hash.into(),
            seed,
            averaging: AVERAGING_NOTE.to_owned(),
        }
    }

    fn render(&self, out: &mut String) {
        let _ = writeln!(out, "# config_hash: {}", self.config_hash);
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# averaging: {}", self.averaging);
    }
}

/// Tab-separated: one row per class, then a `macro` row.
pub fn render_eval_tsv(header: &ReportHeader, report: &EvalReport) -> String {
    let mut out = String::new();
    header.render(&mut out);
    out.push_str("class\tprecision\trecall\tf1\tsupport\n");
    for (label, m) in report.labels.iter().zip(&report.metrics.per_class) {
        let _ = writeln!(
            out,
            "{label}\t{:.6}\t{:.6}\t{:.6}\t{}",
            m.precision, m.recall, m.f1, m.support
        );
    }
    let m = &report.metrics;
    let _ = writeln!(
        out,
        "macro\t{:.6}\t{:.6}\t{:.6}\t{}",
        m.precision, m.recall, m.f1, report.n_utterances
    );
    let _ = writeln!(out, "accuracy\t{:.6}", m.accuracy);
    out
}

/// Human-readable table with the confusion matrix.
pub fn render_eval_table(header: &ReportHeader, report: &EvalReport) -> String {
    let mut out = String::new();
    header.render(&mut out);
    let width = report.labels.iter().map(String::len).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "{:<width$}  prec   rec    f1     n", "class");
    for (label, m) in report.labels.iter().zip(&report.metrics.per_class) {
        let _ = writeln!(
            out,
            "{label:<width$}  {:.2}   {:.2}   {:.2}   {}",
            m.precision, m.recall, m.f1, m.support
        );
    }
    let m = &report.metrics;
    let _ = writeln!(
        out,
        "{:<width$}  {:.2}   {:.2}   {:.2}   {}",
        "macro", m.precision, m.recall, m.f1, report.n_utterances
    );
    let _ = writeln!(
        out,
        "accuracy {:.2} on {} utterances from {} unseen speakers",
        m.accuracy, report.n_utterances, report.n_unseen_speakers
    );
    out.push_str("\nconfusion (rows = true, cols = predicted)\n");
    for (i, label) in report.labels.iter().enumerate() {
        let row: Vec<String> = report.confusion.row(i).iter().map(|c| format!("{c:>4}")).collect();
        let _ = writeln!(out, "{label:<width$} {}", row.join(""));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ConfusionMatrix;

    #[test]
    fn tsv_has_header_and_macro_row() {
        let cm = ConfusionMatrix::from_rows(&[vec![8, 2], vec![4, 6]]).unwrap();
        let report = EvalReport::new(vec!["a".into(), "b".into()], cm, 4).unwrap();
        let text = render_eval_tsv(&ReportHeader::new("abc", 3), &report);
        assert!(text.starts_with("# config_hash: abc\n# seed: 3\n# averaging: macro"));
        assert!(text.contains("macro\t0.708333\t0.700000\t0.696970\t20\n"));
        assert!(text.ends_with("accuracy\t0.700000\n"));
        let table = render_eval_table(&ReportHeader::new("abc", 3), &report);
        assert!(table.contains("confusion"));
    }
}
