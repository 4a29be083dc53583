//! Tabular experiment results and their CSV form.
//!
//! Columns: `method,r,gamma,gamma_a,gamma_h,recon_error_test,pred_error_test,wall_time_s`.
//! Numbers use the shortest round-trip representation, a diverged rollout
//! is written as `inf` and a configuration that could not be computed has
//! `failed` in the regularization and error columns.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{format_f64, parse_f64};
use crate::opinf::Score;

pub const HEADER: [&str; 8] = [
    "method",
    "r",
    "gamma",
    "gamma_a",
    "gamma_h",
    "recon_error_test",
    "pred_error_test",
    "wall_time_s",
];

/// Error columns of a report row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Computed { recon: f64, pred: Score },
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub r: usize,
    pub gamma: f64,
    /// Chosen operator-inference regularization; absent for failed rows.
    pub gamma_a: Option<f64>,
    pub gamma_h: Option<f64>,
    pub outcome: Outcome,
    pub wall_time_s: f64,
}

impl ReportRow {
    pub fn recon_error(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Computed { recon, .. } => Some(recon),
            Outcome::Failed => None,
        }
    }

    pub fn pred_error(&self) -> Option<Score> {
        match self.outcome {
            Outcome::Computed { pred, .. } => Some(pred),
            Outcome::Failed => None,
        }
    }

    fn cells(&self) -> Vec<String> {
        let (recon, pred) = match self.outcome {
            Outcome::Computed { recon, pred } => (format_f64(recon), pred.to_string()),
            Outcome::Failed => ("failed".to_string(), "failed".to_string()),
        };
        vec![
            self.method.clone(),
            self.r.to_string(),
            format_f64(self.gamma),
            opt_cell(self.gamma_a),
            opt_cell(self.gamma_h),
            recon,
            pred,
            format_f64(self.wall_time_s),
        ]
    }

    fn from_record(record: &csv::StringRecord) -> Result<Self> {
        if record.len() != HEADER.len() {
            return Err(Error::Format(format!("report row has {} cells", record.len())));
        }
        let outcome = if &record[5] == "failed" {
            Outcome::Failed
        } else {
            Outcome::Computed {
                recon: parse_f64(&record[5])?,
                pred: Score::parse(&record[6])?,
            }
        };
        Ok(Self {
            method: record[0].to_string(),
            r: record[1]
                .parse()
                .map_err(|_| Error::Format(format!("bad r `{}`", &record[1])))?,
            gamma: parse_f64(&record[2])?,
            gamma_a: parse_opt(&record[3])?,
            gamma_h: parse_opt(&record[4])?,
            outcome,
            wall_time_s: parse_f64(&record[7])?,
        })
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "failed".to_string(), format_f64)
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == "failed" {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Format(format!("{other:?}")),
    }
}

impl ExperimentReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out, true).expect("writing to memory");
        String::from_utf8(out).expect("CSV is UTF-8")
    }

    fn write_to<W: Write>(&self, sink: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
        if header {
            w.write_record(HEADER).map_err(csv_error)?;
        }
        for row in &self.rows {
            w.write_record(row.cells()).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(File::create(path)?, true)
    }

    /// Appends the rows to `path`, writing the header first if the file is
    /// new or empty.
    pub fn append(&self, path: &Path) -> Result<()> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.write_to(file, fresh)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(csv_error)?;
        if header.iter().ne(HEADER) {
            return Err(Error::Format(format!("unexpected report header {header:?}")));
        }
        let rows = reader
            .records()
            .map(|r| ReportRow::from_record(&r.map_err(csv_error)?))
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(outcome: Outcome) -> ReportRow {
        ReportRow {
            method: "qm-greedy".into(),
            r: 20,
            gamma: 1e-4,
            gamma_a: Some(1e-3),
            gamma_h: Some(0.1),
            outcome,
            wall_time_s: 1.25,
        }
    }

    #[test]
    fn csv_text_and_round_trip() {
        let mut failed = row(Outcome::Failed);
        failed.gamma_a = None;
        failed.gamma_h = None;
        let report = ExperimentReport {
            rows: vec![
                row(Outcome::Computed {
                    recon: 0.1 + 0.2,
                    pred: Score::Diverged,
                }),
                failed,
            ],
        };
        let text = report.to_csv_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], HEADER.join(","));
        assert_eq!(lines[1], "qm-greedy,20,0.0001,0.001,0.1,0.30000000000000004,inf,1.25");
        assert_eq!(lines[2], "qm-greedy,20,0.0001,failed,failed,failed,failed,1.25");
        assert_eq!(ExperimentReport::parse(&text).unwrap(), report);
    }

    #[test]
    fn append_writes_header_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let one = ExperimentReport {
            rows: vec![row(Outcome::Computed {
                recon: 0.5,
                pred: Score::Finite(0.25),
            })],
        };
        one.append(&path).unwrap();
        one.append(&path).unwrap();
        let back = ExperimentReport::read(&path).unwrap();
        assert_eq!(back.rows.len(), 2);
        assert_eq!(std::fs::read_to_string(&path).unwrap().matches("method").count(), 1);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(ExperimentReport::parse("a,b\n1,2\n").is_err());
    }
}
