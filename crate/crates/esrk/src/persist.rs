//! File formats: tableau documents, line-delimited record stores, and
//! delimited text tables.
//!
//! All floating-point output uses `.` decimal separators and scientific
//! notation with 16 significant digits. Delimited files may carry `#`
//! comment lines ahead of the header (configuration echo, summaries);
//! consumers skip them.
//!
//! Tableau documents serialize only the reduced coefficients; the full
//! `A` matrix and abscissae are always reconstructed.

use crate::stability::StabilityGrid;
use crate::tableau::{ReducedParameters, TableauError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {source}")]
    Record {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

/// Formats a float in scientific notation with 16 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.15e}")
}

/// Where a stored tableau came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    /// Canonical texts of the applied heuristics.
    pub heuristics: Vec<String>,
    pub solver_seed: u64,
    /// Informational only; never feeds any computation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    /// Echo of the effective configuration that produced this scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// On-disk form of a reduced scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableauDocument {
    pub s: usize,
    pub a_sub: Vec<f64>,
    pub b: Vec<f64>,
    pub provenance: Provenance,
}

impl TableauDocument {
    pub fn from_params(params: &ReducedParameters, provenance: Provenance) -> Self {
        Self {
            s: params.s,
            a_sub: params.a_sub.clone(),
            b: params.b.clone(),
            provenance,
        }
    }

    pub fn to_params(&self) -> Result<ReducedParameters, TableauError> {
        ReducedParameters::new(self.s, self.a_sub.clone(), self.b.clone())
    }
}

/// Writes a tableau document as pretty JSON.
pub fn write_tableau(path: &Path, doc: &TableauDocument) -> Result<(), PersistError> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a tableau document.
pub fn read_tableau(path: &Path) -> Result<TableauDocument, PersistError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Appends one record as a single JSON line. Writes are line-atomic in
/// the sense that a record is either fully present or absent; an
/// interrupted run leaves a valid prefix.
pub fn append_record<T: Serialize>(path: &Path, record: &T) -> Result<(), PersistError> {
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    file.write_all(line.as_bytes())?;
    Ok(())
}

/// Renders records as line-delimited JSON.
pub fn records_to_jsonl<T: Serialize>(records: &[T]) -> Result<String, PersistError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Reads every line of a line-delimited JSON store.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PersistError> {
    let text = fs::read_to_string(path)?;
    parse_records(&text)
}

/// Parses line-delimited JSON, reporting the offending line on failure.
pub fn parse_records<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, PersistError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| PersistError::Record {
                line: i + 1,
                source,
            })
        })
        .collect()
}

fn push_comments(out: &mut String, comments: &[(&str, &str)]) {
    for (key, value) in comments {
        out.push_str("# ");
        out.push_str(key);
        out.push_str(": ");
        out.push_str(value);
        out.push('\n');
    }
}

/// Stability grid as `re,im,magnitude` CSV, row-major over the real axis.
pub fn grid_to_csv(grid: &StabilityGrid, comments: &[(&str, &str)]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str("re,im,magnitude\n");
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            out.push_str(&format_float(grid.re_at(i)));
            out.push(',');
            out.push_str(&format_float(grid.im_at(j)));
            out.push(',');
            out.push_str(&format_float(grid.values[i][j]));
            out.push('\n');
        }
    }
    out
}

/// Convergence study as `h,error,pairwise_order` CSV. The first row has
/// no pairwise order; divergent steps print `NaN` errors.
pub fn study_to_csv(
    study: &crate::benchmarks::ConvergenceStudy,
    comments: &[(&str, &str)],
) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    let summary = serde_json::json!({
        "problem_id": study.problem_id,
        "fitted_slope": study.fitted_slope,
        "points": study.steps.len(),
        "divergent": study.divergent.iter().filter(|&&d| d).count(),
    });
    out.push_str("# summary: ");
    out.push_str(&summary.to_string());
    out.push('\n');
    out.push_str("h,error,pairwise_order\n");
    for i in 0..study.steps.len() {
        out.push_str(&format_float(study.steps[i]));
        out.push(',');
        out.push_str(&format_float(study.errors[i]));
        out.push(',');
        if i > 0 {
            let p = study.pairwise_orders[i - 1];
            if p.is_finite() {
                out.push_str(&format_float(p));
            }
        }
        out.push('\n');
    }
    out
}

/// Raw solver dump: `seed,status,iterations,residual_norm,wall_time`.
pub fn dump_to_csv(records: &[crate::solver::RunRecord], comments: &[(&str, &str)]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str("seed,status,iterations,residual_norm,wall_time\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed,
            r.status,
            r.iterations,
            format_float(r.residual_norm),
            format_float(r.wall_time),
        ));
    }
    out
}

/// Splits a delimited file into comment lines, the header, and data rows.
pub fn split_delimited(text: &str) -> (Vec<&str>, Option<&str>, Vec<&str>) {
    let mut comments = Vec::new();
    let mut header = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') {
            comments.push(line);
        } else if header.is_none() {
            header = Some(line);
        } else if !line.is_empty() {
            rows.push(line);
        }
    }
    (comments, header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_sixteen_significant_digits() {
        assert_eq!(format_float(0.1), "1.000000000000000e-1");
        assert_eq!(format_float(-1234.5), "-1.234500000000000e3");
    }

    #[test]
    fn tableau_document_round_trips() {
        let params = ReducedParameters::new(3, vec![0.25, 0.5], vec![0.1, 0.2, 0.7]).unwrap();
        let doc = TableauDocument::from_params(
            &params,
            Provenance {
                heuristics: vec!["b(1) = a(2,1)".into()],
                solver_seed: 9,
                timestamp: None,
                config: None,
            },
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scheme.json");
        write_tableau(&path, &doc).unwrap();
        let back = read_tableau(&path).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_params().unwrap(), params);
        // Full A and c never serialized.
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.contains("\"a\""));
        assert!(!text.contains("\"c\""));
    }

    #[test]
    fn jsonl_append_preserves_prefix() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct R {
            n: u32,
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        append_record(&path, &R { n: 1 }).unwrap();
        append_record(&path, &R { n: 2 }).unwrap();
        let rows: Vec<R> = read_records(&path).unwrap();
        assert_eq!(rows, vec![R { n: 1 }, R { n: 2 }]);
    }

    #[test]
    fn delimited_splitter_skips_comments() {
        let text = "# config: {}\n# summary: {}\nh,error,pairwise_order\n1,2,\n";
        let (comments, header, rows) = split_delimited(text);
        assert_eq!(comments.len(), 2);
        assert_eq!(header, Some("h,error,pairwise_order"));
        assert_eq!(rows, vec!["1,2,"]);
    }
}
