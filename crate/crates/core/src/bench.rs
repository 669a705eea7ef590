//! Benchmark harness over a corpus directory.
//!
//! Every `NAME.ptrs` with a sidecar `NAME.expected` is proved for each goal
//! listed there; a sidecar line reads `GOAL ANSWER`, e.g. `ast MAYBE`. Any
//! deviation from the expected answer, a rejected proof or an unreadable
//! input is a regression.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::adp::Goal;
use crate::proof::check_proof;
use crate::prover::{prove, Answer, ProverConfig};
use crate::syntax::parse_ptrs;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Sidecar { path: PathBuf, line: usize, msg: String },
}

/// Expected answers of one sidecar.
pub fn parse_expected(path: &Path, text: &str) -> Result<Vec<(Goal, Answer)>, BenchError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| BenchError::Sidecar {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let mut it = line.split_whitespace();
        let (Some(g), Some(a), None) = (it.next(), it.next(), it.next()) else {
            return Err(err("expected `GOAL ANSWER`".into()));
        };
        out.push((g.parse().map_err(err)?, a.parse().map_err(err)?));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub file: String,
    pub goal: Goal,
    pub expected: Answer,
    pub answer: Answer,
    pub time: Duration,
    /// Number of proof nodes; 0 for MAYBE.
    pub proof_size: usize,
    /// Replay result of the emitted proof, if any.
    pub proof_error: Option<String>,
}

impl BenchRow {
    pub fn is_regression(&self) -> bool {
        self.answer != self.expected || self.proof_error.is_some()
    }
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Inputs that could not be processed, with the reason.
    pub failures: Vec<(String, String)>,
}

impl BenchReport {
    pub fn regressions(&self) -> usize {
        self.rows.iter().filter(|r| r.is_regression()).count() + self.failures.len()
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:<5} {:<8} {:<8} {:>10} {:>6}  status",
            "file", "goal", "expected", "answer", "time_ms", "proof"
        );
        for r in &self.rows {
            let status = match (&r.proof_error, r.answer == r.expected) {
                (Some(e), _) => format!("REGRESSION (proof rejected: {e})"),
                (None, false) => "REGRESSION".to_string(),
                (None, true) => "ok".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<20} {:<5} {:<8} {:<8} {:>10.1} {:>6}  {status}",
                r.file,
                r.goal.to_string(),
                r.expected.to_string(),
                r.answer.to_string(),
                r.time.as_secs_f64() * 1e3,
                r.proof_size
            );
        }
        for (file, why) in &self.failures {
            let _ = writeln!(out, "{file:<20} ERROR {why}");
        }
        let _ = write!(
            out,
            "{} checks, {} regressions",
            self.rows.len() + self.failures.len(),
            self.regressions()
        );
        f.write_str(&out)
    }
}

fn read(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the prover on every corpus entry with a sidecar, in file name
/// order. Only an unreadable directory is an error; problems with single
/// entries are reported as failures.
pub fn run_benchmarks(dir: &Path, config: &ProverConfig) -> Result<BenchReport, BenchError> {
    let io = |source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut inputs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ptrs"))
        .collect();
    inputs.sort();
    let mut report = BenchReport::default();
    for input in inputs {
        let sidecar = input.with_extension("expected");
        if !sidecar.exists() {
            continue;
        }
        let name = input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let expected = match read(&sidecar).and_then(|t| parse_expected(&sidecar, &t)) {
            Ok(e) => e,
            Err(e) => {
                report.failures.push((name, e.to_string()));
                continue;
            }
        };
        let r = match read(&input).map(|t| parse_ptrs(&t)) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => {
                report.failures.push((name, e.to_string()));
                continue;
            }
            Err(e) => {
                report.failures.push((name, e.to_string()));
                continue;
            }
        };
        for (goal, want) in expected {
            let v = prove(&r, goal, config);
            let proof_error = v
                .proof
                .as_ref()
                .and_then(|doc| check_proof(doc).err().map(|e| e.to_string()));
            report.rows.push(BenchRow {
                file: name.clone(),
                goal,
                expected: want,
                answer: v.answer,
                time: v.elapsed,
                proof_size: v.proof.as_ref().map_or(0, |d| d.root.size()),
                proof_error,
            });
        }
    }
    Ok(report)
}
