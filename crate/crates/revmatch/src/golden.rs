//! Golden-output regression.
//!
//! A golden directory holds one subdirectory per case. Each case has either
//! `scenario.json` or `sweep.json` and an `expected/` directory with the
//! files a fresh run should produce. Expected-mode cases must match byte for
//! byte; sampled cases are compared field by field to `1e-10`.

use std::fmt;
use std::path::{Path, PathBuf};

use revmatch_core::UpdateMode;

use crate::artifacts::{render, run_scenario, write_files};
use crate::error::{Error, Result};
use crate::scenario::load_scenario;
use crate::sweep::{load_sweep, run_sweep, SUMMARY_FILE};

pub const NUMERIC_TOL: f64 = 1e-10;

/// Most differences listed per file.
const MAX_DIFFS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Diff {
    pub file: String,
    /// 1-based line in the expected file.
    pub line: usize,
    pub column: String,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for Diff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} [{}] expected {:?}, found {:?}", self.file, self.line, self.column, self.expected, self.found)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub diffs: Vec<Diff>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldenReport {
    pub cases: Vec<CaseResult>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.diffs.is_empty())
    }
}

impl fmt::Display for GoldenReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cases {
            if c.diffs.is_empty() {
                writeln!(f, "ok   {}", c.name)?;
            } else {
                writeln!(f, "FAIL {}", c.name)?;
                for d in &c.diffs {
                    writeln!(f, "     {d}")?;
                }
            }
        }
        Ok(())
    }
}

fn cases(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.join("scenario.json").is_file() || p.join("sweep.json").is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Recomputes one case: `(files, exact)` where `exact` asks for a byte match.
fn produce(case: &Path, jobs: Option<usize>) -> Result<(Vec<(String, String)>, bool)> {
    let sc = case.join("scenario.json");
    if sc.is_file() {
        let s = load_scenario(&sc)?;
        let out = run_scenario(&s)?;
        let files = render(&s, &out)?.into_iter().map(|(n, b)| (n.to_string(), b)).collect();
        return Ok((files, s.config.mode == UpdateMode::Expected));
    }
    let spec = load_sweep(case.join("sweep.json"))?;
    let summary = run_sweep(&spec, jobs)?;
    Ok((vec![(SUMMARY_FILE.to_string(), summary.to_csv()?)], spec.base.config.mode == UpdateMode::Expected))
}

/// Reruns every case under `dir` and compares with `expected/`. With
/// `bless`, overwrites the expected files instead.
pub fn verify_golden(dir: impl AsRef<Path>, jobs: Option<usize>, bless: bool) -> Result<GoldenReport> {
    let mut report = GoldenReport::default();
    for case in cases(dir.as_ref())? {
        let name = case.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let (files, exact) = produce(&case, jobs)?;
        let expected_dir = case.join("expected");
        if bless {
            let borrowed: Vec<(&str, String)> = files.iter().map(|(n, b)| (n.as_str(), b.clone())).collect();
            write_files(&expected_dir, &borrowed)?;
            report.cases.push(CaseResult { name, diffs: vec![] });
            continue;
        }
        let mut diffs = Vec::new();
        for (file, found) in &files {
            let p = expected_dir.join(file);
            let expected = match std::fs::read_to_string(&p) {
                Ok(s) => s,
                Err(_) => {
                    diffs.push(Diff { file: file.clone(), line: 0, column: String::new(), expected: "<file>".into(), found: "<missing golden>".into() });
                    continue;
                }
            };
            if expected == *found {
                continue;
            }
            let tol = if exact { 0.0 } else { NUMERIC_TOL };
            let mut d = compare(file, &expected, found, tol);
            if exact && d.is_empty() {
                // same numbers, different bytes
                d = compare(file, &expected, found, -1.0);
            }
            diffs.extend(d);
        }
        report.cases.push(CaseResult { name, diffs });
    }
    Ok(report)
}

/// Located differences between two renderings of the same file. Numeric
/// fields match within `tol` (relative above 1); a negative `tol` compares
/// text only.
pub fn compare(file: &str, expected: &str, found: &str, tol: f64) -> Vec<Diff> {
    let e: Vec<&str> = expected.lines().collect();
    let f: Vec<&str> = found.lines().collect();
    let header: Vec<&str> = if file.ends_with(".csv") { e.first().map(|h| h.split(',').collect()).unwrap_or_default() } else { vec![] };
    let mut out = Vec::new();
    for i in 0..e.len().max(f.len()) {
        let (a, b) = (e.get(i).copied().unwrap_or("<eof>"), f.get(i).copied().unwrap_or("<eof>"));
        if a == b {
            continue;
        }
        let (fa, fb) = (split_fields(file, a), split_fields(file, b));
        let mut located = false;
        for j in 0..fa.len().max(fb.len()) {
            let (x, y) = (fa.get(j).copied().unwrap_or(""), fb.get(j).copied().unwrap_or(""));
            if field_matches(x, y, tol) {
                continue;
            }
            located = true;
            let column = header.get(j).map(|s| s.to_string()).unwrap_or_else(|| format!("field {}", j + 1));
            out.push(Diff { file: file.to_string(), line: i + 1, column, expected: x.to_string(), found: y.to_string() });
            break;
        }
        if !located && tol < 0.0 {
            out.push(Diff { file: file.to_string(), line: i + 1, column: "line".into(), expected: a.to_string(), found: b.to_string() });
        }
        if out.len() >= MAX_DIFFS {
            break;
        }
    }
    out
}

fn split_fields<'a>(file: &str, line: &'a str) -> Vec<&'a str> {
    if file.ends_with(".csv") {
        line.split(',').collect()
    } else {
        line.split(|c: char| c.is_whitespace() || c == ',' || c == ':' || c == '[' || c == ']').filter(|s| !s.is_empty()).collect()
    }
}

fn field_matches(x: &str, y: &str, tol: f64) -> bool {
    if x == y {
        return true;
    }
    if tol < 0.0 {
        return false;
    }
    match (x.parse::<f64>(), y.parse::<f64>()) {
        (Ok(a), Ok(b)) => (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0),
        _ => false,
    }
}
