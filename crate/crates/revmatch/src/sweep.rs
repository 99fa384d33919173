//! Parameter sweeps: one run per value, run in parallel, summarized in a
//! single table.
//!
//! ```json
//! {
//!   "version": 1,
//!   "base": "ten_types.json",
//!   "mu": 0.3,
//!   "parameter": "gamma",
//!   "values": [-0.1, 0, 0.1]
//! }
//! ```
//!
//! `base` is a path relative to the sweep file or an inline scenario. `mu`
//! optionally overrides the base step size. Values are numbers, or
//! `[gamma_r, gamma_p]` pairs for `gamma_r_gamma_p_pair`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use revmatch_core::{designer_objectives, MatchingRule, Objectives, Verdict};
use serde::{Deserialize, Serialize};

use crate::artifacts::{iterations, num, run_scenario};
use crate::error::{Error, Result};
use crate::scenario::{read_json, InitialRatings, Scenario, ScenarioFile, SCHEMA_VERSION};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base: BaseRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub parameter: Parameter,
    pub values: Vec<SweepValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseRef {
    Path(PathBuf),
    Inline(Box<ScenarioFile>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Gamma,
    GammaRGammaPPair,
    Mu,
    Theta0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Scalar(f64),
    Pair(f64, f64),
}

impl Parameter {
    fn columns(self) -> &'static [&'static str] {
        match self {
            Parameter::Gamma => &["gamma"],
            Parameter::GammaRGammaPPair => &["gamma_r", "gamma_p"],
            Parameter::Mu => &["mu"],
            Parameter::Theta0 => &["theta0"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub parameter: Parameter,
    pub values: Vec<SweepValue>,
    pub base: Scenario,
}

pub fn load_sweep(path: impl AsRef<Path>) -> Result<SweepSpec> {
    let path = path.as_ref();
    let file: SweepFile = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    SweepSpec::from_file(file, dir, &fallback)
}

impl SweepSpec {
    pub fn from_file(file: SweepFile, dir: &Path, fallback_name: &str) -> Result<SweepSpec> {
        if file.version != SCHEMA_VERSION {
            return Err(Error::invalid("version", format!("expected {SCHEMA_VERSION}, found {}", file.version)));
        }
        let mut base = match file.base {
            BaseRef::Path(p) => crate::scenario::load_scenario(dir.join(p))?,
            BaseRef::Inline(f) => Scenario::from_file(*f, "base")?,
        };
        if let Some(mu) = file.mu {
            base = base.modified(|f| f.mu = mu)?;
        }
        let spec = SweepSpec {
            name: file.name.unwrap_or_else(|| fallback_name.to_string()),
            parameter: file.parameter,
            values: file.values,
            base,
        };
        if spec.values.is_empty() {
            return Err(Error::invalid("values", "empty"));
        }
        for (i, v) in spec.values.iter().enumerate() {
            spec.cell(*v).map_err(|e| Error::invalid(format!("values[{i}]"), e))?;
        }
        Ok(spec)
    }

    /// The scenario for one value.
    pub fn cell(&self, v: SweepValue) -> Result<Scenario> {
        match (self.parameter, v) {
            (Parameter::Gamma, SweepValue::Scalar(gamma)) => self.base.modified(|f| f.rule = MatchingRule::Asymmetric { gamma }),
            (Parameter::GammaRGammaPPair, SweepValue::Pair(gamma_r, gamma_p)) => {
                self.base.modified(|f| f.rule = MatchingRule::LongRange { gamma_r, gamma_p })
            }
            (Parameter::Mu, SweepValue::Scalar(mu)) => self.base.modified(|f| f.mu = mu),
            (Parameter::Theta0, SweepValue::Scalar(x)) => self.base.modified(|f| f.theta0 = InitialRatings::Uniform(x)),
            (p, _) => Err(Error::invalid("values", format!("wrong shape for {:?}", p))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: SweepValue,
    /// `None` when the cell could not run at all.
    pub verdict: Option<Verdict>,
    pub iterations: usize,
    pub objectives: Objectives,
    pub quality_argmax: bool,
    pub welfare_argmax: bool,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn converged(&self) -> bool {
        matches!(self.verdict, Some(Verdict::Converged { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub parameter: Parameter,
    pub rows: Vec<SweepRow>,
}

/// Runs every cell on `jobs` threads, or rayon's default when `None`.
///
/// Argmax marks go to the best converged cells; a cell that failed to
/// converge is kept in the table but never marked.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid("jobs", e))?;
    let mut rows: Vec<SweepRow> = pool.install(|| spec.values.par_iter().map(|&v| run_cell(spec, v)).collect());

    let best = |key: fn(&Objectives) -> f64| {
        rows.iter()
            .enumerate()
            .filter(|(_, r)| r.converged())
            .fold(None, |acc: Option<(usize, f64)>, (i, r)| match acc {
                Some((_, b)) if key(&r.objectives) <= b => acc,
                _ => Some((i, key(&r.objectives))),
            })
            .map(|(i, _)| i)
    };
    let q = best(|o| o.sum_quality);
    let w = best(|o| o.welfare);
    if let Some(i) = q {
        rows[i].quality_argmax = true;
    }
    if let Some(i) = w {
        rows[i].welfare_argmax = true;
    }
    Ok(SweepSummary { parameter: spec.parameter, rows })
}

fn run_cell(spec: &SweepSpec, v: SweepValue) -> SweepRow {
    let mut row = SweepRow {
        value: v,
        verdict: None,
        iterations: 0,
        objectives: Objectives::default(),
        quality_argmax: false,
        welfare_argmax: false,
        error: None,
    };
    match spec.cell(v).and_then(|s| run_scenario(&s).map(|o| (s, o))) {
        Ok((s, out)) => {
            row.verdict = Some(out.verdict);
            row.iterations = iterations(&out);
            row.objectives = designer_objectives(&out.final_state, &s.population);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

impl SweepSummary {
    pub fn quality_argmax(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.quality_argmax)
    }

    pub fn welfare_argmax(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.welfare_argmax)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head: Vec<&str> = self.parameter.columns().to_vec();
        head.extend([
            "verdict",
            "converged",
            "iterations",
            "sum_quality",
            "mean_quality",
            "type_mean_quality",
            "type_sum_quality",
            "welfare",
            "mean_welfare",
            "type_mean_welfare",
            "type_sum_welfare",
            "quality_argmax",
            "welfare_argmax",
            "error",
        ]);
        w.write_record(&head)?;
        for r in &self.rows {
            let mut rec: Vec<String> = match r.value {
                SweepValue::Scalar(x) => vec![num(x)],
                SweepValue::Pair(a, b) => vec![num(a), num(b)],
            };
            let o = &r.objectives;
            rec.push(match r.verdict {
                Some(Verdict::Converged { .. }) => "converged".into(),
                Some(Verdict::Oscillating { period }) => format!("oscillating(period {period})"),
                Some(Verdict::MaxIters) => "max_iters".into(),
                None => "error".into(),
            });
            rec.push(r.converged().to_string());
            rec.push(r.iterations.to_string());
            for x in [
                o.sum_quality,
                o.mean_quality,
                o.type_mean_quality,
                o.type_sum_quality,
                o.welfare,
                o.mean_welfare,
                o.type_mean_welfare,
                o.type_sum_welfare,
            ] {
                rec.push(num(x));
            }
            rec.push(r.quality_argmax.to_string());
            rec.push(r.welfare_argmax.to_string());
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
