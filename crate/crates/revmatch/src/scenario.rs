//! Scenario files.
//!
//! A scenario is a JSON document with `"version": 1`. Unknown fields are
//! rejected so that typos fail loudly instead of silently falling back to a
//! default. Function specs use the `{"family", "params"}` form and rules the
//! `{"rule", "gamma", "gamma_r", "gamma_p"}` form of the core crate.
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "tiny",
//!   "population": [
//!     { "count": 2, "delta": 0.8, "alpha": 1.0,
//!       "cost": { "family": "power_cost", "params": [1.0, 2.0] },
//!       "quality": { "family": "linear_quality", "params": [1.0] },
//!       "benefit": { "family": "quadratic_benefit", "params": [-1.0, 2.0] } }
//!   ],
//!   "rule": { "rule": "baseline" },
//!   "mu": 0.1
//! }
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use revmatch_core::{
    trap_threshold, validate_assumption1, AgentSpec, DynamicsConfig, FunctionSpec, Layout, MatchingRule, Population,
    RatingProfile, UpdateMode,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Rating domain used for the assumption checks at load time.
pub const RATING_DOMAIN: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub population: Vec<TypeEntry>,
    pub rule: MatchingRule,
    pub mu: f64,
    #[serde(default = "default_theta0")]
    pub theta0: InitialRatings,
    #[serde(default = "default_mode")]
    pub mode: UpdateMode,
    /// Defaults to the per-type fast path whenever it applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Layout>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    /// Require at least two agents of every type.
    #[serde(default)]
    pub require_pairs: bool,
    #[serde(default = "all_artifacts")]
    pub outputs: Vec<Artifact>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeEntry {
    /// Defaults to the 1-based position in the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_id: Option<usize>,
    pub count: usize,
    pub delta: f64,
    pub alpha: f64,
    #[serde(default = "default_e_max")]
    pub e_max: f64,
    pub cost: FunctionSpec,
    pub quality: FunctionSpec,
    pub benefit: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialRatings {
    Uniform(f64),
    PerAgent(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Trace,
    FinalState,
    CeReport,
}

fn default_theta0() -> InitialRatings {
    InitialRatings::Uniform(1.0)
}

fn default_mode() -> UpdateMode {
    UpdateMode::Expected
}

fn default_e_max() -> f64 {
    1.0
}

fn all_artifacts() -> Vec<Artifact> {
    vec![Artifact::Trace, Artifact::FinalState, Artifact::CeReport]
}

/// A checked scenario, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub population: Population,
    pub theta0: RatingProfile,
    pub config: DynamicsConfig,
    /// Non-fatal findings, one line each.
    pub warnings: Vec<String>,
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let file = read_json::<ScenarioFile>(path)?;
    let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Scenario::from_file(file, &fallback)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Parse { path: PathBuf::from(path), source })
}

impl Scenario {
    pub fn from_file(file: ScenarioFile, fallback_name: &str) -> Result<Scenario> {
        if file.version != SCHEMA_VERSION {
            return Err(Error::invalid("version", format!("expected {SCHEMA_VERSION}, found {}", file.version)));
        }
        if file.population.is_empty() {
            return Err(Error::invalid("population", "no agent types"));
        }
        if !(file.mu > 0.0 && file.mu < 1.0) {
            return Err(Error::invalid("mu", format!("{} is outside (0, 1)", file.mu)));
        }
        file.rule.validate().map_err(|e| Error::invalid("rule", e))?;

        let mut warnings = Vec::new();
        let mut templates = Vec::with_capacity(file.population.len());
        for (i, t) in file.population.iter().enumerate() {
            let field = |f: &str| format!("population[{i}].{f}");
            if t.count == 0 {
                return Err(Error::invalid(field("count"), "must be positive"));
            }
            if file.require_pairs && t.count < 2 {
                return Err(Error::invalid(field("count"), "every type needs at least two agents"));
            }
            let spec = AgentSpec {
                agent_id: 0,
                type_id: t.type_id.unwrap_or(i + 1),
                delta: t.delta,
                alpha: t.alpha,
                e_max: t.e_max,
                cost: t.cost,
                quality: t.quality,
                benefit: t.benefit,
            };
            spec.validate().map_err(|e| Error::invalid(format!("population[{i}]"), e))?;
            let report = validate_assumption1(&spec, RATING_DOMAIN);
            if let Some(c) = report.hard_failures().next() {
                return Err(Error::invalid(format!("population[{i}]"), format!("{} fails", c.property)));
            }
            for c in report.warnings() {
                warnings.push(format!("type {}: {} fails on [{}, {}]", spec.type_id, c.property, RATING_DOMAIN.0, RATING_DOMAIN.1));
            }
            templates.push((spec, t.count));
        }
        let population = Population::from_types(&templates).map_err(|e| Error::invalid("population", e))?;
        let n = population.len();

        let theta0 = match &file.theta0 {
            InitialRatings::Uniform(x) => vec![*x; n],
            InitialRatings::PerAgent(v) if v.len() != n => {
                return Err(Error::invalid("theta0", format!("{} ratings for {n} agents", v.len())));
            }
            InitialRatings::PerAgent(v) => v.clone(),
        };
        if let Some(x) = theta0.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("theta0", format!("{x} is not a rating")));
        }
        let theta0 = RatingProfile::new(theta0);

        let lockstep = population.types().iter().all(|(_, m)| m.iter().all(|&i| theta0.get(i) == theta0.get(m[0])));
        let layout = match (file.layout, file.mode) {
            (Some(Layout::PerType), UpdateMode::Sampled { .. }) => {
                return Err(Error::invalid("layout", "sampled updates need the per-agent layout"));
            }
            (Some(Layout::PerType), _) if !lockstep => {
                return Err(Error::invalid("layout", "per-type layout needs equal starting ratings within each type"));
            }
            (Some(l), _) => l,
            (None, UpdateMode::Expected) if lockstep => Layout::PerType,
            (None, _) => Layout::PerAgent,
        };

        let mut config = DynamicsConfig { mode: file.mode, layout, ..DynamicsConfig::new(file.rule, file.mu) };
        if let Some(tol) = file.tol {
            if !(tol > 0.0) {
                return Err(Error::invalid("tol", format!("{tol} must be positive")));
            }
            config.tol = tol;
        }
        if let Some(m) = file.max_iters {
            if m == 0 {
                return Err(Error::invalid("max_iters", "must be positive"));
            }
            config.max_iters = m;
        }

        if let InitialRatings::Uniform(x) = file.theta0 {
            if let Some(w) = trap_warning(&population, file.mu, x) {
                warnings.push(w);
            }
        }

        let name = file.name.clone().unwrap_or_else(|| fallback_name.to_string());
        Ok(Scenario { name, file, population, theta0, config, warnings })
    }

    /// The same scenario with one field replaced, revalidated.
    pub fn modified(&self, edit: impl FnOnce(&mut ScenarioFile)) -> Result<Scenario> {
        let mut file = self.file.clone();
        edit(&mut file);
        let mut s = Scenario::from_file(file, &self.name)?;
        s.name.clone_from(&self.name);
        Ok(s)
    }

    pub fn wants(&self, a: Artifact) -> bool {
        self.file.outputs.contains(&a)
    }
}

/// Types whose low-rating threshold lies at or above a uniform start hold
/// that rating for as long as everybody shares it.
fn trap_warning(population: &Population, mu: f64, theta0: f64) -> Option<String> {
    let mut stuck = Vec::new();
    for a in population.representatives() {
        if let Ok(t) = trap_threshold(a, mu) {
            if theta0 <= t {
                stuck.push(a.type_id);
            }
        }
    }
    if stuck.is_empty() {
        return None;
    }
    let n = population.types().len();
    let mut msg = String::new();
    if stuck.len() == n {
        let _ = write!(msg, "theta0 {theta0} is at or below the low-rating threshold of every type at mu {mu}; the ratings will not move");
    } else {
        let ids: Vec<String> = stuck.iter().map(|t| t.to_string()).collect();
        let _ = write!(
            msg,
            "theta0 {theta0} is at or below the low-rating threshold of type(s) {} at mu {mu}; they hold it while all ratings are equal",
            ids.join(",")
        );
    }
    Some(msg)
}
