//! Running one scenario and rendering what it produced.

use std::path::Path;

use revmatch_core::{
    capability_order_monitor, check_equilibrium_inequalities, designer_objectives, run, trap_threshold, CeReport,
    DynamicsState, MonitorOutcome, Objectives, RunOutcome, TraceRow, Verdict,
};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{Artifact, Scenario};

pub const TRACE_FILE: &str = "trace.csv";
pub const FINAL_STATE_FILE: &str = "final_state.csv";
pub const CE_REPORT_FILE: &str = "ce_report.json";

/// Exit status for a finished run.
pub fn exit_code(v: &Verdict) -> i32 {
    match v {
        Verdict::Converged { .. } => 0,
        Verdict::Oscillating { .. } => 2,
        Verdict::MaxIters => 3,
    }
}

pub fn run_scenario(s: &Scenario) -> Result<RunOutcome> {
    Ok(run(&DynamicsState::initial(s.theta0.clone()), &s.population, &s.config)?)
}

/// Steps taken: the convergence time, or the whole trace otherwise.
pub fn iterations(out: &RunOutcome) -> usize {
    match out.verdict {
        Verdict::Converged { at } => at,
        _ => out.trace.len() - 1,
    }
}

/// Shortest text that parses back to the same number.
pub(crate) fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn trace_csv(s: &Scenario, trace: &[TraceRow]) -> Result<String> {
    let ids: Vec<usize> = s.population.types().iter().map(|t| t.0).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["t".to_string()];
    head.extend(ids.iter().map(|k| format!("type_{k}_rating")));
    head.extend(ids.iter().map(|k| format!("type_{k}_effort")));
    head.extend(["l1_delta", "rho", "sum_quality", "welfare"].map(String::from));
    w.write_record(&head)?;
    for r in trace {
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.type_rating.iter().copied().map(num));
        rec.extend(r.type_effort.iter().copied().map(num));
        rec.push(opt(r.l1_delta));
        rec.push(opt(r.rho));
        rec.push(num(r.sum_quality));
        rec.push(num(r.welfare));
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn final_state_csv(s: &Scenario, state: &DynamicsState) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["agent_id", "type_id", "rating", "effort", "beta", "load", "payoff"])?;
    for a in s.population.agents() {
        let i = a.agent_id;
        w.write_record([
            i.to_string(),
            a.type_id.to_string(),
            num(state.profile.get(i)),
            num(state.efforts[i]),
            num(state.betas[i]),
            num(state.loads[i]),
            num(state.payoffs[i]),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport<'a> {
    pub scenario: &'a str,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// The oscillation verdict comes from a revisit heuristic, not a proof.
    pub classifier: &'static str,
    pub iterations: usize,
    pub objectives: Objectives,
    /// Largest contraction ratio after the first move, if any was defined.
    pub max_rho_after_first_step: Option<f64>,
    pub ce: &'a CeReport,
    pub inequalities_hold: bool,
    pub inequality_failures: Vec<usize>,
    pub capability_monitor: Monitor,
    pub low_rating_thresholds: Vec<(usize, Option<f64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Monitor {
    pub applies: bool,
    /// `(t, less capable type, more capable type)` where the order broke.
    pub violations: Vec<(usize, usize, usize)>,
}

pub fn run_report<'a>(s: &'a Scenario, out: &'a RunOutcome) -> RunReport<'a> {
    let ineq = check_equilibrium_inequalities(&out.final_state.profile, &s.population, &s.config.rule, s.config.mu, out.ce.tol);
    let capability_monitor = match capability_order_monitor(&out.trace, &s.population) {
        MonitorOutcome::PreconditionUnmet => Monitor { applies: false, violations: vec![] },
        MonitorOutcome::Checked(v) => Monitor { applies: true, violations: v },
    };
    RunReport {
        scenario: &s.name,
        verdict: out.verdict,
        classifier: "oscillation is flagged heuristically: a revisited profile inside a window of non-shrinking moves",
        iterations: iterations(out),
        objectives: designer_objectives(&out.final_state, &s.population),
        max_rho_after_first_step: max_rho_after_first_step(&out.trace),
        ce: &out.ce,
        inequalities_hold: ineq.all_hold(),
        inequality_failures: ineq.agents.iter().enumerate().filter(|(_, q)| !q.holds).map(|(i, _)| i).collect(),
        capability_monitor,
        low_rating_thresholds: s.population.representatives().map(|a| (a.type_id, trap_threshold(a, s.config.mu).ok())).collect(),
    }
}

/// Trace row `t` carries `‖θ^t−θ^{t−1}‖₁ / ‖θ^{t−1}−θ^{t−2}‖₁`, so the ratios
/// that do not involve the first move start at row 3.
pub fn max_rho_after_first_step(trace: &[TraceRow]) -> Option<f64> {
    trace.iter().filter(|r| r.t >= 3).filter_map(|r| r.rho).reduce(f64::max)
}

/// The requested artifacts as `(file name, contents)`.
pub fn render(s: &Scenario, out: &RunOutcome) -> Result<Vec<(&'static str, String)>> {
    let mut files = Vec::new();
    if s.wants(Artifact::Trace) {
        files.push((TRACE_FILE, trace_csv(s, &out.trace)?));
    }
    if s.wants(Artifact::FinalState) {
        files.push((FINAL_STATE_FILE, final_state_csv(s, &out.final_state)?));
    }
    if s.wants(Artifact::CeReport) {
        let mut json = serde_json::to_string_pretty(&run_report(s, out))?;
        json.push('\n');
        files.push((CE_REPORT_FILE, json));
    }
    Ok(files)
}

pub fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}
