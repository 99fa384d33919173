//! The repeated best-response loop, its convergence verdicts, and checks on
//! where it ends up.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::function::{is_more_capable, AgentSpec, FunctionSpec};
use crate::matching::{level_loads, match_probabilities, sample_assignment, BenefitCurve, MatchingRule};
use crate::rating::{check_mu, quantize, RatingDistribution, RatingProfile};
use crate::response::best_response_on;
use crate::{Error, Result};

/// Agents indexed by id, with same-type agents sharing every primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    agents: Vec<AgentSpec>,
    /// `(type_id, member ids)` ordered by type id.
    types: Vec<(usize, Vec<usize>)>,
}

impl Population {
    pub fn new(agents: Vec<AgentSpec>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        let mut types: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, a) in agents.iter().enumerate() {
            a.validate()?;
            if a.agent_id != i {
                return Err(Error::Parameter { name: "agent_id", value: a.agent_id as f64 });
            }
            match types.iter_mut().find(|t| t.0 == a.type_id) {
                Some(t) => {
                    let r = &agents[t.1[0]];
                    let same = AgentSpec { agent_id: r.agent_id, ..*a } == *r;
                    if !same {
                        return Err(Error::NotLockstep(a.type_id));
                    }
                    t.1.push(i);
                }
                None => types.push((a.type_id, alloc::vec![i])),
            }
        }
        types.sort_by_key(|t| t.0);
        Ok(Population { agents, types })
    }

    /// `count` copies of each type template, ids assigned in order.
    pub fn from_types(templates: &[(AgentSpec, usize)]) -> Result<Self> {
        let mut agents = Vec::new();
        for (t, n) in templates {
            for _ in 0..*n {
                agents.push(AgentSpec { agent_id: agents.len(), ..*t });
            }
        }
        Self::new(agents)
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// `(type_id, member ids)` ordered by type id.
    pub fn types(&self) -> &[(usize, Vec<usize>)] {
        &self.types
    }

    /// One agent of each type, in type order.
    pub fn representatives(&self) -> impl Iterator<Item = &AgentSpec> {
        self.types.iter().map(|t| &self.agents[t.1[0]])
    }
}

/// How "reviewed this slot" is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Deterministic: an agent whose expected load reaches one reviews.
    Expected,
    /// A concrete assignment is drawn every slot.
    Sampled { seed: u64 },
}

/// Whether each agent is solved separately or once per type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    PerAgent,
    /// Valid while same-type agents share their state, which a common start
    /// preserves in expected mode.
    PerType,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub rule: MatchingRule,
    pub mu: f64,
    pub mode: UpdateMode,
    pub layout: Layout,
    /// Threshold on the L1 rating change.
    pub tol: f64,
    pub max_iters: usize,
    /// Consecutive small steps needed to call convergence.
    pub confirm: usize,
    /// Window of the oscillation detector.
    pub window: usize,
}

impl DynamicsConfig {
    pub fn new(rule: MatchingRule, mu: f64) -> Self {
        DynamicsConfig {
            rule,
            mu,
            mode: UpdateMode::Expected,
            layout: Layout::PerAgent,
            tol: 1e-8,
            max_iters: 10_000,
            confirm: 10,
            window: 200,
        }
    }
}

/// Everything the loop carries from one slot to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsState {
    pub t: usize,
    pub profile: RatingProfile,
    /// Conjecture offsets.
    pub betas: Vec<f64>,
    /// Efforts chosen in the last slot.
    pub efforts: Vec<f64>,
    /// Slot payoff each agent got in the last slot: benefit minus load·cost.
    pub payoffs: Vec<f64>,
    /// Expected review load each agent faced in the last slot.
    pub loads: Vec<f64>,
}

impl DynamicsState {
    pub fn initial(profile: RatingProfile) -> Self {
        let n = profile.len();
        DynamicsState {
            t: 0,
            profile,
            betas: alloc::vec![0.0; n],
            efforts: alloc::vec![0.0; n],
            payoffs: alloc::vec![0.0; n],
            loads: alloc::vec![0.0; n],
        }
    }

    fn lockstep_type(&self, population: &Population) -> Option<usize> {
        for (tid, members) in population.types() {
            let r = members[0];
            let differs = members.iter().any(|&i| {
                self.profile.get(i) != self.profile.get(r)
                    || self.betas[i] != self.betas[r]
                    || self.efforts[i] != self.efforts[r]
            });
            if differs {
                return Some(*tid);
            }
        }
        None
    }
}

/// Agents solved together: one agent, or a whole type in lockstep.
struct Cohort<'a> {
    members: &'a [usize],
}

fn cohorts<'a>(population: &'a Population, layout: Layout, singles: &'a [usize]) -> Vec<Cohort<'a>> {
    match layout {
        Layout::PerType => population.types().iter().map(|t| Cohort { members: &t.1 }).collect(),
        Layout::PerAgent => singles.chunks(1).map(|c| Cohort { members: c }).collect(),
    }
}

/// Per-level multiset of review qualities, for expected benefits.
struct Reviewers {
    /// Indexed like the distribution levels: `(quality, count)`.
    by_level: Vec<Vec<(f64, usize)>>,
}

impl Reviewers {
    fn new(d: &RatingDistribution, entries: impl Iterator<Item = (f64, f64, usize)>) -> Self {
        let mut by_level: Vec<Vec<(f64, usize)>> = alloc::vec![Vec::new(); d.len()];
        for (theta, q, n) in entries {
            let k = d.rank_of(theta).expect("rating is a level");
            let slot = &mut by_level[k - 1];
            match slot.iter_mut().find(|e| e.0 == q) {
                Some(e) => e.1 += n,
                None => slot.push((q, n)),
            }
        }
        Reviewers { by_level }
    }

    /// Mean benefit `b(q_j)` over agents at rank `r`, leaving out one agent
    /// of quality `own` when `r` is the owner's own rank.
    fn mean_benefit(&self, benefit: &FunctionSpec, r: usize, own: Option<f64>) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for &(q, c) in &self.by_level[r - 1] {
            sum += c as f64 * benefit.value(q);
            n += c;
        }
        if let Some(q) = own {
            sum -= benefit.value(q);
            n -= 1;
        }
        if n == 0 { 0.0 } else { sum / n as f64 }
    }
}

/// Expected slot payoff for an owner at rank `k` of `d`.
fn expected_payoff(
    rule: &MatchingRule,
    d: &RatingDistribution,
    reviewers: &Reviewers,
    agent: &AgentSpec,
    theta: f64,
    effort: f64,
    load: f64,
) -> f64 {
    let k = d.rank_of(theta).expect("rating is a level");
    let m = match_probabilities(rule, d, k, theta);
    let own_q = agent.quality.value(effort);
    let benefit: f64 = m
        .entries
        .iter()
        .map(|&(r, p)| p * reviewers.mean_benefit(&agent.benefit, r, (r == k).then_some(own_q)))
        .sum();
    benefit - load * agent.cost.value(effort)
}

fn derived_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One slot: everyone best-responds to the current ratings, ratings move
/// toward the quality each agent delivered, conjecture offsets are reset to
/// make the conjecture match the realized payoff.
pub fn step(state: &DynamicsState, population: &Population, config: &DynamicsConfig) -> Result<DynamicsState> {
    check_mu(config.mu)?;
    let n = population.len();
    if state.profile.len() != n {
        return Err(Error::SizeMismatch { expected: n, found: state.profile.len() });
    }
    if config.layout == Layout::PerType {
        if let UpdateMode::Sampled { .. } = config.mode {
            return Err(Error::Assumption("sampled updates need the per-agent layout"));
        }
        if let Some(t) = state.lockstep_type(population) {
            return Err(Error::NotLockstep(t));
        }
    }
    let mu = config.mu;
    let rule = &config.rule;
    let singles: Vec<usize> = (0..n).collect();
    let groups = cohorts(population, config.layout, &singles);

    let d = RatingDistribution::from_weighted(groups.iter().map(|c| (state.profile.get(c.members[0]), c.members.len())));
    let loads = level_loads(rule, &d);

    let mut next = state.clone();
    next.t = state.t + 1;
    let mut curves = Vec::with_capacity(groups.len());
    for c in &groups {
        let i = c.members[0];
        let agent = &population.agents()[i];
        let theta = state.profile.get(i);
        let k = d.rank_of(theta).expect("rating is a level");
        let others = d.remove_one(theta).expect("rating is held");
        let curve = BenefitCurve::new(rule, &agent.benefit, &others);
        let load = loads[k - 1];
        let br = best_response_on(&curve, agent, theta, mu, load);
        for &m in c.members {
            next.efforts[m] = br.effort;
            next.loads[m] = load;
        }
        curves.push(curve);
    }

    let assignment = match config.mode {
        UpdateMode::Sampled { seed } => Some(sample_assignment(rule, &state.profile, derived_seed(seed, state.t))),
        UpdateMode::Expected => None,
    };

    let reviewers = Reviewers::new(
        &d,
        groups.iter().map(|c| {
            let i = c.members[0];
            (state.profile.get(i), population.agents()[i].quality.value(next.efforts[i]), c.members.len())
        }),
    );

    for (c, curve) in groups.iter().zip(&curves) {
        for &i in c.members {
            let agent = &population.agents()[i];
            let theta = state.profile.get(i);
            let e = next.efforts[i];
            let q = agent.quality.value(e);
            let (reviewed, payoff) = match &assignment {
                None => {
                    let load = next.loads[i];
                    (load >= 1.0 - 1e-9, expected_payoff(rule, &d, &reviewers, agent, theta, e, load))
                }
                Some(a) => {
                    let got = a.reviewer_of[i]
                        .map_or(0.0, |j| agent.benefit.value(population.agents()[j].quality.value(next.efforts[j])));
                    (a.review_load[i] >= 1, got - a.review_load[i] as f64 * agent.cost.value(e))
                }
            };
            let x = (1.0 - mu) * theta + mu * q;
            next.payoffs[i] = payoff;
            next.betas[i] = payoff - agent.alpha * curve.value(x);
            if reviewed {
                next.profile.set(i, x);
            }
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    /// Ratings stopped moving after slot `at`.
    Converged { at: usize },
    /// Heuristic: the change kept up and a recent profile came back.
    Oscillating { period: usize },
    MaxIters,
}

/// One slot of a run, summarised per type.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub type_rating: Vec<f64>,
    pub type_rating_min: Vec<f64>,
    pub type_rating_max: Vec<f64>,
    pub type_effort: Vec<f64>,
    /// L1 change from the previous row; none for the first.
    pub l1_delta: Option<f64>,
    /// Ratio of this change to the previous one.
    pub rho: Option<f64>,
    pub sum_quality: f64,
    pub welfare: f64,
}

fn trace_row(state: &DynamicsState, population: &Population, l1_delta: Option<f64>, rho: Option<f64>) -> TraceRow {
    let mut row = TraceRow {
        t: state.t,
        type_rating: Vec::new(),
        type_rating_min: Vec::new(),
        type_rating_max: Vec::new(),
        type_effort: Vec::new(),
        l1_delta,
        rho,
        sum_quality: 0.0,
        welfare: 0.0,
    };
    for (_, members) in population.types() {
        let (mut lo, mut hi, mut sum, mut esum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0.0);
        for &i in members {
            let x = state.profile.get(i);
            lo = lo.min(x);
            hi = hi.max(x);
            sum += x;
            esum += state.efforts[i];
        }
        let n = members.len() as f64;
        row.type_rating.push(sum / n);
        row.type_rating_min.push(lo);
        row.type_rating_max.push(hi);
        row.type_effort.push(esum / n);
    }
    let o = designer_objectives(state, population);
    row.sum_quality = o.sum_quality;
    row.welfare = o.welfare;
    row
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub verdict: Verdict,
    /// Row 0 is the starting state.
    pub trace: Vec<TraceRow>,
    pub final_state: DynamicsState,
    pub ce: CeReport,
}

/// Iterates [`step`] until the ratings settle, an oscillation is detected
/// or `max_iters` slots have passed.
pub fn run(state0: &DynamicsState, population: &Population, config: &DynamicsConfig) -> Result<RunOutcome> {
    if !(config.tol > 0.0) {
        return Err(Error::Parameter { name: "tol", value: config.tol });
    }
    let mut trace = alloc::vec![trace_row(state0, population, None, None)];
    let mut state = state0.clone();
    let mut streak = 0usize;
    let mut prev_delta: Option<f64> = None;
    let mut history: Vec<RatingProfile> = alloc::vec![state.profile.clone()];
    let mut deltas: Vec<f64> = Vec::new();
    let mut verdict = Verdict::MaxIters;

    for _ in 0..config.max_iters {
        let next = step(&state, population, config)?;
        let delta = next.profile.l1_distance(&state.profile);
        let rho = prev_delta.and_then(|p| (p > 0.0).then(|| delta / p));
        trace.push(trace_row(&next, population, Some(delta), rho));
        prev_delta = Some(delta);
        state = next;

        if delta < config.tol {
            streak += 1;
            if streak >= config.confirm {
                verdict = Verdict::Converged { at: state.t - config.confirm };
                break;
            }
        } else {
            streak = 0;
        }

        deltas.push(delta);
        history.push(state.profile.clone());
        let w = config.window;
        if history.len() > w + 1 {
            history.remove(0);
            deltas.remove(0);
        }
        if deltas.len() == w {
            if let Some(period) = oscillation(&history, &deltas, config.tol) {
                verdict = Verdict::Oscillating { period };
                break;
            }
        }
    }
    let ce = verify_ce(&state, population, &config.rule, config.mu, 1e-6);
    Ok(RunOutcome { verdict, trace, final_state: state, ce })
}

/// Period of a cycle in the window, if the change never shrank and the last
/// profile repeats an earlier one.
fn oscillation(history: &[RatingProfile], deltas: &[f64], tol: f64) -> Option<usize> {
    if deltas.iter().any(|&d| d <= 10.0 * tol) {
        return None;
    }
    let half = deltas.len() / 2;
    let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    if min(&deltas[half..]) < min(&deltas[..half]) {
        return None;
    }
    let last = history.last()?;
    (2..history.len()).find(|&p| history[history.len() - 1 - p].l1_distance(last) <= tol)
}

/// Per-agent pass flag and residual.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Checked {
    pub ok: Vec<bool>,
    pub residual: Vec<f64>,
}

impl Checked {
    fn push(&mut self, residual: f64, tol: f64) {
        self.ok.push(residual <= tol);
        self.residual.push(residual);
    }

    pub fn all(&self) -> bool {
        self.ok.iter().all(|&b| b)
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

/// The three equilibrium conditions, agent by agent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CeReport {
    pub tol: f64,
    /// Effort is a best response to the current ratings.
    pub incentive: Checked,
    /// Rating equals the quality the agent delivers.
    pub stable_rating: Checked,
    /// Conjectured value equals realized payoff.
    pub conjecture: Checked,
}

impl CeReport {
    pub fn all_pass(&self) -> bool {
        self.incentive.all() && self.stable_rating.all() && self.conjecture.all()
    }
}

/// Checks a state against the equilibrium conditions. Payoffs are the
/// expected ones, whatever mode produced the state.
pub fn verify_ce(state: &DynamicsState, population: &Population, rule: &MatchingRule, mu: f64, tol: f64) -> CeReport {
    let d = RatingDistribution::from_ratings(state.profile.as_slice().iter().copied());
    let loads = level_loads(rule, &d);
    let reviewers = Reviewers::new(
        &d,
        population
            .agents()
            .iter()
            .map(|a| (state.profile.get(a.agent_id), a.quality.value(state.efforts[a.agent_id]), 1)),
    );
    let mut rep = CeReport { tol, ..Default::default() };
    for a in population.agents() {
        let i = a.agent_id;
        let theta = state.profile.get(i);
        let e = state.efforts[i];
        let k = d.rank_of(theta).expect("rating is a level");
        let others = d.remove_one(theta).expect("rating is held");
        let curve = BenefitCurve::new(rule, &a.benefit, &others);
        let load = loads[k - 1];
        let br = best_response_on(&curve, a, theta, mu, load);
        rep.incentive.push(libm::fabs(br.effort - e), tol);
        rep.stable_rating.push(libm::fabs(theta - a.quality.value(e)), tol);
        let u = expected_payoff(rule, &d, &reviewers, a, theta, e, load);
        let f = a.alpha * curve.value((1.0 - mu) * theta + mu * a.quality.value(e)) + state.betas[i];
        rep.conjecture.push(libm::fabs(f - u), tol);
    }
    rep
}

/// Marginal conditions for one agent at a candidate equilibrium rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    /// Marginal objective when lowering effort, if that side binds.
    pub left: Option<f64>,
    /// Marginal objective when raising effort, if that side binds.
    pub right: Option<f64>,
    pub feasible: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InequalityReport {
    pub agents: Vec<Inequality>,
}

impl InequalityReport {
    pub fn all_hold(&self) -> bool {
        self.agents.iter().all(|a| a.holds)
    }
}

/// Conjectured benefit for a lone agent at `x` in the gap between
/// ascending levels `lo` and `hi` (either may be missing at the ends), and
/// its slope when `x` moves in direction `right`.
fn gap_formula(rule: &MatchingRule, b: &[f64], l: &[f64], lo: Option<usize>, hi: Option<usize>, x: f64, right: bool) -> (f64, f64) {
    if let MatchingRule::RatingIndependent = rule {
        let mean = if b.is_empty() { 0.0 } else { b.iter().sum::<f64>() / b.len() as f64 };
        return (mean, 0.0);
    }
    match (lo, hi) {
        (None, None) => (0.0, 0.0),
        (None, Some(h)) => (b[h] * x / l[h], b[h] / l[h]),
        (Some(a), None) => (b[a], 0.0),
        (Some(a), Some(h)) => {
            let gap = l[h] - l[a];
            let up = (x - l[a]) / gap;
            match *rule {
                MatchingRule::Asymmetric { gamma } => {
                    let db = b[h] - b[a];
                    let u = up + gamma * x;
                    let su = 1.0 / gap + gamma;
                    let moves_in = |edge: f64| {
                        // at a clamp edge, the slope survives only if moving
                        // in `right`'s direction heads back into (0, 1)
                        let toward = if right { su } else { -su };
                        if edge == 0.0 { toward > 0.0 } else { toward < 0.0 }
                    };
                    let inside = u > 0.0 && u < 1.0;
                    let eff = if inside || (u == 0.0 && moves_in(0.0)) || (u == 1.0 && moves_in(1.0)) { su } else { 0.0 };
                    (b[a] + u.clamp(0.0, 1.0) * db, eff * db)
                }
                MatchingRule::LongRange { gamma_r, gamma_p } if a >= 1 && h + 1 < l.len() => {
                    let upv = (1.0 - gamma_r) * b[h] + gamma_r * b[h + 1];
                    let downv = (1.0 - gamma_p) * b[a] + gamma_p * b[a - 1];
                    (downv + up * (upv - downv), (upv - downv) / gap)
                }
                _ => (b[a] + up * (b[h] - b[a]), (b[h] - b[a]) / gap),
            }
        }
    }
}

/// Moves every rating in a chain of levels less than `tol` apart onto the
/// lowest of them.
fn merge_near_ties(profile: &RatingProfile, tol: f64) -> RatingProfile {
    let mut sorted: Vec<f64> = profile.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut anchor: Vec<(f64, f64)> = Vec::new();
    for x in sorted {
        match anchor.last() {
            Some(&(prev, root)) if x - prev <= tol => anchor.push((x, root)),
            _ => anchor.push((x, x)),
        }
    }
    RatingProfile::new(profile.as_slice().iter().map(|x| {
        let i = anchor.partition_point(|a| a.0 < *x);
        anchor[i].1
    }))
}

/// Checks, without the solver, that each agent's effort
/// `e* = q⁻¹(θ_i)` satisfies the one-sided marginal conditions at its own
/// rating. A side whose limit value falls short of the best nearby value
/// imposes nothing: the jump already makes that deviation unprofitable.
/// Ratings within `tol` of another level count as tied with it, matching a
/// run that stopped at that tolerance.
pub fn check_equilibrium_inequalities(
    profile: &RatingProfile,
    population: &Population,
    rule: &MatchingRule,
    mu: f64,
    tol: f64,
) -> InequalityReport {
    let profile = &merge_near_ties(profile, tol);
    let d = RatingDistribution::from_ratings(profile.as_slice().iter().copied());
    let loads = level_loads(rule, &d);
    let mut rep = InequalityReport::default();
    for a in population.agents() {
        let theta = profile.get(a.agent_id);
        let Ok(e) = a.effort_for_quality(theta) else {
            rep.agents.push(Inequality { left: None, right: None, feasible: false, holds: false });
            continue;
        };
        let k = d.rank_of(theta).expect("rating is a level");
        let load = loads[k - 1];
        let others = d.remove_one(theta).expect("rating is held");
        let mut l: Vec<f64> = others.levels().to_vec();
        l.reverse();
        let b: Vec<f64> = l.iter().map(|&x| a.benefit.value(x)).collect();
        let marginal = |s: f64| {
            -(1.0 - a.delta) * load * a.cost.slope(e) + a.delta * a.alpha * mu * a.quality.slope(e) * s
        };

        let below = l.partition_point(|&x| x < theta);
        let at_knot = below < l.len() && l[below] == quantize(theta);
        let (left_gap, right_gap) = if at_knot {
            let after = (below + 1 < l.len()).then_some(below + 1);
            ((below.checked_sub(1), Some(below)), (Some(below), after))
        } else {
            let g = (below.checked_sub(1), (below < l.len()).then_some(below));
            (g, g)
        };
        let (vl, sl) = gap_formula(rule, &b, &l, left_gap.0, left_gap.1, theta, false);
        let (vr, sr) = gap_formula(rule, &b, &l, right_gap.0, right_gap.1, theta, true);
        let v0 = if at_knot {
            match rule {
                MatchingRule::RatingIndependent => vl,
                _ => b[below],
            }
        } else {
            vl
        };
        let can_left = e > 0.0 && theta > 0.0;
        let can_right = e < a.e_max;
        let mut best = v0;
        if can_left {
            best = best.max(vl);
        }
        if can_right {
            best = best.max(vr);
        }
        let vt = 1e-12 * best.abs().max(1.0);
        let left = (can_left && vl >= best - vt).then(|| marginal(sl));
        let right = (can_right && vr >= best - vt).then(|| marginal(sr));
        // With no reviews to pay for and a flat curve below, less effort is
        // just as good, and ties go to the smallest effort.
        let flat_left = left.is_some() && load * (1.0 - a.delta) == 0.0 && sl == 0.0;
        let holds = !flat_left && left.map_or(true, |g| g >= -tol) && right.map_or(true, |g| g <= tol);
        rep.agents.push(Inequality { left, right, feasible: true, holds });
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub enum MonitorOutcome {
    /// Agents did not all start from the same rating.
    PreconditionUnmet,
    /// `(t, more capable type, less capable type)` where the order broke.
    Checked(Vec<(usize, usize, usize)>),
}

/// Scans a trace for a more capable type ever rated strictly below a less
/// capable one.
pub fn capability_order_monitor(trace: &[TraceRow], population: &Population) -> MonitorOutcome {
    let Some(first) = trace.first() else { return MonitorOutcome::Checked(Vec::new()) };
    let x0 = first.type_rating_min[0];
    let common = first.type_rating_min.iter().chain(&first.type_rating_max).all(|&x| x == x0);
    if !common {
        return MonitorOutcome::PreconditionUnmet;
    }
    let reps: Vec<&AgentSpec> = population.representatives().collect();
    let e_top = reps.iter().map(|a| a.e_max).fold(f64::INFINITY, f64::min);
    let effort_grid: Vec<f64> = (0..=100).map(|g| e_top * g as f64 / 100.0).collect();
    let rating_grid: Vec<f64> = (0..=100).map(|g| g as f64 / 100.0).collect();
    let mut pairs = Vec::new();
    for (i, a) in reps.iter().enumerate() {
        for (j, b) in reps.iter().enumerate() {
            if i != j && is_more_capable(a, b, &effort_grid, &rating_grid) {
                pairs.push((i, j));
            }
        }
    }
    let ids: Vec<usize> = population.types().iter().map(|t| t.0).collect();
    let mut out = Vec::new();
    for row in trace {
        for &(i, j) in &pairs {
            if row.type_rating_min[i] < row.type_rating_max[j] - 1e-12 {
                out.push((row.t, ids[i], ids[j]));
            }
        }
    }
    MonitorOutcome::Checked(out)
}

/// Designer-side totals and their normalizations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Objectives {
    pub sum_quality: f64,
    pub welfare: f64,
    pub mean_quality: f64,
    pub mean_welfare: f64,
    /// Mean over types of each type's mean.
    pub type_mean_quality: f64,
    pub type_mean_welfare: f64,
    /// Sum over types of each type's mean.
    pub type_sum_quality: f64,
    pub type_sum_welfare: f64,
}

pub fn designer_objectives(state: &DynamicsState, population: &Population) -> Objectives {
    let mut o = Objectives::default();
    for (_, members) in population.types() {
        let (mut q, mut w) = (0.0, 0.0);
        for &i in members {
            q += population.agents()[i].quality.value(state.efforts[i]);
            w += state.payoffs[i];
        }
        o.sum_quality += q;
        o.welfare += w;
        let n = members.len() as f64;
        o.type_sum_quality += q / n;
        o.type_sum_welfare += w / n;
    }
    let n = population.len() as f64;
    let kt = population.types().len() as f64;
    o.mean_quality = o.sum_quality / n;
    o.mean_welfare = o.welfare / n;
    o.type_mean_quality = o.type_sum_quality / kt;
    o.type_mean_welfare = o.type_sum_welfare / kt;
    o
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeSearch {
    /// Largest step size seen to converge; none if even the lower end fails.
    pub best: Option<f64>,
    /// Every `(mu, converged)` evaluated, in order.
    pub evaluations: Vec<(f64, bool)>,
    /// Some converging step size sits above a failing one.
    pub non_monotone: bool,
}

/// Bisects on the step size for the largest one whose run converges.
pub fn find_max_step_size(
    state0: &DynamicsState,
    population: &Population,
    config: &DynamicsConfig,
    mu_lo: f64,
    mu_hi: f64,
    resolution: f64,
) -> Result<StepSizeSearch> {
    if !(0.0 < mu_lo && mu_lo < mu_hi && mu_hi < 1.0) {
        return Err(Error::Parameter { name: "mu range", value: mu_lo });
    }
    if !(resolution > 0.0) {
        return Err(Error::Parameter { name: "resolution", value: resolution });
    }
    let mut evals = Vec::new();
    let mut converges = |mu: f64| -> Result<bool> {
        let out = run(state0, population, &DynamicsConfig { mu, ..*config })?;
        let ok = matches!(out.verdict, Verdict::Converged { .. });
        evals.push((mu, ok));
        Ok(ok)
    };
    let best = if !converges(mu_lo)? {
        None
    } else if converges(mu_hi)? {
        Some(mu_hi)
    } else {
        let (mut lo, mut hi) = (mu_lo, mu_hi);
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            if converges(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    };
    let non_monotone = evals.iter().any(|&(m, ok)| ok && evals.iter().any(|&(m2, ok2)| !ok2 && m2 < m));
    Ok(StepSizeSearch { best, evaluations: evals, non_monotone })
}
