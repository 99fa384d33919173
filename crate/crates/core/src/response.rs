//! One agent's effort choice for a slot, and the low-rating trap threshold.

use crate::function::{AgentSpec, FunctionSpec};
use crate::matching::{conjectured_benefit, BenefitCurve, MatchingRule};
use crate::rating::{check_mu, quantize, RatingDistribution};
use crate::{Error, Result};

/// Where on the benefit curve the chosen effort lands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    /// Zero effort.
    LowerBound,
    /// Maximum effort.
    UpperBound,
    /// Exactly on another agent's rating.
    Knot { rating: f64 },
    /// Inside an affine piece, where the first-order condition holds.
    Interior { lo: f64, hi: f64 },
    /// Where an asymmetric probability starts or stops clamping.
    Kink { rating: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub effort: f64,
    /// Effort-dependent part of the objective at `effort`, using the
    /// closure of the curve at jumps.
    pub objective: f64,
    pub location: Location,
    /// First-order residual; zero unless the optimum is interior.
    pub foc_residual: f64,
}

/// The effort-dependent part of an agent's slot objective:
/// `−(1−δ)·M·c(e) + δ·α·b̄((1−μ)θ + μ·q(e))`.
pub fn objective(
    rule: &MatchingRule,
    agent: &AgentSpec,
    theta: f64,
    others: &RatingDistribution,
    mu: f64,
    e: f64,
    load: f64,
) -> f64 {
    let x = (1.0 - mu) * theta + mu * agent.quality.value(e);
    -(1.0 - agent.delta) * load * agent.cost.value(e) + agent.delta * agent.alpha * conjectured_benefit(rule, agent, x, others)
}

/// Best effort against the others' current ratings.
pub fn best_response(
    rule: &MatchingRule,
    agent: &AgentSpec,
    theta: f64,
    others: &RatingDistribution,
    mu: f64,
    load: f64,
) -> Result<BestResponse> {
    check_mu(mu)?;
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::Domain { what: "rating", value: theta });
    }
    if !(load >= 0.0) {
        return Err(Error::Domain { what: "review load", value: load });
    }
    let curve = BenefitCurve::new(rule, &agent.benefit, others);
    Ok(best_response_on(&curve, agent, theta, mu, load))
}

/// [`best_response`] against a prebuilt curve. Inputs are trusted.
pub fn best_response_on(curve: &BenefitCurve, agent: &AgentSpec, theta: f64, mu: f64, load: f64) -> BestResponse {
    let s = Solver::new(agent, theta, mu, load);
    let mut best: Option<(f64, f64, Location, f64)> = None;
    let mut offer = |e: f64, v: f64, loc: Location, res: f64| match best {
        Some((be, bv, ..)) if !(v > bv + 1e-14 * bv.abs().max(1.0) || (v >= bv - 1e-14 * bv.abs().max(1.0) && e < be)) => {}
        _ => best = Some((e, v, loc, res)),
    };

    for p in curve.pieces() {
        if !(p.lo < s.x1 && p.hi > s.x0) {
            continue;
        }
        let ea = if p.lo <= s.x0 { 0.0 } else { s.effort_at(p.lo) };
        let eb = if p.hi >= s.x1 { agent.e_max } else { s.effort_at(p.hi) };
        let value = |e: f64| s.cost_term(e) + s.weight * p.at(s.x(e));
        let (e, loc, res) = if p.slope <= 0.0 {
            (ea, Location::LowerBound, 0.0)
        } else {
            let g = |e: f64| s.marginal(e, p.slope);
            if g(ea) <= 0.0 {
                (ea, Location::LowerBound, 0.0)
            } else if g(eb) >= 0.0 {
                (eb, Location::UpperBound, 0.0)
            } else {
                let e = s.root(p.slope, ea, eb);
                (e, Location::Interior { lo: p.lo, hi: p.hi }, g(e))
            }
        };
        let loc = match loc {
            Location::LowerBound if e > 0.0 => Location::Kink { rating: p.lo },
            Location::UpperBound if e < agent.e_max => Location::Kink { rating: p.hi },
            l => l,
        };
        offer(e, value(e), loc, res);
    }
    for (i, &(k, _)) in curve.knots().iter().enumerate() {
        if k < s.x0 || k > s.x1 {
            continue;
        }
        let e = if k == s.x0 { 0.0 } else if k == s.x1 { agent.e_max } else { s.effort_at(k) };
        offer(e, s.cost_term(e) + s.weight * curve.envelope_at_knot(i), Location::Knot { rating: k }, 0.0);
    }

    let (effort, objective, mut location, foc_residual) = best.expect("the effort range meets at least one piece");
    if let Location::Kink { rating } = location {
        if curve.knots().iter().any(|k| k.0 == quantize(rating)) {
            location = Location::Knot { rating };
        }
    }
    if effort == 0.0 && !matches!(location, Location::Knot { .. }) {
        location = Location::LowerBound;
    } else if effort == agent.e_max && !matches!(location, Location::Knot { .. }) {
        location = Location::UpperBound;
    }
    BestResponse { effort, objective, location, foc_residual }
}

struct Solver<'a> {
    agent: &'a AgentSpec,
    mu: f64,
    base: f64,
    x0: f64,
    x1: f64,
    /// `(1−δ)·M`
    cost_weight: f64,
    /// `δ·α`
    weight: f64,
}

impl<'a> Solver<'a> {
    fn new(agent: &'a AgentSpec, theta: f64, mu: f64, load: f64) -> Self {
        let base = (1.0 - mu) * theta;
        Solver {
            agent,
            mu,
            base,
            x0: base,
            x1: base + mu * agent.max_quality(),
            cost_weight: (1.0 - agent.delta) * load,
            weight: agent.delta * agent.alpha,
        }
    }

    fn x(&self, e: f64) -> f64 {
        self.base + self.mu * self.agent.quality.value(e)
    }

    fn effort_at(&self, x: f64) -> f64 {
        let q = ((x - self.base) / self.mu).max(0.0);
        self.agent.quality.inverse_quality(q).unwrap_or(0.0).clamp(0.0, self.agent.e_max)
    }

    fn cost_term(&self, e: f64) -> f64 {
        -self.cost_weight * self.agent.cost.value(e)
    }

    fn marginal(&self, e: f64, slope: f64) -> f64 {
        -self.cost_weight * self.agent.cost.slope(e) + self.weight * self.mu * self.agent.quality.slope(e) * slope
    }

    /// Root of the strictly decreasing marginal on `(lo, hi)`, where it
    /// changes sign.
    fn root(&self, slope: f64, lo: f64, hi: f64) -> f64 {
        if let (FunctionSpec::PowerCost { scale, exponent }, FunctionSpec::LinearQuality { slope: p }) =
            (self.agent.cost, self.agent.quality)
        {
            if self.cost_weight > 0.0 {
                let r = self.weight * self.mu * slope * p / (self.cost_weight * scale * exponent);
                let e = if exponent == 2.0 { r } else { libm::pow(r, 1.0 / (exponent - 1.0)) };
                return e.clamp(lo, hi);
            }
        }
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-12 * b.max(1.0) {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.marginal(m, slope) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

/// Grid search for the same problem: the best of `grid_n + 1` evenly
/// spaced efforts, smallest effort on ties. Used to check [`best_response`].
pub fn brute_force_best_response(
    rule: &MatchingRule,
    agent: &AgentSpec,
    theta: f64,
    others: &RatingDistribution,
    mu: f64,
    load: f64,
    grid_n: usize,
) -> f64 {
    let curve = BenefitCurve::new(rule, &agent.benefit, others);
    let h = agent.e_max / grid_n as f64;
    let (mut best_e, mut best_v) = (0.0, f64::NEG_INFINITY);
    for g in 0..=grid_n {
        let e = g as f64 * h;
        let x = (1.0 - mu) * theta + mu * agent.quality.value(e);
        let v = -(1.0 - agent.delta) * load * agent.cost.value(e) + agent.delta * agent.alpha * curve.value(x);
        if v > best_v {
            best_v = v;
            best_e = e;
        }
    }
    best_e
}

/// `F(θ)`: the marginal gain from effort for an agent whose whole
/// population sits at `θ` and who exerts exactly enough to stay there.
/// Positive means the agent would rather hold its rating than let it slip.
pub fn trap_margin(agent: &AgentSpec, mu: f64, theta: f64) -> f64 {
    let e = agent.quality.inverse_quality(theta).unwrap_or(0.0);
    let avg = if theta == 0.0 { agent.benefit.slope(0.0) } else { agent.benefit.value(theta) / theta };
    -(1.0 - agent.delta) * agent.cost.slope(e) + agent.delta * agent.alpha * mu * agent.quality.slope(e) * avg
}

/// Closed-form threshold for quadratic cost, linear quality and quadratic
/// benefit; `None` for other families.
pub fn trap_threshold_closed_form(agent: &AgentSpec, mu: f64) -> Option<f64> {
    match (agent.cost, agent.quality, agent.benefit) {
        (FunctionSpec::PowerCost { scale, exponent: 2.0 }, FunctionSpec::LinearQuality { slope: p }, FunctionSpec::QuadraticBenefit { a, b }) => {
            let k = agent.delta * agent.alpha * mu * p * p;
            let denom = 2.0 * scale * (1.0 - agent.delta) - k * a;
            (denom > 0.0).then(|| k * b / denom)
        }
        _ => None,
    }
}

/// Root of [`trap_margin`] by bisection, to `1e-13`.
pub fn trap_threshold_bisection(agent: &AgentSpec, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(trap_margin(agent, mu, 0.0) > 0.0) {
        return Err(Error::Assumption("effort must pay off at the zero rating"));
    }
    let mut hi = agent.max_quality().max(1.0);
    let mut grow = 0;
    while trap_margin(agent, mu, hi) > 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Assumption("trap margin never turns negative"));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 {
        let m = 0.5 * (lo + hi);
        if trap_margin(agent, mu, m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-agent threshold: closed form where available, bisection otherwise.
pub fn trap_threshold(agent: &AgentSpec, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(trap_margin(agent, mu, 0.0) > 0.0) {
        return Err(Error::Assumption("effort must pay off at the zero rating"));
    }
    match trap_threshold_closed_form(agent, mu) {
        Some(t) => Ok(t),
        None => trap_threshold_bisection(agent, mu),
    }
}

/// Population threshold: the maximum of the per-agent thresholds.
///
/// Each agent holds a common starting rating exactly when the rating is at
/// or below its own threshold, so a uniform start freezes everybody only
/// below the minimum of the per-agent values; above it the least capable
/// agents start to slide.
pub fn low_rating_threshold(agents: &[AgentSpec], mu: f64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for a in agents {
        best = best.max(trap_threshold(a, mu)?);
    }
    if agents.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    Ok(best)
}
