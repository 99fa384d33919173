//! Matching rules over rating ranks, reviewer sampling, the conjectured
//! benefit curve and the desirability check.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::function::{AgentSpec, FunctionSpec};
use crate::rating::{distribution, quantize, RatingDistribution, RatingProfile};
use crate::{Error, Result};

/// How a product owner's rank maps to a distribution over reviewer ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleRepr", into = "RuleRepr")]
pub enum MatchingRule {
    /// Same-rating groups review each other; lone agents are sent to their
    /// neighbours in proportion to how close they sit.
    Baseline,
    /// Baseline with the interior up-probability shifted by `gamma * θ`.
    Asymmetric { gamma: f64 },
    /// Baseline with a share of the up and down mass sent two ranks away.
    LongRange { gamma_r: f64, gamma_p: f64 },
    /// Uniform over the other agents' ratings, blind to one's own.
    RatingIndependent,
}

#[derive(Serialize, Deserialize)]
struct RuleRepr {
    rule: alloc::string::String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_p: Option<f64>,
}

impl From<MatchingRule> for RuleRepr {
    fn from(r: MatchingRule) -> Self {
        let mut repr = RuleRepr { rule: r.name().into(), gamma: None, gamma_r: None, gamma_p: None };
        match r {
            MatchingRule::Asymmetric { gamma } => repr.gamma = Some(gamma),
            MatchingRule::LongRange { gamma_r, gamma_p } => {
                repr.gamma_r = Some(gamma_r);
                repr.gamma_p = Some(gamma_p);
            }
            _ => {}
        }
        repr
    }
}

impl TryFrom<RuleRepr> for MatchingRule {
    type Error = alloc::string::String;

    fn try_from(r: RuleRepr) -> core::result::Result<Self, Self::Error> {
        let rule = match r.rule.as_str() {
            "baseline" => MatchingRule::Baseline,
            "asymmetric" => MatchingRule::Asymmetric { gamma: r.gamma.ok_or("asymmetric rule needs `gamma`")? },
            "long_range" => MatchingRule::LongRange {
                gamma_r: r.gamma_r.ok_or("long_range rule needs `gamma_r`")?,
                gamma_p: r.gamma_p.ok_or("long_range rule needs `gamma_p`")?,
            },
            "rating_independent" => MatchingRule::RatingIndependent,
            other => return Err(alloc::format!("unknown rule `{other}`")),
        };
        rule.validate().map_err(|e| alloc::format!("{e}"))?;
        Ok(rule)
    }
}

impl MatchingRule {
    pub fn name(&self) -> &'static str {
        match self {
            MatchingRule::Baseline => "baseline",
            MatchingRule::Asymmetric { .. } => "asymmetric",
            MatchingRule::LongRange { .. } => "long_range",
            MatchingRule::RatingIndependent => "rating_independent",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MatchingRule::Asymmetric { gamma } if !gamma.is_finite() => {
                Err(Error::Parameter { name: "gamma", value: gamma })
            }
            MatchingRule::LongRange { gamma_r, .. } if !(0.0..=1.0).contains(&gamma_r) => {
                Err(Error::Parameter { name: "gamma_r", value: gamma_r })
            }
            MatchingRule::LongRange { gamma_p, .. } if !(0.0..=1.0).contains(&gamma_p) => {
                Err(Error::Parameter { name: "gamma_p", value: gamma_p })
            }
            _ => Ok(()),
        }
    }
}

/// Probability that an owner's product goes to each reviewer rank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchProbabilities {
    /// `(rank, probability)`, ranks ascending, zero entries omitted.
    pub entries: Vec<(usize, f64)>,
    pub no_review_mass: f64,
    /// Set when the asymmetric shift had to be clamped into [0, 1].
    pub clamped: bool,
}

impl MatchProbabilities {
    pub fn prob(&self, rank: usize) -> f64 {
        self.entries.iter().find(|e| e.0 == rank).map_or(0.0, |e| e.1)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum::<f64>() + self.no_review_mass
    }

    fn from_pairs(pairs: &[(usize, f64)], no_review_mass: f64) -> Self {
        let mut entries: Vec<(usize, f64)> = pairs.iter().copied().filter(|e| e.1 > 0.0).collect();
        entries.sort_by_key(|e| e.0);
        MatchProbabilities { entries, no_review_mass, clamped: false }
    }
}

/// Reviewer-rank probabilities for the owner at 1-based rank `k` of `d`,
/// holding rating `theta`. Whether the owner has same-rating peers is read
/// from the multiplicity at `k`.
pub fn match_probabilities(rule: &MatchingRule, d: &RatingDistribution, k: usize, theta: f64) -> MatchProbabilities {
    let big_k = d.len();
    let shared = d.count(k) >= 2;

    if let MatchingRule::RatingIndependent = rule {
        let targets: Vec<usize> = (1..=big_k).filter(|&r| r != k || shared).collect();
        if targets.is_empty() {
            return MatchProbabilities::from_pairs(&[], 1.0);
        }
        let p = 1.0 / targets.len() as f64;
        let pairs: Vec<(usize, f64)> = targets.into_iter().map(|r| (r, p)).collect();
        return MatchProbabilities::from_pairs(&pairs, 0.0);
    }

    if shared {
        return MatchProbabilities::from_pairs(&[(k, 1.0)], 0.0);
    }
    if big_k == 1 {
        return MatchProbabilities::from_pairs(&[], 1.0);
    }
    if k == 1 {
        return MatchProbabilities::from_pairs(&[(2, 1.0)], 0.0);
    }
    if k == big_k {
        let p = d.level(k) / d.level(k - 1);
        return MatchProbabilities::from_pairs(&[(k - 1, p)], 1.0 - p);
    }

    let up = (d.level(k) - d.level(k + 1)) / (d.level(k - 1) - d.level(k + 1));
    match *rule {
        MatchingRule::Asymmetric { gamma } => {
            let shifted = up + gamma * theta;
            let u = shifted.clamp(0.0, 1.0);
            let mut m = MatchProbabilities::from_pairs(&[(k - 1, u), (k + 1, 1.0 - u)], 0.0);
            m.clamped = u != shifted;
            m
        }
        MatchingRule::LongRange { gamma_r, gamma_p } if k >= 3 && k + 2 <= big_k => {
            let down = 1.0 - up;
            MatchProbabilities::from_pairs(
                &[
                    (k - 2, gamma_r * up),
                    (k - 1, (1.0 - gamma_r) * up),
                    (k + 1, (1.0 - gamma_p) * down),
                    (k + 2, gamma_p * down),
                ],
                0.0,
            )
        }
        _ => MatchProbabilities::from_pairs(&[(k - 1, up), (k + 1, 1.0 - up)], 0.0),
    }
}

/// Expected benefit of holding rating `x` when the others' distribution is
/// `others`, evaluated literally: insert `x`, ask the rule, weight `b`.
pub fn conjectured_benefit_with(rule: &MatchingRule, benefit: &FunctionSpec, x: f64, others: &RatingDistribution) -> f64 {
    let (d, k) = others.insert(x);
    let m = match_probabilities(rule, &d, k, quantize(x));
    m.entries.iter().map(|&(r, p)| p * benefit.value(d.level(r))).sum()
}

pub fn conjectured_benefit(rule: &MatchingRule, agent: &AgentSpec, x: f64, others: &RatingDistribution) -> f64 {
    conjectured_benefit_with(rule, &agent.benefit, x, others)
}

/// An open interval `(lo, hi)` on which the conjectured benefit is affine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    /// Limit of the curve as `x → lo⁺`.
    pub value_at_lo: f64,
    pub slope: f64,
}

impl Piece {
    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        self.value_at_lo + self.slope * (x - self.lo)
    }
}

/// The conjectured benefit as a function of the agent's next rating, built
/// in closed form from the others' levels. Between the others' ratings it is
/// affine; at each of them it takes the same-rating value and may jump.
#[derive(Debug, Clone, PartialEq)]
pub struct BenefitCurve {
    pieces: Vec<Piece>,
    /// `(level, value)` ascending.
    knots: Vec<(f64, f64)>,
}

impl BenefitCurve {
    pub fn new(rule: &MatchingRule, benefit: &FunctionSpec, others: &RatingDistribution) -> Self {
        let mut l: Vec<f64> = others.levels().to_vec();
        l.reverse();
        let b: Vec<f64> = l.iter().map(|&x| benefit.value(x)).collect();
        let n = l.len();
        let mut pieces = Vec::with_capacity(n + 2);
        let mut knots = Vec::with_capacity(n);

        if n == 0 {
            pieces.push(Piece { lo: 0.0, hi: f64::INFINITY, value_at_lo: 0.0, slope: 0.0 });
            return BenefitCurve { pieces, knots };
        }

        if let MatchingRule::RatingIndependent = rule {
            let mean = b.iter().sum::<f64>() / n as f64;
            let mut lo = 0.0;
            for &x in &l {
                if x > lo {
                    pieces.push(Piece { lo, hi: x, value_at_lo: mean, slope: 0.0 });
                }
                knots.push((x, mean));
                lo = x;
            }
            pieces.push(Piece { lo, hi: f64::INFINITY, value_at_lo: mean, slope: 0.0 });
            return BenefitCurve { pieces, knots };
        }

        if l[0] > 0.0 {
            pieces.push(Piece { lo: 0.0, hi: l[0], value_at_lo: 0.0, slope: b[0] / l[0] });
        }
        for j in 0..n {
            knots.push((l[j], b[j]));
            if j + 1 == n {
                break;
            }
            let (lo, hi, gap) = (l[j], l[j + 1], l[j + 1] - l[j]);
            match *rule {
                MatchingRule::Asymmetric { gamma } if gamma != 0.0 => {
                    push_asymmetric(&mut pieces, lo, hi, b[j], b[j + 1], gamma);
                }
                // 0-based j here is 1-based j+1 in the long-range condition
                // 2 ≤ j ≤ n−2 on the number of levels below the agent.
                MatchingRule::LongRange { gamma_r, gamma_p } if j >= 1 && j + 3 <= n => {
                    let up = (1.0 - gamma_r) * b[j + 1] + gamma_r * b[j + 2];
                    let down = (1.0 - gamma_p) * b[j] + gamma_p * b[j - 1];
                    pieces.push(Piece { lo, hi, value_at_lo: down, slope: (up - down) / gap });
                }
                _ => {
                    pieces.push(Piece { lo, hi, value_at_lo: b[j], slope: (b[j + 1] - b[j]) / gap });
                }
            }
        }
        pieces.push(Piece { lo: l[n - 1], hi: f64::INFINITY, value_at_lo: b[n - 1], slope: 0.0 });
        BenefitCurve { pieces, knots }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Exact value. Like the rules themselves, it sees `x` only after
    /// quantization, so ratings that tie a knot take the knot value.
    pub fn value(&self, x: f64) -> f64 {
        let qx = quantize(x);
        if let Ok(i) = self.knots.binary_search_by(|k| k.0.total_cmp(&qx)) {
            return self.knots[i].1;
        }
        self.piece_at(qx).at(qx)
    }

    fn piece_at(&self, x: f64) -> &Piece {
        let i = self.pieces.partition_point(|p| p.hi <= x);
        &self.pieces[i.min(self.pieces.len() - 1)]
    }

    /// Largest value a sequence approaching `knot` can reach: the knot value
    /// or either one-sided limit.
    pub fn envelope_at_knot(&self, i: usize) -> f64 {
        let (x, v) = self.knots[i];
        let mut best = v;
        for p in &self.pieces {
            if p.hi == x {
                best = best.max(p.at(x));
            }
            if p.lo == x {
                best = best.max(p.value_at_lo);
            }
        }
        best
    }

    /// Knots where a one-sided limit differs from the knot value.
    pub fn discontinuities(&self, tol: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for &(x, v) in &self.knots {
            let jumps = self
                .pieces
                .iter()
                .any(|p| (p.hi == x && libm::fabs(p.at(x) - v) > tol) || (p.lo == x && libm::fabs(p.value_at_lo - v) > tol));
            if jumps {
                out.push(x);
            }
        }
        out
    }
}

/// Interior piece of the asymmetric rule, split where the shifted
/// up-probability hits 0 or 1.
fn push_asymmetric(out: &mut Vec<Piece>, lo: f64, hi: f64, b_lo: f64, b_hi: f64, gamma: f64) {
    let gap = hi - lo;
    let su = 1.0 / gap + gamma;
    let u = |x: f64| (x - lo) / gap + gamma * x;
    let mut cuts = alloc::vec![lo];
    if su != 0.0 {
        for target in [0.0, 1.0] {
            let x = (target + lo / gap) / su;
            if x > lo && x < hi {
                cuts.push(x);
            }
        }
    }
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    for w in cuts.windows(2) {
        let (a, z) = (w[0], w[1]);
        let mid = u(0.5 * (a + z));
        let (value_at_lo, slope) = if mid >= 1.0 {
            (b_hi, 0.0)
        } else if mid <= 0.0 {
            (b_lo, 0.0)
        } else {
            (b_lo + u(a).clamp(0.0, 1.0) * (b_hi - b_lo), su * (b_hi - b_lo))
        };
        out.push(Piece { lo: a, hi: z, value_at_lo, slope });
    }
}

/// Expected number of products each agent at each level reviews, indexed
/// like `d.levels()`. Counts multiplicities: a level with `n_s` owners
/// sending mass `m` to a level with `n_r` reviewers loads each of them by
/// `n_s·m/n_r`.
pub fn level_loads(rule: &MatchingRule, d: &RatingDistribution) -> Vec<f64> {
    let mut load = alloc::vec![0.0; d.len()];
    for s in 1..=d.len() {
        let m = match_probabilities(rule, d, s, d.level(s));
        let ns = d.count(s) as f64;
        for &(r, p) in &m.entries {
            load[r - 1] += ns * p / d.count(r) as f64;
        }
    }
    load
}

pub fn expected_review_load(rule: &MatchingRule, d: &RatingDistribution, k: usize) -> f64 {
    level_loads(rule, d)[k - 1]
}

/// A concrete draw of who reviews whom in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Indexed by product owner.
    pub reviewer_of: Vec<Option<usize>>,
    /// Products each agent reviews.
    pub review_load: Vec<usize>,
}

/// Draws reviewer ranks from the rule, then concrete reviewers: a seeded
/// cyclic order inside each same-rating group, uniform choice across ranks.
pub fn sample_assignment(rule: &MatchingRule, profile: &RatingProfile, seed: u64) -> Assignment {
    let ranked = distribution(profile);
    let d = &ranked.distribution;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut members: Vec<Vec<usize>> = alloc::vec![Vec::new(); d.len()];
    for (i, &k) in ranked.ranks.iter().enumerate() {
        members[k - 1].push(i);
    }
    let mut successor: Vec<usize> = (0..profile.len()).collect();
    for group in members.iter().filter(|g| g.len() >= 2) {
        let mut cycle = group.clone();
        cycle.shuffle(&mut rng);
        for w in 0..cycle.len() {
            successor[cycle[w]] = cycle[(w + 1) % cycle.len()];
        }
    }

    let n = profile.len();
    let mut reviewer_of = alloc::vec![None; n];
    let mut review_load = alloc::vec![0usize; n];
    for i in 0..n {
        let k = ranked.ranks[i];
        let m = match_probabilities(rule, d, k, profile.get(i));
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut target = None;
        for &(r, p) in &m.entries {
            acc += p;
            if u < acc {
                target = Some(r);
                break;
            }
        }
        let reviewer = target.map(|r| {
            if r == k {
                successor[i]
            } else {
                let pool = &members[r - 1];
                pool[rng.gen_range(0..pool.len())]
            }
        });
        if let Some(j) = reviewer {
            review_load[j] += 1;
        }
        reviewer_of[i] = reviewer;
    }
    Assignment { reviewer_of, review_load }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Decreasing,
    NotConcave,
    Discontinuous,
    NegativeSlope,
    IncreasingSlope,
    UnequalLoad,
    NonPositiveLoad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    /// Index into the sampled distributions.
    pub sample: usize,
    /// Rating of the agent whose curve failed.
    pub level: f64,
    pub kind: ViolationKind,
    /// Where along the candidate-rating axis it failed.
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesirabilityReport {
    pub violations: Vec<Violation>,
    /// Samples where some agent's curve is flat everywhere: the rule gives
    /// no reason to earn a rating.
    pub no_rating_incentive: Vec<usize>,
    pub samples: usize,
}

impl DesirabilityReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty() && self.no_rating_incentive.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

const GRID: usize = 1000;

/// Checks that every agent's conjectured benefit is non-decreasing and
/// concave in its own rating and that review loads are equal and positive,
/// on each sampled distribution.
pub fn check_desirable(rule: &MatchingRule, d_samples: &[RatingDistribution], benefit: &FunctionSpec) -> DesirabilityReport {
    let mut rep = DesirabilityReport { samples: d_samples.len(), ..Default::default() };
    for (s, d) in d_samples.iter().enumerate() {
        let Some(top) = d.max() else { continue };
        let span = if top > 0.0 { 1.2 * top } else { 1.0 };
        let h = span / (GRID - 1) as f64;
        let mut flat = false;
        for &level in d.levels() {
            let others = d.remove_one(level).expect("level is held");
            let mut push = |kind, x| rep.violations.push(Violation { sample: s, level, kind, x });
            let f: Vec<f64> = (0..GRID).map(|g| conjectured_benefit_with(rule, benefit, g as f64 * h, &others)).collect();
            let scale = f.iter().fold(1.0f64, |m, v| m.max(libm::fabs(*v)));
            for g in 1..GRID {
                if f[g] < f[g - 1] - 1e-12 * scale {
                    push(ViolationKind::Decreasing, g as f64 * h);
                    break;
                }
            }
            for g in 1..GRID - 1 {
                if f[g + 1] - 2.0 * f[g] + f[g - 1] > 1e-10 * scale {
                    push(ViolationKind::NotConcave, g as f64 * h);
                    break;
                }
            }
            let curve = BenefitCurve::new(rule, benefit, &others);
            for x in curve.discontinuities(1e-12 * scale) {
                push(ViolationKind::Discontinuous, x);
            }
            if let MatchingRule::Baseline = rule {
                let mut prev = f64::INFINITY;
                for p in curve.pieces() {
                    if p.slope < 0.0 {
                        push(ViolationKind::NegativeSlope, p.lo);
                    }
                    if p.slope > prev + 1e-12 * scale {
                        push(ViolationKind::IncreasingSlope, p.lo);
                    }
                    prev = p.slope;
                }
            }
            if f.iter().all(|v| libm::fabs(v - f[0]) <= 1e-12 * scale) {
                flat = true;
            }
        }
        if flat {
            rep.no_rating_incentive.push(s);
        }
        let loads = level_loads(rule, d);
        for (k, &m) in loads.iter().enumerate() {
            if !(m > 0.0) {
                rep.violations.push(Violation { sample: s, level: d.levels()[k], kind: ViolationKind::NonPositiveLoad, x: d.levels()[k] });
            }
            if libm::fabs(m - loads[0]) > 1e-12 {
                rep.violations.push(Violation { sample: s, level: d.levels()[k], kind: ViolationKind::UnequalLoad, x: d.levels()[k] });
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymmetric_pieces_tile_the_gap() {
        let b = FunctionSpec::QuadraticBenefit { a: -1.0, b: 2.0 };
        let d = RatingDistribution::from_ratings([0.9, 0.3]);
        let c = BenefitCurve::new(&MatchingRule::Asymmetric { gamma: 0.7 }, &b, &d);
        let p = c.pieces();
        for w in p.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
    }
}
