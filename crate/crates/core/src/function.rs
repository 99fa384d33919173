//! Parametric cost, quality and benefit families, agent primitives and
//! their validators.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What a function is used for inside an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Cost,
    Quality,
    Benefit,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Cost => "cost",
            Role::Quality => "quality",
            Role::Benefit => "benefit",
        }
    }
}

/// A closed set of function families with exact derivatives and inverses.
///
/// Scenario files spell these as `{"family": "power_cost", "params": [1, 2]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FunctionRepr", into = "FunctionRepr")]
pub enum FunctionSpec {
    /// `scale * e^exponent`
    PowerCost { scale: f64, exponent: f64 },
    /// `slope * e`
    LinearQuality { slope: f64 },
    /// `scale * e^exponent` with `exponent` in (0, 1]
    ConcavePowerQuality { scale: f64, exponent: f64 },
    /// `a * θ² + b * θ`
    QuadraticBenefit { a: f64, b: f64 },
    /// `slope * θ`
    LinearBenefit { slope: f64 },
}

#[derive(Serialize, Deserialize)]
struct FunctionRepr {
    family: String,
    params: Vec<f64>,
}

impl From<FunctionSpec> for FunctionRepr {
    fn from(f: FunctionSpec) -> Self {
        let (family, params) = match f {
            FunctionSpec::PowerCost { scale, exponent } => ("power_cost", alloc::vec![scale, exponent]),
            FunctionSpec::LinearQuality { slope } => ("linear_quality", alloc::vec![slope]),
            FunctionSpec::ConcavePowerQuality { scale, exponent } => {
                ("concave_power_quality", alloc::vec![scale, exponent])
            }
            FunctionSpec::QuadraticBenefit { a, b } => ("quadratic_benefit", alloc::vec![a, b]),
            FunctionSpec::LinearBenefit { slope } => ("linear_benefit", alloc::vec![slope]),
        };
        FunctionRepr { family: family.into(), params }
    }
}

/// Why a `{"family", "params"}` pair could not become a [`FunctionSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyError(String);

impl fmt::Display for FamilyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<FunctionRepr> for FunctionSpec {
    type Error = FamilyError;

    fn try_from(r: FunctionRepr) -> core::result::Result<Self, FamilyError> {
        let want = |n: usize| -> core::result::Result<(), FamilyError> {
            if r.params.len() == n {
                Ok(())
            } else {
                Err(FamilyError(alloc::format!(
                    "family `{}` takes {} params, got {}",
                    r.family,
                    n,
                    r.params.len()
                )))
            }
        };
        let p = &r.params;
        let spec = match r.family.as_str() {
            "power_cost" => {
                want(2)?;
                FunctionSpec::PowerCost { scale: p[0], exponent: p[1] }
            }
            "linear_quality" => {
                want(1)?;
                FunctionSpec::LinearQuality { slope: p[0] }
            }
            "concave_power_quality" => {
                want(2)?;
                FunctionSpec::ConcavePowerQuality { scale: p[0], exponent: p[1] }
            }
            "quadratic_benefit" => {
                want(2)?;
                FunctionSpec::QuadraticBenefit { a: p[0], b: p[1] }
            }
            "linear_benefit" => {
                want(1)?;
                FunctionSpec::LinearBenefit { slope: p[0] }
            }
            other => return Err(FamilyError(alloc::format!("unknown family `{other}`"))),
        };
        if p.iter().any(|v| !v.is_finite()) {
            return Err(FamilyError(alloc::format!("family `{}` has a non-finite param", r.family)));
        }
        Ok(spec)
    }
}

impl FunctionSpec {
    pub fn role(&self) -> Role {
        match self {
            FunctionSpec::PowerCost { .. } => Role::Cost,
            FunctionSpec::LinearQuality { .. } | FunctionSpec::ConcavePowerQuality { .. } => Role::Quality,
            FunctionSpec::QuadraticBenefit { .. } | FunctionSpec::LinearBenefit { .. } => Role::Benefit,
        }
    }

    /// Value at `x`, no domain check. Hot paths call this directly.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            FunctionSpec::PowerCost { scale, exponent } => scale * powf(x, exponent),
            FunctionSpec::LinearQuality { slope } => slope * x,
            FunctionSpec::ConcavePowerQuality { scale, exponent } => scale * powf(x, exponent),
            FunctionSpec::QuadraticBenefit { a, b } => (a * x + b) * x,
            FunctionSpec::LinearBenefit { slope } => slope * x,
        }
    }

    /// Derivative at `x`, no domain check. A concave power with exponent
    /// below one has an infinite slope at zero.
    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        match *self {
            FunctionSpec::PowerCost { scale, exponent } => {
                if x == 0.0 {
                    if exponent > 1.0 { 0.0 } else if exponent == 1.0 { scale } else { f64::INFINITY }
                } else {
                    scale * exponent * powf(x, exponent - 1.0)
                }
            }
            FunctionSpec::LinearQuality { slope } => slope,
            FunctionSpec::ConcavePowerQuality { scale, exponent } => {
                if exponent == 1.0 {
                    scale
                } else if x == 0.0 {
                    f64::INFINITY
                } else {
                    scale * exponent * powf(x, exponent - 1.0)
                }
            }
            FunctionSpec::QuadraticBenefit { a, b } => 2.0 * a * x + b,
            FunctionSpec::LinearBenefit { slope } => slope,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        Ok(self.value(x))
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        Ok(self.slope(x))
    }

    /// Effort producing quality `q`. Only quality families invert.
    pub fn inverse_quality(&self, q: f64) -> Result<f64> {
        check_nonneg("quality", q)?;
        match *self {
            FunctionSpec::LinearQuality { slope } => Ok(q / slope),
            FunctionSpec::ConcavePowerQuality { scale, exponent } => {
                if q == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(powf(q / scale, 1.0 / exponent))
                }
            }
            other => Err(Error::WrongRole { expected: "quality", found: other.role().name() }),
        }
    }

    /// Behaviour of `q'(e) / c'(e)` as `e → 0`, as `k · e^(-kappa)`.
    fn ratio_near_zero(quality: &FunctionSpec, cost: &FunctionSpec) -> (f64, f64) {
        let (cq, m) = match *quality {
            FunctionSpec::LinearQuality { slope } => (slope, 1.0),
            FunctionSpec::ConcavePowerQuality { scale, exponent } => (scale * exponent, exponent),
            _ => (0.0, 1.0),
        };
        let (sc, n) = match *cost {
            FunctionSpec::PowerCost { scale, exponent } => (scale * exponent, exponent),
            _ => (1.0, 1.0),
        };
        (cq / sc, n - m)
    }
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    if y == 2.0 {
        x * x
    } else if y == 1.0 {
        x
    } else {
        libm::pow(x, y)
    }
}

fn check_nonneg(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

/// One agent's primitives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: usize,
    pub type_id: usize,
    /// Discount factor, in [0, 1).
    pub delta: f64,
    /// Weight the agent puts on its conjectured benefit.
    pub alpha: f64,
    pub e_max: f64,
    pub cost: FunctionSpec,
    pub quality: FunctionSpec,
    pub benefit: FunctionSpec,
}

impl AgentSpec {
    /// Checks parameter ranges and that each function has the right role.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Parameter { name: "delta", value: self.delta });
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Parameter { name: "alpha", value: self.alpha });
        }
        if !(self.e_max > 0.0) || !self.e_max.is_finite() {
            return Err(Error::Parameter { name: "e_max", value: self.e_max });
        }
        for (f, role) in [(self.cost, Role::Cost), (self.quality, Role::Quality), (self.benefit, Role::Benefit)] {
            if f.role() != role {
                return Err(Error::WrongRole { expected: role.name(), found: f.role().name() });
            }
        }
        match self.quality {
            FunctionSpec::LinearQuality { slope } if slope > 0.0 => {}
            FunctionSpec::ConcavePowerQuality { scale, exponent } if scale > 0.0 && exponent > 0.0 => {}
            FunctionSpec::LinearQuality { slope } => return Err(Error::Parameter { name: "quality slope", value: slope }),
            FunctionSpec::ConcavePowerQuality { scale, .. } => {
                return Err(Error::Parameter { name: "quality scale/exponent", value: scale })
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Largest quality the agent can produce.
    pub fn max_quality(&self) -> f64 {
        self.quality.value(self.e_max)
    }

    /// Effort producing quality `q`, restricted to `[0, q(e_max)]`.
    pub fn effort_for_quality(&self, q: f64) -> Result<f64> {
        let hi = self.max_quality();
        if !(0.0..=hi * (1.0 + 1e-12)).contains(&q) {
            return Err(Error::Range { value: q, lo: 0.0, hi });
        }
        Ok(self.quality.inverse_quality(q)?.min(self.e_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// The model's guarantees need this; scenario loading refuses it.
    Hard,
    /// Reported but tolerated.
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub property: &'static str,
    pub passed: bool,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn hard_failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed && c.severity == Severity::Hard)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed && c.severity == Severity::Warning)
    }

    pub fn get(&self, property: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.property == property)
    }

    fn push(&mut self, property: &'static str, passed: bool, severity: Severity) {
        self.checks.push(Check { property, passed, severity });
    }
}

/// Checks the regularity conditions the model relies on. Every family here
/// is analytic, so no grid scan is needed. Benefit shape is only checked on
/// `rating_domain`, and failures there are warnings.
pub fn validate_assumption1(agent: &AgentSpec, rating_domain: (f64, f64)) -> ValidationReport {
    use Severity::*;
    let mut r = ValidationReport::default();

    let (convex, inc, flat0) = match agent.cost {
        FunctionSpec::PowerCost { scale, exponent } => (scale > 0.0 && exponent > 1.0, scale > 0.0, exponent > 1.0),
        _ => (false, false, false),
    };
    r.push("cost strictly convex", convex, Hard);
    r.push("cost strictly increasing", inc, Hard);
    r.push("cost slope zero at zero", flat0, Hard);
    r.push("cost zero at zero", agent.cost.role() == Role::Cost && agent.cost.value(0.0) == 0.0, Hard);

    let (concave, inc, bounded) = match agent.quality {
        FunctionSpec::LinearQuality { slope } => (true, slope > 0.0, true),
        FunctionSpec::ConcavePowerQuality { scale, exponent } => {
            (exponent <= 1.0, scale > 0.0 && exponent > 0.0, exponent == 1.0)
        }
        _ => (false, false, false),
    };
    r.push("quality concave", concave, Hard);
    r.push("quality strictly increasing", inc, Hard);
    r.push("quality slope finite at zero", bounded, Hard);
    r.push("quality zero at zero", agent.quality.role() == Role::Quality && agent.quality.value(0.0) == 0.0, Hard);

    let hi = rating_domain.1;
    let (inc, concave) = match agent.benefit {
        // b'(θ) = 2aθ + b is affine, so positivity at 0 and non-negativity at
        // the right end rules out any flat stretch inside the domain.
        FunctionSpec::QuadraticBenefit { a, b } => (b > 0.0 && 2.0 * a * hi + b >= 0.0, a <= 0.0),
        FunctionSpec::LinearBenefit { slope } => (slope > 0.0, true),
        _ => (false, false),
    };
    r.push("benefit strictly increasing on domain", inc, Warning);
    r.push("benefit concave on domain", concave, Warning);
    r.push("benefit zero at zero", agent.benefit.role() == Role::Benefit && agent.benefit.value(0.0) == 0.0, Hard);
    r
}

/// Whether `a` is more capable than `b`: a higher marginal-benefit-to-cost
/// ratio, strictly better quality and no smaller marginal benefit.
///
/// At `e = 0` both ratios blow up, so they are compared through their
/// leading behaviour `k · e^(-kappa)`. Strict quality dominance is checked
/// at positive efforts only, since every quality family is zero at zero.
pub fn is_more_capable(a: &AgentSpec, b: &AgentSpec, effort_grid: &[f64], rating_grid: &[f64]) -> bool {
    let weight = |s: &AgentSpec| s.delta * s.alpha / (1.0 - s.delta);
    for &e in effort_grid {
        if e == 0.0 {
            let (ka, pa) = FunctionSpec::ratio_near_zero(&a.quality, &a.cost);
            let (kb, pb) = FunctionSpec::ratio_near_zero(&b.quality, &b.cost);
            let (ka, kb) = (ka * weight(a), kb * weight(b));
            let ok = if kb == 0.0 {
                true
            } else if ka == 0.0 {
                false
            } else if pa != pb {
                pa > pb
            } else {
                ka >= kb
            };
            if !ok {
                return false;
            }
            continue;
        }
        let ra = weight(a) * a.quality.slope(e) / a.cost.slope(e);
        let rb = weight(b) * b.quality.slope(e) / b.cost.slope(e);
        if ra < rb {
            return false;
        }
        if a.quality.value(e) <= b.quality.value(e) {
            return false;
        }
    }
    rating_grid.iter().all(|&t| a.benefit.slope(t) >= b.benefit.slope(t))
}
