//! Rating-based repeated matching for peer review.
//!
//! Agents review each other's products every slot. A designer-chosen matching
//! rule decides who reviews whom using only the public rating distribution,
//! and each agent picks an effort level by maximizing an affine conjecture of
//! its future benefit. Ratings move toward the quality of the reviews an agent
//! writes, which closes the loop.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command line
//! and parallel sweeps live in the companion `revmatch` crate.
//!
//! ```
//! use revmatch_core::{FunctionSpec, MatchingRule, RatingDistribution};
//!
//! let b = FunctionSpec::QuadraticBenefit { a: -1.0, b: 2.0 };
//! let others = RatingDistribution::from_ratings([0.8, 0.4]);
//! let v = revmatch_core::conjectured_benefit_with(&MatchingRule::Baseline, &b, 0.6, &others);
//! assert!((v - 0.80).abs() < 1e-12);
//! ```
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;
pub mod function;
pub mod rating;
pub mod matching;
pub mod response;
pub mod dynamics;

pub use error::Error;
pub use function::{
    is_more_capable, validate_assumption1, AgentSpec, Check, FunctionSpec, Role, Severity,
    ValidationReport,
};
pub use matching::{
    check_desirable, conjectured_benefit, conjectured_benefit_with, expected_review_load,
    level_loads, match_probabilities, sample_assignment, Assignment, BenefitCurve, Piece, Violation, ViolationKind,
    DesirabilityReport, MatchProbabilities, MatchingRule,
};
pub use rating::{distribution, quantize, reinsert, update_rating, RankedProfile, RatingDistribution, RatingProfile};
pub use response::{
    best_response, best_response_on, brute_force_best_response, low_rating_threshold, objective, trap_threshold,
    trap_margin, trap_threshold_bisection, trap_threshold_closed_form, BestResponse, Location,
};
pub use dynamics::{
    capability_order_monitor, check_equilibrium_inequalities, designer_objectives,
    find_max_step_size, run, step, verify_ce, CeReport, Checked, DynamicsConfig, DynamicsState, Inequality, InequalityReport, Layout,
    MonitorOutcome, Objectives, Population, RunOutcome, StepSizeSearch, TraceRow, UpdateMode,
    Verdict,
};

pub type Result<T> = core::result::Result<T, Error>;
