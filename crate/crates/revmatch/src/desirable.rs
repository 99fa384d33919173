//! Desirability checks against rating distributions drawn for a scenario's
//! population.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revmatch_core::{check_desirable, DesirabilityReport, FunctionSpec, RatingDistribution};

use crate::scenario::Scenario;

/// `samples` distributions: every type draws one rating uniformly from
/// `[0, 1)`, held by all of its agents.
pub fn sample_distributions(s: &Scenario, samples: usize, seed: u64) -> Vec<RatingDistribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| RatingDistribution::from_weighted(s.population.types().iter().map(|(_, m)| (rng.gen::<f64>(), m.len()))))
        .collect()
}

/// One report per distinct benefit function in the population.
pub fn check_scenario(s: &Scenario, samples: usize, seed: u64) -> Vec<(FunctionSpec, DesirabilityReport)> {
    let d = sample_distributions(s, samples, seed);
    let mut benefits: Vec<FunctionSpec> = Vec::new();
    for a in s.population.representatives() {
        if !benefits.contains(&a.benefit) {
            benefits.push(a.benefit);
        }
    }
    benefits.into_iter().map(|b| (b, check_desirable(&s.config.rule, &d, &b))).collect()
}
