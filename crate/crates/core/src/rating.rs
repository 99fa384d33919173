//! Rating profiles, the public distribution of distinct ratings, and the
//! exponential-smoothing update.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const QUANTUM: f64 = 1e12;

/// Rounds to twelve decimals so that equal ratings compare equal after
/// floating-point drift.
#[inline]
pub fn quantize(x: f64) -> f64 {
    let q = libm::round(x * QUANTUM) / QUANTUM;
    // keep -0.0 out of the profile
    if q == 0.0 { 0.0 } else { q }
}

/// Ratings indexed by agent id. Entries are quantized on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingProfile(Vec<f64>);

impl RatingProfile {
    pub fn new(ratings: impl IntoIterator<Item = f64>) -> Self {
        RatingProfile(ratings.into_iter().map(quantize).collect())
    }

    pub fn uniform(n: usize, theta: f64) -> Self {
        Self::new(core::iter::repeat(theta).take(n))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, agent: usize) -> f64 {
        self.0[agent]
    }

    pub fn l1_distance(&self, other: &RatingProfile) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| libm::fabs(a - b)).sum()
    }

    pub(crate) fn set(&mut self, agent: usize, theta: f64) {
        self.0[agent] = quantize(theta);
    }
}

/// Distinct ratings in strictly descending order, with how many agents hold
/// each. Ranks are 1-based: rank 1 is the highest rating.
///
/// The counts never leave the crate through the matching rules; rules only
/// see whether an agent's level is shared.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatingDistribution {
    levels: Vec<f64>,
    counts: Vec<usize>,
}

impl RatingDistribution {
    pub fn from_ratings(ratings: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = ratings.into_iter().map(quantize).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let mut d = RatingDistribution::default();
        for x in v {
            match d.levels.last() {
                Some(&l) if l == x => *d.counts.last_mut().unwrap() += 1,
                _ => {
                    d.levels.push(x);
                    d.counts.push(1);
                }
            }
        }
        d
    }

    /// Builds from `(rating, multiplicity)` pairs in any order. Zero
    /// multiplicities are dropped and repeated ratings merged.
    pub fn from_weighted(pairs: impl IntoIterator<Item = (f64, usize)>) -> Self {
        let mut v: Vec<(f64, usize)> = pairs.into_iter().filter(|p| p.1 > 0).map(|(x, n)| (quantize(x), n)).collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut d = RatingDistribution::default();
        for (x, n) in v {
            match d.levels.last() {
                Some(&l) if l == x => *d.counts.last_mut().unwrap() += n,
                _ => {
                    d.levels.push(x);
                    d.counts.push(n);
                }
            }
        }
        d
    }

    /// `d_1 > d_2 > … > d_K`, zero-based in the slice.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of distinct ratings `K`.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Rating at 1-based rank `k`.
    pub fn level(&self, k: usize) -> f64 {
        self.levels[k - 1]
    }

    /// Agents at 1-based rank `k`.
    pub fn count(&self, k: usize) -> usize {
        self.counts[k - 1]
    }

    pub fn agents(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn max(&self) -> Option<f64> {
        self.levels.first().copied()
    }

    pub fn min(&self) -> Option<f64> {
        self.levels.last().copied()
    }

    /// 1-based rank of rating `x`, if some agent holds it.
    pub fn rank_of(&self, x: f64) -> Option<usize> {
        let x = quantize(x);
        self.levels.binary_search_by(|l| x.total_cmp(l)).ok().map(|i| i + 1)
    }

    /// Where `x` would sit: `Ok(rank)` if it ties an existing level,
    /// `Err(rank)` for the rank it would take as a new level.
    pub(crate) fn locate(&self, x: f64) -> core::result::Result<usize, usize> {
        self.levels.binary_search_by(|l| x.total_cmp(l)).map(|i| i + 1).map_err(|i| i + 1)
    }

    /// Adds one agent at rating `x`; returns the new distribution and the
    /// agent's rank in it. Needs nothing but this distribution and `x`.
    pub fn insert(&self, x: f64) -> (RatingDistribution, usize) {
        let x = quantize(x);
        let mut d = self.clone();
        match self.locate(x) {
            Ok(k) => {
                d.counts[k - 1] += 1;
                (d, k)
            }
            Err(k) => {
                d.levels.insert(k - 1, x);
                d.counts.insert(k - 1, 1);
                (d, k)
            }
        }
    }

    /// Removes one agent at rating `x`. `None` if nobody holds `x`.
    pub fn remove_one(&self, x: f64) -> Option<RatingDistribution> {
        let k = self.rank_of(x)?;
        let mut d = self.clone();
        if d.counts[k - 1] == 1 {
            d.levels.remove(k - 1);
            d.counts.remove(k - 1);
        } else {
            d.counts[k - 1] -= 1;
        }
        Some(d)
    }
}

/// A distribution together with every agent's rank in it.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedProfile {
    pub distribution: RatingDistribution,
    /// 1-based, indexed by agent id.
    pub ranks: Vec<usize>,
}

impl RankedProfile {
    pub fn rank(&self, agent: usize) -> usize {
        self.ranks[agent]
    }
}

pub fn distribution(profile: &RatingProfile) -> RankedProfile {
    let d = RatingDistribution::from_ratings(profile.as_slice().iter().copied());
    let ranks = profile
        .as_slice()
        .iter()
        .map(|&x| d.rank_of(x).expect("every rating is a level"))
        .collect();
    RankedProfile { distribution: d, ranks }
}

/// Replaces agent `agent`'s rating and returns the new profile, its ranked
/// distribution and the agent's new rank.
pub fn reinsert(profile: &RatingProfile, agent: usize, new_theta: f64) -> Result<(RatingProfile, RankedProfile, usize)> {
    if !(new_theta >= 0.0) {
        return Err(Error::Domain { what: "rating", value: new_theta });
    }
    let mut p = profile.clone();
    p.set(agent, new_theta);
    let ranked = distribution(&p);
    let k = ranked.rank(agent);
    Ok((p, ranked, k))
}

/// One step of `θ ← (1−μ)θ + μ·report` if the agent reviewed this slot.
pub fn update_rating(theta: f64, report: f64, mu: f64, reviewed: bool) -> Result<f64> {
    check_mu(mu)?;
    if !(theta >= 0.0) {
        return Err(Error::Domain { what: "rating", value: theta });
    }
    if !(report >= 0.0) {
        return Err(Error::Domain { what: "report", value: report });
    }
    Ok(if reviewed { (1.0 - mu) * theta + mu * report } else { theta })
}

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter { name: "mu", value: mu })
    }
}
