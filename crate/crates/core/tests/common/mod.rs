#![allow(dead_code)]

use revmatch_core::{AgentSpec, FunctionSpec, Population};

/// Ten types, `n` agents each: quadratic cost, linear quality with slope
/// 0.2k, quadratic benefit peaking at one, optimism 0.2k.
pub fn ten_types_types() -> Vec<AgentSpec> {
    (1..=10)
        .map(|k| AgentSpec {
            agent_id: 0,
            type_id: k,
            delta: 0.8,
            alpha: 0.2 * k as f64,
            e_max: 1.0,
            cost: FunctionSpec::PowerCost { scale: 1.0, exponent: 2.0 },
            quality: FunctionSpec::LinearQuality { slope: 0.2 * k as f64 },
            benefit: FunctionSpec::QuadraticBenefit { a: -1.0, b: 2.0 },
        })
        .collect()
}

pub fn ten_types(n: usize) -> Population {
    let t: Vec<(AgentSpec, usize)> = ten_types_types().into_iter().map(|a| (a, n)).collect();
    Population::from_types(&t).unwrap()
}

pub fn agent(p: f64, alpha: f64) -> AgentSpec {
    AgentSpec { alpha, quality: FunctionSpec::LinearQuality { slope: p }, ..ten_types_types()[0] }
}
