//! Acceptance run for the eight release criteria.
//!
//! Prints one `PASS`/`FAIL` line per criterion, with indented notes, and
//! exits nonzero if any criterion fails. Runs under `cargo test`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use revmatch::sweep::{SweepSpec, SweepSummary, SweepValue};
use revmatch::{desirable, load_scenario, load_sweep, run_scenario, run_sweep, Scenario};
use revmatch_core::*;

// Tolerances and sizes fixed by the criteria.
const RI_TOL: f64 = 1e-8;
const RI_BUDGET: Duration = Duration::from_secs(5);
const TRAP_MATCH: f64 = 1e-9;
const TRAP_QUALITY: f64 = 1e-10;
const TRAP_STILL: f64 = 1e-12;
const RUN_BUDGET: Duration = Duration::from_secs(60);
const ORDER_TOL: f64 = 1e-6;
const OSC_WINDOW: usize = 200;
const TABLE_NUMERIC: f64 = 0.05;
const DESIRABLE_SAMPLES: usize = 100;
const ORACLE_INSTANCES: usize = 200;
const ORACLE_GRID: usize = 1_000_000;
const CE_PROFILES: usize = 50;
const CE_TOL: f64 = 1e-6;
const NORMALIZATION_DRAWS: usize = 10_000;
const PROB_TOL: f64 = 1e-12;
const TWO_PATH_POINTS: usize = 1_000;
const TWO_PATH_TOL: f64 = 1e-12;
const FD_POINTS: usize = 100;
const FD_STEP: f64 = 1e-6;
const FD_REL: f64 = 1e-5;

const REPORTED_ASYMMETRIC_QUALITY: [f64; 7] = [0.64, 0.91, 0.96, 1.29, 1.28, 1.36, 1.28];
const REPORTED_LONG_RANGE_QUALITY: [f64; 6] = [1.29, 1.31, 1.40, 1.11, 1.28, 1.33];

struct Verdict {
    pass: bool,
    summary: String,
    notes: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Verdict { pass, summary: summary.into(), notes: vec![] }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn ten_types() -> Scenario {
    load_scenario(scenarios().join("ten_types.json")).unwrap()
}

fn with_mu(s: &Scenario, mu: f64) -> Scenario {
    s.modified(|f| f.mu = mu).unwrap()
}

fn start(s: &Scenario) -> DynamicsState {
    DynamicsState::initial(s.theta0.clone())
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("rating-independent matching ends at zero effort and zero ratings", c1_rating_independent),
        ("low-rating trap threshold and its fixed point", c2_trap),
        ("convergence at small steps, oscillation at mu 0.5", c3_convergence),
        ("asymmetric sweep argmax (gamma 0.1 quality, -0.05 welfare)", c4_asymmetric_sweep),
        ("long-range sweep argmax ((0,1) quality, (0.5,0.5) welfare)", c5_long_range_sweep),
        ("capability order and desirability monitors", c6_monitors),
        ("best response vs grid oracle; two equilibrium checks agree", c7_oracles),
        ("property suites", c8_properties),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let v = f();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {tag}: {title}: {} [{:.1}s]", i + 1, v.summary, t0.elapsed().as_secs_f64());
        for n in &v.notes {
            println!("    {n}");
        }
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn c1_rating_independent() -> Verdict {
    let t0 = Instant::now();
    let s = load_scenario(scenarios().join("ten_types_rating_independent.json")).unwrap();
    let mu = s.config.mu;
    let norm0: f64 = s.theta0.as_slice().iter().sum();
    let steps = ((RI_TOL / norm0).ln() / (1.0 - mu).ln()).ceil() as usize;
    let mut st = start(&s);
    let mut zero_effort = true;
    for _ in 0..steps {
        st = step(&st, &s.population, &s.config).unwrap();
        zero_effort &= st.efforts.iter().all(|&e| e == 0.0);
    }
    let norm: f64 = st.profile.as_slice().iter().sum();
    let out = run_scenario(&s).unwrap();
    let end_zero = out.final_state.efforts.iter().all(|&e| e == 0.0);
    let elapsed = t0.elapsed();
    let pass = zero_effort && end_zero && norm <= RI_TOL && elapsed < RI_BUDGET && out.ce.all_pass();
    Verdict::new(pass, format!("after T={steps} steps |theta|_1 = {norm:.3e} (<= {RI_TOL:e}), all efforts zero: {}", zero_effort && end_zero))
        .note(format!("full run verdict {:?}, equilibrium check {}, {:.2}s of the {}s budget", out.verdict, out.ce.all_pass(), elapsed.as_secs_f64(), RI_BUDGET.as_secs()))
}

fn c2_trap() -> Verdict {
    let s = ten_types();
    let mut worst_match = 0.0f64;
    let mut worst_quality = 0.0f64;
    let mut worst_move = 0.0f64;
    let mut notes = vec![];
    for mu in [0.1, 0.3] {
        let cfg = DynamicsConfig { layout: Layout::PerType, ..DynamicsConfig::new(MatchingRule::Baseline, mu) };
        let mut lowest = f64::MAX;
        for a in s.population.representatives() {
            let closed = trap_threshold_closed_form(a, mu).unwrap();
            let bis = trap_threshold_bisection(a, mu).unwrap();
            worst_match = worst_match.max((closed - bis).abs());
            lowest = lowest.min(closed);

            let pop = Population::from_types(&[(*a, 100)]).unwrap();
            let theta0 = 0.9 * closed;
            let s0 = DynamicsState::initial(RatingProfile::uniform(100, theta0));
            let s1 = step(&s0, &pop, &cfg).unwrap();
            worst_move = worst_move.max(max_move(&s0.profile, &s1.profile));
            for &e in &s1.efforts {
                worst_quality = worst_quality.max((a.quality.value(e) - theta0).abs());
            }
        }
        let s0 = DynamicsState::initial(RatingProfile::uniform(s.population.len(), 0.9 * lowest));
        let s1 = step(&s0, &s.population, &cfg).unwrap();
        worst_move = worst_move.max(max_move(&s0.profile, &s1.profile));
        let pop_threshold = low_rating_threshold(&s.population.representatives().copied().collect::<Vec<_>>(), mu).unwrap();
        notes.push(format!(
            "mu {mu}: per-type thresholds {:.4}..{:.4}; population value (max) {pop_threshold:.4}",
            lowest, pop_threshold
        ));
    }
    let pass = worst_match <= TRAP_MATCH && worst_quality <= TRAP_QUALITY && worst_move <= TRAP_STILL;
    let mut v = Verdict::new(
        pass,
        format!("closed form vs bisection {worst_match:.1e} (<= {TRAP_MATCH:e}); |q(e*) - theta0| {worst_quality:.1e} (<= {TRAP_QUALITY:e}); rating moves {worst_move:.1e}"),
    );
    v.notes = notes;
    v.note("each type checked alone at 0.9 of its threshold, and all ten together at 0.9 of the smallest")
}

fn max_move(a: &RatingProfile, b: &RatingProfile) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn timed_run(s: &Scenario) -> (RunOutcome, Duration) {
    let t0 = Instant::now();
    let out = run_scenario(s).unwrap();
    (out, t0.elapsed())
}

fn c3_convergence() -> Verdict {
    let base = ten_types();
    let (slow, t1) = timed_run(&base);
    let (mid, t3) = timed_run(&with_mu(&base, 0.3));
    let (fast, t5) = timed_run(&with_mu(&base, 0.5));
    let conv = |o: &RunOutcome| matches!(o.verdict, revmatch_core::Verdict::Converged { .. });
    let r1 = &slow.trace.last().unwrap().type_rating;
    let r3 = &mid.trace.last().unwrap().type_rating;
    let ordered = r1.iter().zip(r3).all(|(a, b)| *b >= a - ORDER_TOL);
    let type1: Vec<f64> = fast.trace.iter().rev().take(OSC_WINDOW).map(|r| r.type_rating[0]).collect();
    let non_monotone = type1.windows(3).any(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0);
    let fast_ok = !conv(&fast) && non_monotone;
    let budget = [t1, t3, t5].iter().all(|t| *t < RUN_BUDGET);
    let pass = conv(&slow) && conv(&mid) && ordered && fast_ok && budget;
    Verdict::new(
        pass,
        format!(
            "mu 0.1 {:?}, mu 0.3 {:?}, ratings ordered {ordered}; mu 0.5 {:?}, type-1 non-monotone over the last {OSC_WINDOW} steps: {non_monotone}",
            slow.verdict, mid.verdict, fast.verdict
        ),
    )
    .note(format!("run times {:.2}s, {:.2}s, {:.2}s (budget {}s each)", t1.as_secs_f64(), t3.as_secs_f64(), t5.as_secs_f64(), RUN_BUDGET.as_secs()))
    .note(format!("type ratings at mu 0.1: {}", fmt_list(r1)))
    .note(format!("type ratings at mu 0.3: {}", fmt_list(r3)))
    .note(format!("type ratings at mu 0.5: {}", fmt_list(&fast.trace.last().unwrap().type_rating)))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn value_text(v: SweepValue) -> String {
    match v {
        SweepValue::Scalar(x) => format!("{x}"),
        SweepValue::Pair(a, b) => format!("({a},{b})"),
    }
}

fn sweep_notes(summary: &SweepSummary, reported: &[f64]) -> Vec<String> {
    let mut notes = vec![];
    let cells: Vec<String> = summary
        .rows
        .iter()
        .map(|r| {
            let v = match r.verdict {
                Some(revmatch_core::Verdict::Converged { .. }) => "conv".to_string(),
                Some(revmatch_core::Verdict::Oscillating { period }) => format!("osc{period}"),
                Some(revmatch_core::Verdict::MaxIters) => "cap".to_string(),
                None => "err".to_string(),
            };
            format!("{}:{v} q={:.3} w={:.3}", value_text(r.value), r.objectives.mean_quality, r.objectives.mean_welfare)
        })
        .collect();
    notes.push(format!("cells (per-agent means): {}", cells.join(", ")));

    // numeric comparison, best effort: pick the normalization closest to the
    // reference zero-parameter cell
    let norms: [(&str, fn(&Objectives) -> f64); 3] =
        [("raw", |o| o.sum_quality), ("per-agent mean", |o| o.mean_quality), ("per-type mean", |o| o.type_mean_quality)];
    let anchor = summary.rows.iter().position(|r| matches!(r.value, SweepValue::Scalar(x) if x == 0.0) || r.value == SweepValue::Pair(0.0, 0.0)).unwrap_or(0);
    let (name, f) = norms
        .iter()
        .min_by(|a, b| {
            let da = (a.1(&summary.rows[anchor].objectives) - reported[anchor]).abs();
            let db = (b.1(&summary.rows[anchor].objectives) - reported[anchor]).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    let worst = summary.rows.iter().zip(reported).map(|(r, q)| (f(&r.objectives) - q).abs()).fold(0.0, f64::max);
    notes.push(format!(
        "numeric (best effort, not gated): closest normalization {name}, max |quality - reported| {worst:.3} vs {TABLE_NUMERIC} allowed: {}",
        if worst <= TABLE_NUMERIC { "within" } else { "outside" }
    ));
    notes
}

fn argmax_text(s: &SweepSummary) -> String {
    let q = s.quality_argmax().map(|r| value_text(r.value)).unwrap_or_else(|| "none".into());
    let w = s.welfare_argmax().map(|r| value_text(r.value)).unwrap_or_else(|| "none".into());
    format!("quality argmax {q}, welfare argmax {w}")
}

fn table(file: &str, quality: SweepValue, welfare: SweepValue, reported: &[f64]) -> Verdict {
    let spec = load_sweep(scenarios().join(file)).unwrap();
    let summary = run_sweep(&spec, None).unwrap();
    let pass = summary.quality_argmax().map(|r| r.value) == Some(quality) && summary.welfare_argmax().map(|r| r.value) == Some(welfare);
    let mut v = Verdict::new(pass, format!("at mu {}: {} (argmax over converged cells)", spec.base.config.mu, argmax_text(&summary)));
    v.notes = sweep_notes(&summary, reported);

    // the step size behind the reported tables is not stated; show mu 0.1 too
    let other = SweepSpec { base: with_mu(&spec.base, 0.1), ..spec.clone() };
    let alt = run_sweep(&other, None).unwrap();
    v.note(format!("for comparison at mu 0.1: {}", argmax_text(&alt)))
}

fn c4_asymmetric_sweep() -> Verdict {
    table("asymmetric_sweep.json", SweepValue::Scalar(0.1), SweepValue::Scalar(-0.05), &REPORTED_ASYMMETRIC_QUALITY)
}

fn c5_long_range_sweep() -> Verdict {
    table("long_range_sweep.json", SweepValue::Pair(0.0, 1.0), SweepValue::Pair(0.5, 0.5), &REPORTED_LONG_RANGE_QUALITY)
}

fn c6_monitors() -> Verdict {
    let base = ten_types();
    let mut runs: Vec<Scenario> = [0.1, 0.2, 0.3, 0.4, 0.5].iter().map(|&mu| with_mu(&base, mu)).collect();
    for file in ["asymmetric_sweep.json", "long_range_sweep.json"] {
        let spec = load_sweep(scenarios().join(file)).unwrap();
        runs.extend(spec.values.iter().map(|&v| spec.cell(v).unwrap()));
    }
    let results: Vec<(bool, Option<Vec<(usize, usize, usize)>>)> = runs
        .par_iter()
        .map(|s| {
            let out = run_scenario(s).unwrap();
            let conv = matches!(out.verdict, revmatch_core::Verdict::Converged { .. });
            let m = match capability_order_monitor(&out.trace, &s.population) {
                MonitorOutcome::Checked(v) => Some(v),
                MonitorOutcome::PreconditionUnmet => None,
            };
            (conv, m)
        })
        .collect();
    let converging: Vec<_> = results.iter().filter(|r| r.0).collect();
    let checked = converging.iter().filter(|r| r.1.is_some()).count();
    let violations: usize = converging.iter().filter_map(|r| r.1.as_ref()).map(|v| v.len()).sum();
    let desirable = desirable::check_scenario(&base, DESIRABLE_SAMPLES, 6);
    let des_ok = desirable.iter().all(|(_, r)| r.passes() && r.samples == DESIRABLE_SAMPLES);
    let pass = checked == converging.len() && violations == 0 && des_ok;
    Verdict::new(
        pass,
        format!(
            "{} converging runs, {checked} monitored, {violations} order violations; baseline desirable on {DESIRABLE_SAMPLES} distributions: {des_ok}",
            converging.len()
        ),
    )
    .note(format!("{} runs tried: baseline at mu 0.1..0.5 and every sweep cell", runs.len()))
}

struct Instance {
    rule: MatchingRule,
    agent: AgentSpec,
    theta: f64,
    others: RatingDistribution,
    mu: f64,
    load: f64,
}

fn random_rule(rng: &mut ChaCha8Rng, i: usize) -> MatchingRule {
    match i % 4 {
        0 => MatchingRule::Baseline,
        1 => MatchingRule::Asymmetric { gamma: rng.gen_range(-1.0..1.0) },
        2 => MatchingRule::LongRange { gamma_r: rng.gen_range(0.0..=1.0), gamma_p: rng.gen_range(0.0..=1.0) },
        _ => MatchingRule::RatingIndependent,
    }
}

fn random_instance(rng: &mut ChaCha8Rng, i: usize) -> Instance {
    let rule = random_rule(rng, i);
    let s = rng.gen_range(0.2..2.0);
    let agent = AgentSpec {
        agent_id: 0,
        type_id: 1,
        delta: rng.gen_range(0.3..0.95),
        alpha: rng.gen_range(0.2..2.0),
        e_max: rng.gen_range(0.5..2.0),
        cost: FunctionSpec::PowerCost { scale: rng.gen_range(0.5..2.0), exponent: if rng.gen_bool(0.5) { 2.0 } else { rng.gen_range(1.3..3.0) } },
        quality: if rng.gen_bool(0.7) {
            FunctionSpec::LinearQuality { slope: s }
        } else {
            FunctionSpec::ConcavePowerQuality { scale: s, exponent: rng.gen_range(0.5..1.0) }
        },
        benefit: if rng.gen_bool(0.7) {
            FunctionSpec::QuadraticBenefit { a: -1.0, b: 2.0 }
        } else {
            FunctionSpec::LinearBenefit { slope: rng.gen_range(0.5..2.0) }
        },
    };
    let k = rng.gen_range(1..10);
    let others = RatingDistribution::from_weighted((0..k).map(|_| (rng.gen_range(0.0..1.2), rng.gen_range(1..4))));
    Instance {
        rule,
        agent,
        theta: rng.gen_range(0.0..1.2),
        others,
        mu: rng.gen_range(0.05..0.9),
        load: if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.3..3.0) },
    }
}

fn random_population(rng: &mut ChaCha8Rng) -> (Population, MatchingRule, f64) {
    let types = rng.gen_range(2..7);
    let t: Vec<(AgentSpec, usize)> = (0..types)
        .map(|k| {
            let p = rng.gen_range(0.2..2.0);
            let a = AgentSpec {
                agent_id: 0,
                type_id: k + 1,
                delta: rng.gen_range(0.6..0.9),
                alpha: rng.gen_range(0.2..2.0),
                e_max: 1.0,
                cost: FunctionSpec::PowerCost { scale: 1.0, exponent: 2.0 },
                quality: FunctionSpec::LinearQuality { slope: p },
                benefit: FunctionSpec::QuadraticBenefit { a: -1.0, b: 2.0 },
            };
            (a, rng.gen_range(2..5))
        })
        .collect();
    let rule = match rng.gen_range(0..4) {
        0 => MatchingRule::Baseline,
        1 => MatchingRule::Asymmetric { gamma: rng.gen_range(-0.2..=0.0) },
        2 => MatchingRule::LongRange { gamma_r: [0.0, 0.5, 1.0][rng.gen_range(0..3)], gamma_p: [0.0, 0.5, 1.0][rng.gen_range(0..3)] },
        _ => MatchingRule::RatingIndependent,
    };
    (Population::from_types(&t).unwrap(), rule, rng.gen_range(0.05..0.4))
}

fn c7_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances: Vec<Instance> = (0..ORACLE_INSTANCES).map(|i| random_instance(&mut rng, i)).collect();
    let gaps: Vec<f64> = instances
        .par_iter()
        .map(|x| {
            let br = best_response(&x.rule, &x.agent, x.theta, &x.others, x.mu, x.load).unwrap();
            let grid = brute_force_best_response(&x.rule, &x.agent, x.theta, &x.others, x.mu, x.load, ORACLE_GRID);
            (br.effort - grid).abs() / (2.0 * x.agent.e_max / ORACLE_GRID as f64)
        })
        .collect();
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    let oracle_ok = worst <= 1.0;

    // equilibrium profiles from random populations, and their perturbations
    let mut agree = 0;
    let mut converged = 0;
    let mut perturbed = 0;
    let mut ce_true = [0, 0];
    let mut attempts = 0;
    while (converged < CE_PROFILES || perturbed < CE_PROFILES) && attempts < 20 * CE_PROFILES {
        attempts += 1;
        let (pop, rule, mu) = random_population(&mut rng);
        let cfg = DynamicsConfig { layout: Layout::PerType, max_iters: 5_000, ..DynamicsConfig::new(rule, mu) };
        let out = run(&DynamicsState::initial(RatingProfile::uniform(pop.len(), 1.0)), &pop, &cfg).unwrap();
        if !matches!(out.verdict, revmatch_core::Verdict::Converged { .. }) {
            continue;
        }
        let s = out.final_state;
        if converged < CE_PROFILES {
            let a = verify_ce(&s, &pop, &rule, mu, CE_TOL).all_pass();
            let b = check_equilibrium_inequalities(&s.profile, &pop, &rule, mu, CE_TOL).all_hold();
            agree += usize::from(a == b);
            ce_true[0] += usize::from(a);
            converged += 1;
        }
        if perturbed < CE_PROFILES {
            let i = rng.gen_range(0..pop.len());
            let agent = pop.agents()[i];
            let up = s.profile.get(i) + 0.05;
            let theta = if agent.effort_for_quality(up).is_ok() { up } else { (s.profile.get(i) - 0.05).max(0.0) };
            let mut p = s.clone();
            p.profile = RatingProfile::new((0..pop.len()).map(|j| if j == i { theta } else { s.profile.get(j) }));
            p.efforts[i] = agent.effort_for_quality(theta).unwrap();
            let a = verify_ce(&p, &pop, &rule, mu, CE_TOL).all_pass();
            let b = check_equilibrium_inequalities(&p.profile, &pop, &rule, mu, CE_TOL).all_hold();
            agree += usize::from(a == b);
            ce_true[1] += usize::from(a);
            perturbed += 1;
        }
    }
    let enough = converged == CE_PROFILES && perturbed == CE_PROFILES;
    let pass = oracle_ok && enough && agree == 2 * CE_PROFILES;
    Verdict::new(
        pass,
        format!(
            "worst |br - grid| is {worst:.3} of 2*e_max/{ORACLE_GRID} over {ORACLE_INSTANCES} instances; equilibrium verdicts agree on {agree}/{}",
            converged + perturbed
        ),
    )
    .note(format!("{converged} converged profiles ({} pass both checks), {perturbed} perturbed ({} pass)", ce_true[0], ce_true[1]))
    .note("instances rotate through baseline, asymmetric, long-range and rating-independent rules")
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> RatingProfile {
    let pool: Vec<f64> = (0..rng.gen_range(1..=n)).map(|_| rng.gen_range(0.0..1.5)).collect();
    RatingProfile::new((0..n).map(|_| pool[rng.gen_range(0..pool.len())]))
}

fn c8_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures: Vec<String> = vec![];

    // probability normalization
    let mut worst_norm = 0.0f64;
    for v in 0..4 {
        for _ in 0..NORMALIZATION_DRAWS {
            let rule = random_rule(&mut rng, v);
            let n = rng.gen_range(1..12);
            let p = random_profile(&mut rng, n);
            let r = distribution(&p);
            for i in 0..n {
                let m = match_probabilities(&rule, &r.distribution, r.rank(i), p.get(i));
                worst_norm = worst_norm.max((m.total() - 1.0).abs());
            }
        }
    }
    if worst_norm > PROB_TOL {
        failures.push(format!("normalization off by {worst_norm:e}"));
    }

    // closed-form curve against the literal probability-weighted sum
    let b = FunctionSpec::QuadraticBenefit { a: -1.0, b: 2.0 };
    let mut worst_path = 0.0f64;
    for _ in 0..TWO_PATH_POINTS {
        let n = rng.gen_range(1..10);
        let others = RatingDistribution::from_weighted((0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(1..3))));
        let x = rng.gen_range(0.0..1.3);
        let curve = BenefitCurve::new(&MatchingRule::Baseline, &b, &others);
        worst_path = worst_path.max((curve.value(x) - conjectured_benefit_with(&MatchingRule::Baseline, &b, x, &others)).abs());
    }
    if worst_path > TWO_PATH_TOL {
        failures.push(format!("two paths differ by {worst_path:e}"));
    }

    // zero-parameter extensions reproduce the baseline bit for bit
    let mut reduced = true;
    for _ in 0..2_000 {
        let n = rng.gen_range(1..12);
        let p = random_profile(&mut rng, n);
        let r = distribution(&p);
        for i in 0..n {
            let base = match_probabilities(&MatchingRule::Baseline, &r.distribution, r.rank(i), p.get(i));
            for rule in [MatchingRule::Asymmetric { gamma: 0.0 }, MatchingRule::LongRange { gamma_r: 0.0, gamma_p: 0.0 }] {
                let m = match_probabilities(&rule, &r.distribution, r.rank(i), p.get(i));
                let same = m.entries.len() == base.entries.len()
                    && m.entries.iter().zip(&base.entries).all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
                    && m.no_review_mass.to_bits() == base.no_review_mass.to_bits();
                let others = r.distribution.remove_one(p.get(i)).unwrap();
                reduced &= same && BenefitCurve::new(&rule, &b, &others) == BenefitCurve::new(&MatchingRule::Baseline, &b, &others);
            }
        }
    }
    if !reduced {
        failures.push("zero-parameter extensions differ from baseline".into());
    }

    // derivatives against central differences
    let mut worst_fd = 0.0f64;
    for _ in 0..FD_POINTS {
        let s = rng.gen_range(0.1..3.0);
        let m = rng.gen_range(0.2..1.0);
        let x = rng.gen_range(0.01..2.0);
        for f in [
            FunctionSpec::PowerCost { scale: s, exponent: 1.0 + m },
            FunctionSpec::LinearQuality { slope: s },
            FunctionSpec::ConcavePowerQuality { scale: s, exponent: m },
            FunctionSpec::QuadraticBenefit { a: -s, b: 2.0 * s },
            FunctionSpec::LinearBenefit { slope: s },
        ] {
            let exact = f.deriv(x).unwrap();
            let fd = (f.value(x + FD_STEP) - f.value(x - FD_STEP)) / (2.0 * FD_STEP);
            worst_fd = worst_fd.max((exact - fd).abs() / exact.abs().max(1.0));
        }
    }
    if worst_fd > FD_REL {
        failures.push(format!("derivative error {worst_fd:e}"));
    }

    // contraction on converging baseline runs; trace row t holds the ratio
    // of move t to move t-1, so rows from 3 on exclude the first move
    let base = ten_types();
    let mut worst_rho = 0.0f64;
    let mut first_ratio = vec![];
    let mut runs = 0;
    for mu in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let out = run_scenario(&with_mu(&base, mu)).unwrap();
        if !matches!(out.verdict, revmatch_core::Verdict::Converged { .. }) {
            continue;
        }
        runs += 1;
        if let Some(r) = revmatch::artifacts::max_rho_after_first_step(&out.trace) {
            worst_rho = worst_rho.max(r);
        }
        if let Some(r) = out.trace.get(2).and_then(|r| r.rho) {
            first_ratio.push(format!("{mu}: {r:.3}"));
        }
    }
    if worst_rho >= 1.0 {
        failures.push(format!("contraction ratio reaches {worst_rho}"));
    }

    let pass = failures.is_empty();
    Verdict::new(
        pass,
        if pass {
            format!(
                "normalization {worst_norm:.1e}, two paths {worst_path:.1e}, reduction exact, derivatives {worst_fd:.1e}, max contraction ratio {worst_rho:.4} on {runs} runs"
            )
        } else {
            failures.join("; ")
        },
    )
    .note(format!("ratio of the second move to the first (not part of the check): {}", first_ratio.join(", ")))
}
