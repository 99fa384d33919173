use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use revmatch::artifacts::{iterations, max_rho_after_first_step};
use revmatch::scenario::ScenarioFile;
use revmatch::{desirable, exit_code, load_scenario, load_sweep, render, run_scenario, run_sweep, verify_golden, write_files};
use revmatch_core::{designer_objectives, find_max_step_size, DynamicsState, UpdateMode, Verdict};

/// Rating-based peer-review matching: runs, sweeps and checks.
///
/// Exit status: 0 converged or check passed, 2 oscillating, 3 hit the
/// iteration cap, 4 check failed, 1 error.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its trace, final state and report.
    Run {
        scenario: PathBuf,
        #[arg(long, env = revmatch::OUT_ENV, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, requires = "mode")]
        seed: Option<u64>,
    },
    /// Run a parameter sweep and write summary.csv.
    Sweep {
        sweep: PathBuf,
        #[arg(long, env = revmatch::OUT_ENV, default_value = "out")]
        out: PathBuf,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Largest step size in [lo, hi] that still converges, to resolution res.
    MaxMu {
        scenario: PathBuf,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        res: f64,
    },
    /// Rerun the golden cases under DIR and compare.
    VerifyGolden {
        dir: PathBuf,
        /// Overwrite the expected files with fresh output.
        #[arg(long)]
        bless: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check the scenario's rule for desirability on sampled distributions.
    CheckDesirable {
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Expected,
    Sampled,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<u8> {
    match cmd {
        Cmd::Run { scenario, out, mode, seed } => {
            let mut s = load_scenario(&scenario)?;
            warn(&s.warnings);
            if let Some(m) = mode {
                let mode = match (m, seed) {
                    (Mode::Expected, _) => UpdateMode::Expected,
                    (Mode::Sampled, Some(seed)) => UpdateMode::Sampled { seed },
                    (Mode::Sampled, None) => bail!("--mode sampled needs --seed"),
                };
                s = s.modified(|f: &mut ScenarioFile| {
                    f.mode = mode;
                    f.layout = None;
                })?;
            }
            let o = run_scenario(&s)?;
            write_files(&out, &render(&s, &o)?).with_context(|| format!("writing {}", out.display()))?;
            let obj = designer_objectives(&o.final_state, &s.population);
            println!("{}: {} after {} steps", s.name, verdict_text(&o.verdict), iterations(&o));
            println!("sum_quality {:.6}  welfare {:.6}  ce {}", obj.sum_quality, obj.welfare, if o.ce.all_pass() { "pass" } else { "fail" });
            if let Some(r) = max_rho_after_first_step(&o.trace) {
                println!("max contraction ratio after the first move {r:.6}");
            }
            Ok(exit_code(&o.verdict) as u8)
        }
        Cmd::Sweep { sweep, out, jobs } => {
            let spec = load_sweep(&sweep)?;
            warn(&spec.base.warnings);
            let summary = run_sweep(&spec, jobs)?;
            let csv = summary.to_csv()?;
            write_files(&out, &[(revmatch::sweep::SUMMARY_FILE, csv.clone())])?;
            print!("{csv}");
            Ok(0)
        }
        Cmd::MaxMu { scenario, lo, hi, res } => {
            let s = load_scenario(&scenario)?;
            warn(&s.warnings);
            let r = find_max_step_size(&DynamicsState::initial(s.theta0.clone()), &s.population, &s.config, lo, hi, res)?;
            for (mu, ok) in &r.evaluations {
                println!("mu {mu:.6}  {}", if *ok { "converges" } else { "does not converge" });
            }
            if r.non_monotone {
                eprintln!("warning: convergence is not monotone in mu over the evaluated points");
            }
            match r.best {
                Some(mu) => println!("max mu {mu}"),
                None => println!("no converging mu in [{lo}, {hi}]"),
            }
            Ok(0)
        }
        Cmd::VerifyGolden { dir, bless, jobs } => {
            let report = verify_golden(&dir, jobs, bless)?;
            print!("{report}");
            Ok(if report.passed() { 0 } else { 4 })
        }
        Cmd::CheckDesirable { scenario, samples, seed } => {
            let s = load_scenario(&scenario)?;
            warn(&s.warnings);
            let mut ok = true;
            for (b, rep) in desirable::check_scenario(&s, samples, seed) {
                ok &= rep.passes();
                println!("{b:?}: {} violations over {} distributions", rep.violations.len(), rep.samples);
                for v in rep.violations.iter().take(10) {
                    println!("  sample {} level {} {:?} at {}", v.sample, v.level, v.kind, v.x);
                }
                if !rep.no_rating_incentive.is_empty() {
                    println!("  flat curve (no incentive to raise the rating) in {} samples", rep.no_rating_incentive.len());
                }
            }
            Ok(if ok { 0 } else { 4 })
        }
    }
}

fn warn(w: &[String]) {
    for line in w {
        eprintln!("warning: {line}");
    }
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Converged { .. } => "converged".into(),
        Verdict::Oscillating { period } => format!("oscillating with period {period} (heuristic)"),
        Verdict::MaxIters => "hit the iteration cap".into(),
    }
}
