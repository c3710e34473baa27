//! Command line driver for the numerical studies.

mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use oneshot_core::experiments::*;
use oneshot_core::objective::ProblemData;
use oneshot_core::surrogate::Surrogate;
use serde::Serialize;

use output::{file_name, OutDir};

#[derive(Parser)]
#[command(name = "oneshot", version, about = "Numerical studies for penalized one-shot surrogate training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error decay in the sample size N at fixed penalty.
    RateN(Common),
    /// Error decay in the penalty parameter at a fixed sample set.
    RateLambda(Common),
    /// Error decay when N and the penalty grow together.
    RateCombined(Common),
    /// Stochastic solver runs for each surrogate against the reduced reference.
    SgdCompare(Common),
    /// Monte Carlo mean and standard deviation of the random state.
    McStats(Common),
    /// Fast consistency checks; exits nonzero on failure.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file mirroring the experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `output` from the configuration, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, kind: ExperimentKind) -> Result<(ExperimentConfig, OutDir)> {
        let mut cfg = config::load(self.config.as_deref(), kind)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let dir = match (&self.out, &cfg.output) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => PathBuf::from(p),
            (None, None) => PathBuf::from("out"),
        };
        cfg.output = Some(dir.to_string_lossy().into_owned());
        Ok((cfg, OutDir::new(dir)?))
    }
}

#[derive(Serialize)]
struct RateSummary<'a> {
    experiment: &'static str,
    config: &'a ExperimentConfig,
    fit: &'a RateFit,
    points: &'a [RatePoint],
    wall_time_s: f64,
    files: Vec<String>,
}

#[derive(Serialize)]
struct SurrogateSummary {
    label: String,
    param_count: usize,
    first: Option<Checkpoint>,
    last: Option<Checkpoint>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct SgdSummary<'a> {
    experiment: &'static str,
    config: &'a ExperimentConfig,
    z_ref: &'a [f64],
    surrogates: Vec<SurrogateSummary>,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct McSummary<'a> {
    experiment: &'static str,
    config: &'a ExperimentConfig,
    n_samples: u64,
    max_std_dev: f64,
    wall_time_s: f64,
    files: Vec<String>,
}

#[derive(Serialize)]
struct SelftestSummary<'a> {
    experiment: &'static str,
    checks: &'a [selftest::Check],
    wall_time_s: f64,
}

fn rate(common: &Common, kind: ExperimentKind) -> Result<()> {
    let (cfg, out) = common.resolve(kind)?;
    let start = Instant::now();
    let study = match kind {
        ExperimentKind::RateN => run_rate_vs_n(&cfg),
        ExperimentKind::RateLambda => run_rate_vs_lambda(&cfg),
        _ => run_combined(&cfg),
    }?;
    let wall = start.elapsed().as_secs_f64();
    let name = kind.name();
    let data = ProblemData::new(&cfg.problem)?;
    let sur = cfg.surrogate.build(data.s(), data.n_dof())?;
    let files = vec![
        file_name(&out.rate_curve(&format!("{name}.csv"), &study.points)?),
        file_name(&out.state(&format!("{name}_reference_state.json"), &study.reference, sur.flattening())?),
    ];
    let summary = RateSummary {
        experiment: name,
        config: &cfg,
        fit: &study.fit,
        points: &study.points,
        wall_time_s: wall,
        files,
    };
    let path = out.json(&format!("{name}.json"), &summary)?;
    println!("{name}: slope {:.4} (fit residual {:.3e}) in {wall:.1} s", study.fit.slope, study.fit.residual);
    println!("wrote {}", path.display());
    Ok(())
}

fn sgd(common: &Common) -> Result<()> {
    let kind = ExperimentKind::SgdCompare;
    let (cfg, out) = common.resolve(kind)?;
    let start = Instant::now();
    let cmp = run_sgd_vs_reference(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let data = ProblemData::new(&cfg.problem)?;
    let mut surrogates = Vec::with_capacity(cmp.traces.len());
    for (trace, spec) in cmp.traces.iter().zip(&cfg.sgd.surrogates) {
        let sur = spec.build(data.s(), data.n_dof())?;
        let label = &trace.label;
        let files = vec![
            file_name(&out.checkpoints(&format!("sgd_{label}_checkpoints.csv"), &trace.checkpoints)?),
            file_name(&out.penalty_log(&format!("sgd_{label}_log.csv"), &trace.run.log)?),
            file_name(&out.state(&format!("sgd_{label}_state.json"), &trace.run.x, sur.flattening())?),
        ];
        let (first, last) = (trace.checkpoints.first().copied(), trace.checkpoints.last().copied());
        if let (Some(a), Some(b)) = (first, last) {
            println!(
                "{label} ({} parameters): control error {:.3e} -> {:.3e}, residual {:.3e}",
                trace.param_count, a.control_error, b.control_error, b.residual
            );
        }
        surrogates.push(SurrogateSummary {
            label: label.clone(),
            param_count: trace.param_count,
            first,
            last,
            files,
        });
    }
    let summary = SgdSummary {
        experiment: kind.name(),
        config: &cfg,
        z_ref: &cmp.z_ref,
        surrogates,
        wall_time_s: wall,
    };
    let path = out.json("sgd-compare.json", &summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn mc(common: &Common) -> Result<()> {
    let kind = ExperimentKind::McStats;
    let (cfg, out) = common.resolve(kind)?;
    let start = Instant::now();
    let data = ProblemData::new(&cfg.problem)?;
    let stats = monte_carlo_state_stats(&data, cfg.mc.n_samples, cfg.seed)?;
    let wall = start.elapsed().as_secs_f64();
    let files = vec![file_name(&out.state_stats("mc-stats.csv", &stats)?)];
    let max_std_dev = stats.std_dev.iter().copied().fold(0.0, f64::max);
    let path = out.json(
        "mc-stats.json",
        &McSummary {
            experiment: kind.name(),
            config: &cfg,
            n_samples: stats.n_samples,
            max_std_dev,
            wall_time_s: wall,
            files,
        },
    )?;
    println!("mc-stats: {} samples, largest std {max_std_dev:.3e}", stats.n_samples);
    println!("wrote {}", path.display());
    Ok(())
}

fn self_test(common: &Common) -> Result<()> {
    let start = Instant::now();
    let checks = selftest::run()?;
    for c in &checks {
        println!("{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(dir) = &common.out {
        let out = OutDir::new(dir)?;
        out.json(
            "selftest.json",
            &SelftestSummary {
                experiment: "selftest",
                checks: &checks,
                wall_time_s: start.elapsed().as_secs_f64(),
            },
        )?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        bail!("{failed} self-test check(s) failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    match &Cli::parse().command {
        Command::RateN(c) => rate(c, ExperimentKind::RateN),
        Command::RateLambda(c) => rate(c, ExperimentKind::RateLambda),
        Command::RateCombined(c) => rate(c, ExperimentKind::RateCombined),
        Command::SgdCompare(c) => sgd(c),
        Command::McStats(c) => mc(c),
        Command::Selftest(c) => self_test(c),
    }
}
