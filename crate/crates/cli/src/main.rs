use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use smartema::trigger::OutcomeSource;
use smartema_cli::config::CONFIG_ENV;
use smartema_cli::{Outcome, Overrides, RunConfig, Runner, Stage};

#[derive(Parser, Debug)]
#[command(name = "smartema", version, about = "Uncertainty-aware EMA scheduling experiments")]
struct Cli {
    /// TOML run configuration. Defaults apply when omitted.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Weight on squared normalized uncertainty.
    #[arg(long, global = true)]
    wu: Option<f64>,
    /// Weight on squared receptivity probability.
    #[arg(long, global = true)]
    wr: Option<f64>,
    /// Scheduling windows per day.
    #[arg(long, global = true)]
    windows: Option<u32>,
    /// How simulated prompts are answered.
    #[arg(long, global = true, value_enum)]
    outcome_source: Option<OutcomeArg>,
    /// Re-run stages even when nothing changed.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a synthetic cohort.
    Generate,
    /// Label segments from EMA events.
    Label,
    /// Extract segment features.
    Features,
    /// Train receptivity and emotion models per fold.
    Train,
    /// Score candidates and simulate smart and random triggering.
    Simulate,
    /// Model metrics and the mixed-model analyses.
    Evaluate,
    /// Render the report from whatever results exist.
    Report,
    /// Every stage in order.
    Pipeline,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutcomeArg {
    ModelThreshold,
    ModelBernoulli,
    GenerativeTruth,
}

impl From<OutcomeArg> for OutcomeSource {
    fn from(a: OutcomeArg) -> Self {
        match a {
            OutcomeArg::ModelThreshold => OutcomeSource::ModelThreshold,
            OutcomeArg::ModelBernoulli => OutcomeSource::ModelBernoulli,
            OutcomeArg::GenerativeTruth => OutcomeSource::GenerativeTruth,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let resolved = cfg.resolve(&Overrides {
        seed: cli.seed,
        w_u: cli.wu,
        w_r: cli.wr,
        windows: cli.windows,
        outcome: cli.outcome_source.map(Into::into),
    })?;
    let mut runner = Runner::new(&cli.out, resolved)?;
    runner.force = cli.force;
    let done = match cli.cmd {
        Cmd::Pipeline => runner.pipeline()?,
        Cmd::Generate => single(&mut runner, Stage::Generate)?,
        Cmd::Label => single(&mut runner, Stage::Label)?,
        Cmd::Features => single(&mut runner, Stage::Features)?,
        Cmd::Train => single(&mut runner, Stage::Train)?,
        Cmd::Simulate => single(&mut runner, Stage::Simulate)?,
        Cmd::Evaluate => single(&mut runner, Stage::Evaluate)?,
        Cmd::Report => single(&mut runner, Stage::Report)?,
    };
    for (stage, outcome) in done {
        let what = match outcome {
            Outcome::Ran => "done",
            Outcome::UpToDate => "up to date",
        };
        println!("{stage}: {what}");
    }
    Ok(())
}

fn single(r: &mut Runner, s: Stage) -> Result<Vec<(Stage, Outcome)>> {
    Ok(vec![(s, r.run_stage(s)?)])
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
