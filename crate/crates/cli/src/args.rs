use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "blockreduce", version, about = "Simulate and analyse hierarchies of merged-mined chains")]
pub struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the discrete-event simulator for one or more seeds.
    Simulate(SimulateArgs),
    /// Evaluate the closed-form delay and efficiency model.
    Analytic(AnalyticArgs),
    /// Run a scripted scenario and check its expectations.
    Scenario(ScenarioArgs),
    /// Calibrated throughput-vs-q sweep.
    ScalingSweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    /// Seed to run; repeatable. Overrides the seeds in the config.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Number of trials to run concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Write a per-event trace log for each seed.
    #[arg(long)]
    pub trace: bool,
    /// Maximum lines per trace file.
    #[arg(long, default_value_t = 1_000_000)]
    pub trace_limit: usize,
    /// Skip the consistency and conservation checks.
    #[arg(long)]
    pub no_check: bool,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Bundled scenario name (fig3, coincident-reorg); use --config for a file.
    pub name: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
}
