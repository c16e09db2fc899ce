//! `hftmm`: record, rebuild, simulate, featurize, train and evaluate.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use config::{Algo, EncoderKind};
use hftmm_core::backtest::LatencyAxis;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "hftmm", version, about = "Latency-aware market-making laboratory")]
struct Cli {
    /// TOML run configuration; `--set` and subcommand flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set rl.ppo.updates=50`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capture a live level-3 feed plus a snapshot into a log segment.
    Record(RecordArgs),
    /// Rebuild the book from a snapshot and log, emitting top-of-book ticks.
    Reconstruct(ReconstructArgs),
    /// Generate a synthetic tick stream.
    Simulate(SimulateArgs),
    /// Fit generator parameters to a tick file.
    Calibrate(CalibrateArgs),
    /// Sample alpha features from a level-3 log.
    Features(FeaturesArgs),
    /// Regress every feature on forward mid returns.
    PredictEval(PredictEvalArgs),
    /// Train a DQN or PPO quoting agent.
    Train(TrainArgs),
    /// Run a policy over a tick stream.
    Backtest(BacktestArgs),
    /// Backtest one policy across latency values.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct RecordArgs {
    /// `ws://`/`wss://` feed, or a recorded log path.
    #[arg(long)]
    pub feed: String,
    /// `http(s)://` snapshot endpoint, or a snapshot file.
    #[arg(long)]
    pub snapshot: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Seconds to record.
    #[arg(long)]
    pub duration: u64,
    #[arg(long, default_value = "BTC-USD")]
    pub product: String,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    /// Tick CSV to write.
    #[arg(long)]
    pub emit_ticks: PathBuf,
    /// Escalate book integrity anomalies to errors.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Generator parameters as JSON (the `calibrate` output) or TOML;
    /// defaults to the `[sim]` section.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Stream length in ms.
    #[arg(long)]
    pub duration: i64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub ticks: PathBuf,
    /// JSON parameter file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Book snapshot the log starts from; empty book when omitted.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictEvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub ticks: PathBuf,
    /// Regression CSV; the R² chart goes next to it with an `.svg` extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// Train on this tick file instead of simulated segments.
    #[arg(long)]
    pub ticks: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub encoder: Option<EncoderKind>,
    #[arg(long)]
    pub l_submit: Option<i64>,
    #[arg(long)]
    pub l_cancel: Option<i64>,
    /// PPO updates or DQN environment steps.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PolicyArgs {
    /// `fixed`, `adaptive`, `null`, or a checkpoint path.
    #[arg(long)]
    pub policy: String,
    /// Tick CSV; a simulated stream of `backtest.duration_ms` when omitted.
    #[arg(long)]
    pub ticks: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub common: PolicyArgs,
    #[arg(long)]
    pub l_submit: Option<i64>,
    #[arg(long)]
    pub l_cancel: Option<i64>,
    /// Also write the order-event trace as CSV.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: PolicyArgs,
    #[arg(long)]
    pub axis: LatencyAxis,
    /// Comma-separated latencies in ms; defaults to the configured sweep.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<i64>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match config::load(cli.config.as_deref(), &cli.sets) {
        Ok(mut c) => {
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c
        }
        Err(e) => return fail("cli", e),
    };
    if cli.print_config {
        match toml::to_string_pretty(&config) {
            Ok(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => return fail("cli", e.into()),
        }
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see `hftmm --help`)");
        return ExitCode::from(2);
    };
    let (module, result) = match command {
        Command::Record(a) => ("feed-recorder", commands::record(&config, a)),
        Command::Reconstruct(a) => ("lob-reconstruct", commands::reconstruct(config, a)),
        Command::Simulate(a) => ("market-sim", commands::simulate(&config, a)),
        Command::Calibrate(a) => ("market-sim", commands::calibrate(&config, a)),
        Command::Features(a) => ("features", commands::features(&config, a)),
        Command::PredictEval(a) => ("features", commands::predict_eval(&config, a)),
        Command::Train(a) => ("rl", commands::train(config, a)),
        Command::Backtest(a) => ("backtest", commands::backtest(config, a)),
        Command::Sweep(a) => ("backtest", commands::sweep(&config, a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(module, e),
    }
}

fn fail(module: &str, e: anyhow::Error) -> ExitCode {
    eprintln!("error[{module}]: {e:#}");
    ExitCode::from(1)
}
