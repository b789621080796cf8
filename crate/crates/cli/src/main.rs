//! Batch front end: machine-check the stopping-condition theorems, compare
//! protocols across scenario sets, simulate, and dump single-run traces.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sba_core::model::ExchangeKind;
use sba_core::verification::DEFAULT_CAP;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sba-lab",
    about = "Simultaneous-agreement laboratory: simulate crash-failure consensus protocols \
             and machine-check their knowledge-theoretic stopping conditions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustively verify rule/knowledge equivalence, agreement
    /// properties and the stopping-condition theorems.
    Verify(VerifyArgs),
    /// Emit per-scenario decision times for several exchanges plus an
    /// aggregate earlier-than matrix and resource table.
    Compare(CompareArgs),
    /// Simulate a scenario set under one or all exchanges and emit the
    /// per-scenario CSV.
    Simulate(SimulateArgs),
    /// Dump the full run of one scenario file as JSON.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExchangeArg {
    All,
    Flood,
    Counting,
    CountingPr,
    Vectorized,
    Sendwaste,
    Fullinfo,
}

impl ExchangeArg {
    fn limited(self) -> Vec<ExchangeKind> {
        match self {
            ExchangeArg::All => ExchangeKind::LIMITED.to_vec(),
            other => vec![other.kind()],
        }
    }

    fn kind(self) -> ExchangeKind {
        match self {
            ExchangeArg::All => unreachable!("callers expand `all` first"),
            ExchangeArg::Flood => ExchangeKind::Flood,
            ExchangeArg::Counting => ExchangeKind::Counting,
            ExchangeArg::CountingPr => ExchangeKind::CountingPr,
            ExchangeArg::Vectorized => ExchangeKind::Vectorized,
            ExchangeArg::Sendwaste => ExchangeKind::SendWaste,
            ExchangeArg::Fullinfo => ExchangeKind::FullInfo,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Sampled,
}

#[derive(Args)]
struct VerifyArgs {
    /// Agent count; omitted = the whole matrix n in {2,3,4}.
    #[arg(long)]
    n: Option<usize>,
    /// Failure bound; omitted = every t in 1..n.
    #[arg(long)]
    t: Option<usize>,
    /// Rounds per run (default min(t+1, n-1) + 1).
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    exchange: ExchangeArg,
    /// Exhaustive-space cap; overrides the SBA_LAB_CAP environment variable.
    #[arg(long)]
    cap: Option<u64>,
    /// Verification report (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    exchange: ExchangeArg,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeArg,
    /// Sample size for --mode sampled.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cap: Option<u64>,
    /// Per-scenario CSV (one row per scenario and exchange).
    #[arg(long)]
    out: PathBuf,
    /// Resource-measurement CSV.
    #[arg(long)]
    resources_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    exchange: ExchangeArg,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cap: Option<u64>,
    /// Per-scenario CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum)]
    exchange: ExchangeArg,
    /// Trace output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn effective_cap(flag: Option<u64>) -> u128 {
    if let Some(cap) = flag {
        return cap as u128;
    }
    if let Ok(raw) = std::env::var("SBA_LAB_CAP") {
        if let Ok(cap) = raw.parse::<u128>() {
            return cap;
        }
    }
    DEFAULT_CAP
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify(args) => commands::verify(args),
        Command::Compare(args) => commands::compare(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Trace(args) => commands::trace(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
