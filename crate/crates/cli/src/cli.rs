//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analyze::{analyze, AnalyzeOptions, WeightingKind};
use crate::economics::{economics, EconomicsInput};
use crate::error::CliError;
use crate::output::{resolve_out, write_atomic};
use crate::plot::plot;
use crate::simulate::{load_schedule, simulate, ClockKind, OrderKind, SimulateOptions};

#[derive(Debug, Parser)]
#[command(name = "gaslab", version, about = "Block-height gas cost laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a synthetic chain and write instrumentation tables.
    Simulate(SimulateArgs),
    /// Classify, fit and reprice from instrumentation tables.
    Analyze(AnalyzeArgs),
    /// Render a bundle table as SVG.
    Plot(PlotArgs),
    /// Compare transaction fees with infrastructure cost.
    Economics(EconomicsArgs),
    /// Gas schedule utilities.
    Schedule {
        #[command(subcommand)]
        command: ScheduleCommand,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Workload spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub blocks: u64,
    /// Window size for both micro and macro tables.
    #[arg(long, default_value_t = 500)]
    pub window: u64,
    #[arg(long)]
    pub micro_window: Option<u64>,
    #[arg(long)]
    pub macro_window: Option<u64>,
    /// Overrides the workload seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gas schedule file; the built-in default when omitted.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ClockKind::Wall)]
    pub clock: ClockKind,
    #[arg(long, value_enum, default_value_t = OrderKind::Import)]
    pub order: OrderKind,
    /// Permutation seed for the shuffled timing order.
    #[arg(long, default_value_t = 0)]
    pub replay_seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    /// Generate blocks on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub micro: PathBuf,
    #[arg(long = "macro")]
    pub macro_csv: Option<PathBuf>,
    /// `receipts.json` from simulate.
    #[arg(long)]
    pub receipts: Option<PathBuf>,
    #[arg(long, default_value_t = gaslab_core::model::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Target time per unit gas (ns).
    #[arg(long = "c", default_value_t = gaslab_core::model::DEFAULT_C)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = WeightingKind::Equal)]
    pub weighting: WeightingKind,
    #[arg(long, default_value_t = 10)]
    pub min_windows: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub degrees: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub fit_seed: u64,
    #[arg(long, default_value_t = 20)]
    pub chi_bins: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub early_windows: usize,
    #[arg(long)]
    pub extrapolate_to: Option<u64>,
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Directory written by analyze or economics.
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub figure: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EconomicsArgs {
    #[arg(long, requires_all = ["gas_price", "eth_usd", "hours", "rate"], conflicts_with_all = ["usage", "summary"])]
    pub gas_used: Option<f64>,
    /// Wei per unit gas.
    #[arg(long)]
    pub gas_price: Option<f64>,
    #[arg(long)]
    pub eth_usd: Option<f64>,
    #[arg(long)]
    pub hours: Option<f64>,
    /// Infrastructure cost, USD per hour.
    #[arg(long)]
    pub rate: Option<f64>,
    /// `usage.csv` from simulate.
    #[arg(long, requires_all = ["macro_csv", "prices"], conflicts_with = "summary")]
    pub usage: Option<PathBuf>,
    #[arg(long = "macro")]
    pub macro_csv: Option<PathBuf>,
    /// Price series: window_start,eth_usd,infra_usd_per_hour.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Aggregated rows: first_block,last_block,fee_usd,infra_usd.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ScheduleCommand {
    /// Evaluate every polynomial rule at one height.
    Materialize {
        #[arg(long)]
        height: u64,
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let opts = SimulateOptions {
                spec: a.spec,
                blocks: a.blocks,
                micro_window: a.micro_window.unwrap_or(a.window),
                macro_window: a.macro_window.unwrap_or(a.window),
                seed: a.seed,
                schedule: a.schedule,
                clock: a.clock,
                order: a.order,
                replay_seed: a.replay_seed,
                repetitions: a.repetitions,
                sequential: a.sequential,
                out: a.out,
            };
            let o = simulate(&opts)?;
            eprintln!("simulate: {} blocks, {} keys -> {}", o.report.blocks, o.report.key_count, o.dir.display());
        }
        Command::Analyze(a) => {
            let opts = AnalyzeOptions {
                micro: a.micro,
                macro_csv: a.macro_csv,
                receipts: a.receipts,
                threshold: a.threshold,
                c: a.c,
                weighting: a.weighting,
                min_windows: a.min_windows,
                degrees: a.degrees,
                fit_seed: a.fit_seed,
                chi_bins: a.chi_bins,
                alpha: a.alpha,
                early_windows: a.early_windows,
                extrapolate_to: a.extrapolate_to,
                schedule: a.schedule,
                out: a.out,
            };
            let o = analyze(&opts)?;
            eprintln!("analyze: dependent [{}] -> {}", o.report.dependent.join(", "), o.dir.display());
        }
        Command::Plot(a) => {
            let path = plot(&a.bundle, &a.figure, a.out.as_deref())?;
            eprintln!("plot: {}", path.display());
        }
        Command::Economics(a) => {
            let input = match (a.gas_used, a.usage, a.summary) {
                (Some(gas_used), None, None) => EconomicsInput::Single {
                    gas_used,
                    gas_price_wei: a.gas_price.unwrap_or_default(),
                    eth_usd: a.eth_usd.unwrap_or_default(),
                    wall_hours: a.hours.unwrap_or_default(),
                    usd_per_hour: a.rate.unwrap_or_default(),
                },
                (None, Some(usage), None) => EconomicsInput::Simulated {
                    usage,
                    macro_csv: a.macro_csv.expect("required by clap"),
                    prices: a.prices.expect("required by clap"),
                },
                (None, None, Some(path)) => EconomicsInput::Summary { path },
                _ => return Err(CliError::input("economics needs one of --gas-used, --usage or --summary")),
            };
            economics(&input, a.out.as_deref())?;
        }
        Command::Schedule { command: ScheduleCommand::Materialize { height, schedule, out } } => {
            let (s, _) = load_schedule(schedule.as_ref())?;
            let text = s.materialize(height).to_text();
            match out {
                Some(p) => write_atomic(&resolve_out(Some(&p), ""), text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
