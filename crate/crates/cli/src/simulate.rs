//! `simulate`: run a workload and write its instrumentation tables.

use std::collections::BTreeMap;
use std::path::PathBuf;

use gaslab_core::chain::{run_chain, ChainRunReport, ReceiptSummary, RunConfig, TimingOrder, WorkloadSpec};
use gaslab_core::evm::{Clock, GasSchedule, VirtualCosts};
use gaslab_core::instrument::{write_macro, write_micro};
use gaslab_core::model::estimate_standard_contract;
use gaslab_core::par::Strategy;
use serde::{Deserialize, Serialize};

use crate::error::{read_input, read_input_string, CliError};
use crate::output::{csv_table, resolve_out, Bundle};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    #[default]
    Wall,
    Virtual,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    #[default]
    Import,
    Shuffled,
}

#[derive(Clone, Debug)]
pub struct SimulateOptions {
    pub spec: PathBuf,
    pub blocks: u64,
    pub micro_window: u64,
    pub macro_window: u64,
    /// Overrides the workload seed.
    pub seed: Option<u64>,
    pub schedule: Option<PathBuf>,
    pub clock: ClockKind,
    pub order: OrderKind,
    pub replay_seed: u64,
    pub repetitions: usize,
    pub sequential: bool,
    pub out: Option<PathBuf>,
}

impl SimulateOptions {
    pub fn new(spec: impl Into<PathBuf>, blocks: u64) -> Self {
        Self {
            spec: spec.into(),
            blocks,
            micro_window: 500,
            macro_window: 500,
            seed: None,
            schedule: None,
            clock: ClockKind::Wall,
            order: OrderKind::Import,
            replay_seed: 0,
            repetitions: 1,
            sequential: false,
            out: None,
        }
    }
}

/// Contents of `receipts.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub workload: String,
    pub blocks: u64,
    pub final_root: String,
    pub key_count: usize,
    pub transactions: u64,
    pub successful: u64,
    pub out_of_gas: u64,
    pub other_failures: u64,
    pub gas_used: u64,
    pub intrinsic_gas: u64,
    pub sampled_gas: u64,
    pub fees_wei: String,
    pub standard_contract: Option<ContractSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractSummary {
    pub l_p: f64,
    pub f_p: BTreeMap<String, f64>,
}

pub const USAGE_HEADER: [&str; 6] = ["window_start", "transactions", "successful", "gas_used", "intrinsic_gas", "fees_wei"];

pub struct SimulateOutcome {
    pub dir: PathBuf,
    pub report: ChainRunReport,
}

pub fn load_schedule(path: Option<&PathBuf>) -> Result<(GasSchedule, Option<Vec<u8>>), CliError> {
    match path {
        None => Ok((GasSchedule::default_schedule(), None)),
        Some(p) => {
            let bytes = read_input(p)?;
            let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::input(format!("{} is not UTF-8", p.display())))?;
            let s = GasSchedule::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            Ok((s, Some(bytes)))
        }
    }
}

pub fn simulate(opts: &SimulateOptions) -> Result<SimulateOutcome, CliError> {
    let spec_text = read_input_string(&opts.spec)?;
    let mut spec = WorkloadSpec::parse(&spec_text).map_err(|e| CliError::input(format!("{}: {e}", opts.spec.display())))?;
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    if opts.blocks == 0 {
        return Err(CliError::input("--blocks must be at least 1"));
    }
    let (schedule, schedule_bytes) = load_schedule(opts.schedule.as_ref())?;
    let config = RunConfig {
        micro_window: opts.micro_window,
        macro_window: opts.macro_window,
        clock: match opts.clock {
            ClockKind::Wall => Clock::Wall,
            ClockKind::Virtual => Clock::Virtual(VirtualCosts::default()),
        },
        order: match opts.order {
            OrderKind::Import => TimingOrder::Import,
            OrderKind::Shuffled => TimingOrder::ShuffledReplay { seed: opts.replay_seed },
        },
        repetitions: opts.repetitions,
        strategy: if opts.sequential { Strategy::Sequential } else { Strategy::default() },
        ..Default::default()
    };
    let report = run_chain(&spec, opts.blocks, &schedule, &config).map_err(|e| CliError::input(e.to_string()))?;

    let mut bundle = Bundle::create(resolve_out(opts.out.as_deref(), "simulate"), "simulate")?;
    bundle.input(&opts.spec, spec_text.as_bytes());
    if let (Some(p), Some(b)) = (&opts.schedule, &schedule_bytes) {
        bundle.input(p, b);
    }
    bundle.param("blocks", opts.blocks);
    bundle.param("micro_window", opts.micro_window);
    bundle.param("macro_window", opts.macro_window);
    bundle.param("seed", spec.seed);
    bundle.param("clock", opts.clock);
    bundle.param("order", opts.order);
    bundle.param("replay_seed", opts.replay_seed);
    bundle.param("repetitions", opts.repetitions);

    let mut micro = Vec::new();
    write_micro(&report.micro, &mut micro).map_err(|e| CliError::Io(e.to_string()))?;
    bundle.write("micro.csv", &micro)?;
    let mut mac = Vec::new();
    write_macro(&report.macro_windows, &mut mac).map_err(|e| CliError::Io(e.to_string()))?;
    bundle.write("macro.csv", &mac)?;
    let usage: Vec<Vec<String>> = report.usage.iter().map(|(start, u)| usage_row(*start, u)).collect();
    bundle.write("usage.csv", &csv_table(&USAGE_HEADER, &usage))?;
    bundle.write_json("receipts.json", &summarize(&spec, &report))?;
    let dir = bundle.dir().to_path_buf();
    bundle.finish()?;
    Ok(SimulateOutcome { dir, report })
}

fn usage_row(start: u64, u: &ReceiptSummary) -> Vec<String> {
    vec![
        start.to_string(),
        u.transactions.to_string(),
        u.successful.to_string(),
        u.gas_used.to_string(),
        u.intrinsic_gas.to_string(),
        u.fees_wei.to_string(),
    ]
}

fn summarize(spec: &WorkloadSpec, r: &ChainRunReport) -> RunSummary {
    let rc = &r.receipts;
    RunSummary {
        workload: spec.name.clone(),
        blocks: r.blocks,
        final_root: r.final_root.to_hex(),
        key_count: r.key_count,
        transactions: rc.transactions,
        successful: rc.successful,
        out_of_gas: rc.out_of_gas,
        other_failures: rc.other_failures,
        gas_used: rc.gas_used,
        intrinsic_gas: rc.intrinsic_gas,
        sampled_gas: rc.sampled_gas,
        fees_wei: rc.fees_wei.to_string(),
        standard_contract: estimate_standard_contract(&r.tally).ok().map(|p| ContractSummary {
            l_p: p.l_p(),
            f_p: p.f_p().iter().map(|(op, f)| (op.to_string(), *f)).collect(),
        }),
    }
}
