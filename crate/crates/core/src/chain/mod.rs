//! Synthetic chain driver: block generation, serialized import and the
//! instrumentation spans around it.

mod workload;

use std::collections::BTreeMap;
use std::time::Instant;

use primitive_types::U256;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evm::{
    deploy_code, encode_word, run_transaction, slot_key, Clock, ExecConfig, GasSchedule, OpcodeTable, Status,
    TxError, TxReceipt,
};
use crate::evm::interpreter::DEFAULT_CALL_DEPTH;
use crate::instrument::{window_of, MacroCategory, SampleSink, WindowAggregate};
use crate::par::Strategy;
use crate::trie::{RootHash, StateTrie, TrieConfig, TrieError};

pub use workload::{
    generate_block, initial_value, library_code, tx_root, Block, Transaction, WorkloadError, WorkloadSpec,
    LIBRARY_ADDRESS,
};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("block {height}: {msg}")]
    Verify { height: u64, msg: String },
    #[error("state: {0}")]
    State(#[from] TrieError),
    #[error("config: {0}")]
    Config(String),
}

/// Fixed virtual costs for the macro spans, in nanoseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VirtualSpanCosts {
    pub verify_base: u64,
    pub verify_per_tx: u64,
    pub tx_overhead: u64,
    pub db_base: u64,
    pub db_per_node: u64,
    pub import_overhead: u64,
}

impl Default for VirtualSpanCosts {
    fn default() -> Self {
        Self { verify_base: 400, verify_per_tx: 150, tx_overhead: 300, db_base: 200, db_per_node: 600, import_overhead: 100 }
    }
}

/// Order in which blocks are timed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TimingOrder {
    /// Time each block as it is imported.
    #[default]
    Import,
    /// Import untimed, then re-execute every block against its archived
    /// parent state in a seeded random order and time that pass. Slow
    /// host-level drift then lands on random heights instead of
    /// masquerading as a height trend.
    ShuffledReplay { seed: u64 },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub micro_window: u64,
    pub macro_window: u64,
    pub micro: bool,
    pub macro_enabled: bool,
    pub clock: Clock,
    pub span_costs: VirtualSpanCosts,
    /// Executions per transaction; the median-time run is kept.
    pub repetitions: usize,
    pub strategy: Strategy,
    /// Blocks generated ahead of import per batch.
    pub batch: usize,
    pub cache_capacity: usize,
    pub max_call_depth: usize,
    pub order: TimingOrder,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            micro_window: 500,
            macro_window: 500,
            micro: true,
            macro_enabled: true,
            clock: Clock::Wall,
            span_costs: VirtualSpanCosts::default(),
            repetitions: 1,
            strategy: Strategy::default(),
            batch: 256,
            cache_capacity: 0,
            max_call_depth: DEFAULT_CALL_DEPTH,
            order: TimingOrder::Import,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), ChainError> {
        if self.micro_window == 0 || self.macro_window == 0 {
            return Err(ChainError::Config("window sizes must be positive".into()));
        }
        if self.repetitions == 0 || self.batch == 0 {
            return Err(ChainError::Config("repetitions and batch must be positive".into()));
        }
        Ok(())
    }
}

/// Counts over successful transactions, for estimating the standard contract.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContractTally {
    pub transactions: u64,
    pub samples: OpcodeTable,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct ReceiptSummary {
    pub transactions: u64,
    pub successful: u64,
    pub out_of_gas: u64,
    pub other_failures: u64,
    pub gas_used: u64,
    pub intrinsic_gas: u64,
    pub sampled_gas: u64,
    pub fees_wei: u128,
}

impl ReceiptSummary {
    fn add(&mut self, r: &TxReceipt, gas_price: u64) {
        self.transactions += 1;
        self.gas_used += r.gas_used;
        self.intrinsic_gas += r.intrinsic_gas;
        self.sampled_gas += r.samples.total_gas();
        self.fees_wei += r.gas_used as u128 * gas_price as u128;
        match r.status {
            Status::Success => self.successful += 1,
            Status::OutOfGas => self.out_of_gas += 1,
            _ => self.other_failures += 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainRunReport {
    pub blocks: u64,
    pub micro: Vec<WindowAggregate>,
    pub macro_windows: Vec<WindowAggregate>,
    pub final_root: RootHash,
    pub key_count: usize,
    pub receipts: ReceiptSummary,
    /// Receipt totals per macro window, keyed by window start.
    pub usage: BTreeMap<u64, ReceiptSummary>,
    pub tally: ContractTally,
}

enum Timer {
    Wall(Instant),
    Virtual,
}

/// Chain state plus instrumentation; imports one block at a time.
pub struct Chain {
    spec: WorkloadSpec,
    schedule: GasSchedule,
    config: RunConfig,
    exec: ExecConfig,
    state: StateTrie,
    next_height: u64,
    micro: SampleSink,
    macro_sink: SampleSink,
    receipts: ReceiptSummary,
    usage: BTreeMap<u64, ReceiptSummary>,
    tally: ContractTally,
    /// Set during a timing replay: windows are not rotated and receipts are
    /// not counted again.
    replaying: bool,
}

fn exec_config(config: &RunConfig) -> ExecConfig {
    // Macro EVM time is measured around the frame loop even with micro sampling off.
    let clock = match config.clock {
        Clock::Wall if !config.micro => Clock::Off,
        c => c,
    };
    ExecConfig { clock, max_call_depth: config.max_call_depth }
}

impl Chain {
    /// Populates the initial slots and deploys the library contract.
    pub fn genesis(spec: WorkloadSpec, schedule: GasSchedule, config: RunConfig) -> Result<Self, ChainError> {
        spec.validate()?;
        config.validate()?;
        let mut state = StateTrie::new(TrieConfig { secure: true, cache_capacity: config.cache_capacity });
        for i in 0..spec.initial_keys {
            state.insert(&slot_key(&U256::from(i)), &encode_word(&initial_value(i)))?;
        }
        if spec.uses_library() {
            deploy_code(&mut state, &U256::from(LIBRARY_ADDRESS), &library_code())?;
        }
        let exec = exec_config(&config);
        Ok(Self {
            spec,
            schedule,
            exec,
            state,
            next_height: 0,
            micro: SampleSink::new(0),
            macro_sink: SampleSink::new(0),
            receipts: ReceiptSummary::default(),
            usage: BTreeMap::new(),
            tally: ContractTally::default(),
            replaying: false,
            config,
        })
    }

    pub fn state(&self) -> &StateTrie {
        &self.state
    }

    pub fn next_height(&self) -> u64 {
        self.next_height
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    fn start(&self) -> Timer {
        match self.config.clock {
            Clock::Virtual(_) => Timer::Virtual,
            _ => Timer::Wall(Instant::now()),
        }
    }

    fn elapsed(&self, t: &Timer, virtual_ns: u64) -> u64 {
        match t {
            Timer::Wall(i) => i.elapsed().as_nanos() as u64,
            Timer::Virtual => virtual_ns,
        }
    }

    fn rotate_windows(&mut self, height: u64) {
        let mw = window_of(height, self.config.micro_window);
        if mw > self.micro.current_start() {
            self.micro.close_window(mw);
        }
        let cw = window_of(height, self.config.macro_window);
        if cw > self.macro_sink.current_start() {
            self.macro_sink.close_window(cw);
        }
    }

    /// Stand-in verification: height, parent linkage, transaction root and
    /// intrinsic gas coverage.
    pub fn verify(&self, block: &Block) -> Result<(), ChainError> {
        let fail = |msg: String| Err(ChainError::Verify { height: block.height, msg });
        if block.height != self.next_height {
            return fail(format!("expected height {}", self.next_height));
        }
        if block.parent_root != Some(self.state.root_hash()) {
            return fail("parent root does not match state".into());
        }
        if tx_root(&block.transactions) != block.tx_root {
            return fail("transaction root mismatch".into());
        }
        if let Some(tx) = block.transactions.iter().find(|tx| tx.gas_limit < self.schedule.intrinsic) {
            return fail(format!("gas limit {} below intrinsic", tx.gas_limit));
        }
        Ok(())
    }

    /// Verifies, executes and commits `block`, recording every span.
    pub fn import(&mut self, mut block: Block) -> Result<Block, ChainError> {
        let v = self.config.span_costs;
        let height = block.height;
        if !self.replaying {
            self.rotate_windows(height);
        }
        if block.parent_root.is_none() {
            block.parent_root = Some(self.state.root_hash());
        }

        let total = self.start();
        let verify = self.start();
        self.verify(&block)?;
        let verify_ns = self.elapsed(&verify, v.verify_base + v.verify_per_tx * block.transactions.len() as u64);

        let import = self.start();
        let (mut tx_total, mut db_total, mut evm_total) = (0, 0, 0);
        for tx in &block.transactions {
            let t = self.start();
            let mut runs = Vec::with_capacity(self.config.repetitions);
            for _ in 0..self.config.repetitions {
                let rt = self.start();
                let exec = run_transaction(&tx.code, &self.state, tx.gas_limit, height, &self.schedule, &self.exec)
                    .map_err(|e| match e {
                        TxError::State(s) => ChainError::State(s),
                        other => ChainError::Verify { height, msg: other.to_string() },
                    })?;
                let d = self.elapsed(&rt, 0);
                runs.push((exec.receipt.evm_time_ns, d, exec));
            }
            runs.sort_by_key(|r| r.0);
            let (evm_ns, run_ns, exec) = runs.swap_remove(runs.len() / 2);
            let tx_ns = match t {
                Timer::Wall(_) if self.config.repetitions > 1 => run_ns,
                _ => self.elapsed(&t, evm_ns + v.tx_overhead),
            };

            let db = self.start();
            let nodes_before = self.state.store().len();
            exec.commit(&mut self.state)?;
            let db_ns = self.elapsed(&db, v.db_per_node * (self.state.store().len() - nodes_before) as u64);

            let r = &exec.receipt;
            if self.config.micro {
                self.micro.record_table(&r.samples);
            }
            tx_total += tx_ns;
            db_total += db_ns;
            evm_total += evm_ns;
            if self.replaying {
                continue;
            }
            self.receipts.add(r, tx.gas_price);
            self.usage.entry(window_of(height, self.config.macro_window)).or_default().add(r, tx.gas_price);
            if r.status.is_success() {
                self.tally.transactions += 1;
                self.tally.samples.merge(&r.samples);
            }
        }
        let db = self.start();
        let root = self.state.root_hash();
        db_total += self.elapsed(&db, v.db_base);
        let import_ns = self.elapsed(&import, tx_total + db_total + v.import_overhead);
        let total_ns = self.elapsed(&total, verify_ns + import_ns);

        if self.config.macro_enabled {
            let m = &self.macro_sink;
            m.record_span(MacroCategory::Verify, verify_ns);
            m.record_span(MacroCategory::Import, import_ns);
            m.record_span(MacroCategory::TX, tx_total);
            m.record_span(MacroCategory::EVM, evm_total);
            m.record_span(MacroCategory::DB, db_total);
            m.record_span(MacroCategory::Total, total_ns);
        }
        block.post_root = Some(root);
        self.next_height += 1;
        Ok(block)
    }

    /// Closes the open windows and returns the report.
    pub fn finish(mut self) -> ChainRunReport {
        if self.next_height > self.micro.current_start() {
            let next = self.micro.current_start() + self.config.micro_window;
            self.micro.close_window(next);
        }
        if self.next_height > self.macro_sink.current_start() {
            let next = self.macro_sink.current_start() + self.config.macro_window;
            self.macro_sink.close_window(next);
        }
        ChainRunReport {
            blocks: self.next_height,
            final_root: self.state.root_hash(),
            key_count: self.state.len(),
            micro: if self.config.micro { self.micro.into_archive() } else { Vec::new() },
            macro_windows: if self.config.macro_enabled { self.macro_sink.into_archive() } else { Vec::new() },
            receipts: self.receipts,
            usage: self.usage,
            tally: self.tally,
        }
    }
}

/// Generates blocks in parallel batches and imports them in height order.
pub fn run_chain(
    spec: &WorkloadSpec,
    num_blocks: u64,
    schedule: &GasSchedule,
    config: &RunConfig,
) -> Result<ChainRunReport, ChainError> {
    if num_blocks == 0 {
        return Err(ChainError::Config("num_blocks must be at least 1".into()));
    }
    let TimingOrder::ShuffledReplay { seed } = config.order else {
        let mut chain = Chain::genesis(spec.clone(), schedule.clone(), config.clone())?;
        import_all(&mut chain, spec, num_blocks, config, |_| {})?;
        return Ok(chain.finish());
    };

    let untimed = RunConfig { micro: false, macro_enabled: false, clock: Clock::Off, repetitions: 1, ..config.clone() };
    let mut chain = Chain::genesis(spec.clone(), schedule.clone(), untimed)?;
    let mut parents = Vec::with_capacity(num_blocks as usize);
    import_all(&mut chain, spec, num_blocks, config, |c| parents.push((c.state.root_hash(), c.state.len())))?;
    let final_state = (chain.state.root_hash(), chain.state.len());

    chain.config = config.clone();
    chain.exec = exec_config(config);
    chain.replaying = true;
    let mut order: Vec<u64> = (0..num_blocks).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut micro: BTreeMap<u64, SampleSink> = BTreeMap::new();
    let mut macro_sinks: BTreeMap<u64, SampleSink> = BTreeMap::new();
    for batch in order.chunks(config.batch) {
        let blocks = config.strategy.map(batch, |h| generate_block(spec, *h));
        for block in blocks {
            let h = block.height;
            let (root, len) = parents[h as usize];
            chain.state.rewind(root, len)?;
            chain.next_height = h;
            let mw = window_of(h, config.micro_window);
            let cw = window_of(h, config.macro_window);
            let m = micro.entry(mw).or_insert_with(|| SampleSink::new(mw));
            let c = macro_sinks.entry(cw).or_insert_with(|| SampleSink::new(cw));
            std::mem::swap(&mut chain.micro, m);
            std::mem::swap(&mut chain.macro_sink, c);
            let r = chain.import(block);
            std::mem::swap(&mut chain.micro, m);
            std::mem::swap(&mut chain.macro_sink, c);
            r?;
        }
    }
    chain.state.rewind(final_state.0, final_state.1)?;
    chain.next_height = num_blocks;
    let close = |sinks: BTreeMap<u64, SampleSink>, size: u64| -> Vec<WindowAggregate> {
        sinks
            .into_iter()
            .map(|(start, mut s)| s.close_window(start + size).clone())
            .collect()
    };
    let mut report = chain.finish();
    report.micro = if config.micro { close(micro, config.micro_window) } else { Vec::new() };
    report.macro_windows = if config.macro_enabled { close(macro_sinks, config.macro_window) } else { Vec::new() };
    Ok(report)
}

fn import_all(
    chain: &mut Chain,
    spec: &WorkloadSpec,
    num_blocks: u64,
    config: &RunConfig,
    mut before_each: impl FnMut(&Chain),
) -> Result<(), ChainError> {
    let mut height = 0;
    while height < num_blocks {
        let n = (num_blocks - height).min(config.batch as u64) as usize;
        let blocks = config.strategy.map_range(n, |i| generate_block(spec, height + i as u64));
        for b in blocks {
            before_each(chain);
            chain.import(b)?;
        }
        height += n as u64;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evm::VirtualCosts;

    fn spec(rate: f64) -> WorkloadSpec {
        WorkloadSpec::parse(&format!(
            "txs_per_block = 2\ntx_length = 20\nfresh_key_rate = {rate}\ninitial_keys = 16\nseed = 3\n\
             [mix]\nSLOAD = 0.4\nSSTORE = 0.1\nADD = 0.3\nPUSH1 = 0.2\n"
        ))
        .unwrap()
    }

    fn virtual_config() -> RunConfig {
        RunConfig {
            micro_window: 10,
            macro_window: 20,
            clock: Clock::Virtual(VirtualCosts::default()),
            ..Default::default()
        }
    }

    #[test]
    fn state_grows_by_fresh_keys() {
        let s = spec(0.5);
        let r = run_chain(&s, 30, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
        assert_eq!(r.key_count as u64, s.expected_keys(30));
        assert_eq!(r.receipts.successful, 60);
        let r0 = run_chain(&spec(0.0), 30, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
        assert_eq!(r0.key_count, 16);
    }

    #[test]
    fn windows_and_containment() {
        let r = run_chain(&spec(1.0), 45, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
        assert_eq!(r.micro.iter().map(|w| w.window_start).collect::<Vec<_>>(), [0, 10, 20, 30, 40]);
        assert_eq!(r.macro_windows.len(), 3);
        for w in &r.macro_windows {
            let c = |k| w.category(k);
            assert!(c(MacroCategory::EVM) <= c(MacroCategory::TX));
            assert!(c(MacroCategory::TX) <= c(MacroCategory::Import));
            assert!(c(MacroCategory::Import) <= c(MacroCategory::Total));
        }
        let micro_gas: u64 = r.micro.iter().map(|w| w.micro_gas()).sum();
        assert_eq!(micro_gas, r.receipts.gas_used - r.receipts.intrinsic_gas);
    }

    #[test]
    fn strategies_agree() {
        let mut cfg = virtual_config();
        cfg.strategy = Strategy::Sequential;
        cfg.batch = 7;
        let a = run_chain(&spec(0.5), 25, &GasSchedule::default_schedule(), &cfg).unwrap();
        let b = run_chain(&spec(0.5), 25, &GasSchedule::default_schedule(), &virtual_config()).unwrap();
        assert_eq!(a.final_root, b.final_root);
        assert_eq!(a.micro, b.micro);
    }

    #[test]
    fn shuffled_replay_keeps_static_columns() {
        let s = spec(1.0);
        let sched = GasSchedule::default_schedule();
        let a = run_chain(&s, 40, &sched, &virtual_config()).unwrap();
        let cfg = RunConfig { order: TimingOrder::ShuffledReplay { seed: 9 }, ..virtual_config() };
        let b = run_chain(&s, 40, &sched, &cfg).unwrap();
        assert_eq!(a.final_root, b.final_root);
        assert_eq!(a.key_count, b.key_count);
        assert_eq!(a.receipts, b.receipts);
        assert_eq!(a.micro.len(), b.micro.len());
        for (x, y) in a.micro.iter().zip(&b.micro) {
            assert_eq!(x.window_start, y.window_start);
            for (op, s) in &x.opcodes {
                assert_eq!((s.count, s.gas), (y.opcode(*op).count, y.opcode(*op).gas));
            }
        }
        assert_eq!(a.macro_windows.len(), b.macro_windows.len());
    }

    #[test]
    fn verify_rejects_bad_links() {
        let s = spec(0.5);
        let mut chain = Chain::genesis(s.clone(), GasSchedule::default_schedule(), virtual_config()).unwrap();
        let mut b = generate_block(&s, 1);
        b.parent_root = Some(chain.state().root_hash());
        assert!(matches!(chain.verify(&b), Err(ChainError::Verify { .. })));
        let mut b = generate_block(&s, 0);
        b.transactions[0].gas_limit += 1;
        assert!(chain.import(b).is_err());
    }
}
