//! Windowed macro (category) and micro (per-opcode) accumulation.
//!
//! Recording goes through shared references and is lock-free. Closing a
//! window takes `&mut self`, so no recorder can be active while the
//! accumulator is rotated.

mod csv_io;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::evm::{Opcode, OpStats, OpcodeTable};

pub use csv_io::{read_macro, read_micro, write_macro, write_micro, CsvError, MACRO_HEADER, MICRO_HEADER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MacroCategory {
    Total,
    Verify,
    Import,
    DB,
    TX,
    EVM,
}

impl MacroCategory {
    pub const ALL: [MacroCategory; 6] = [
        MacroCategory::Total,
        MacroCategory::Verify,
        MacroCategory::Import,
        MacroCategory::DB,
        MacroCategory::TX,
        MacroCategory::EVM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MacroCategory::Total => "Total",
            MacroCategory::Verify => "Verify",
            MacroCategory::Import => "Import",
            MacroCategory::DB => "DB",
            MacroCategory::TX => "TX",
            MacroCategory::EVM => "EVM",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MacroCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MacroCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MacroCategory::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// Frozen totals for one window.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WindowAggregate {
    pub window_start: u64,
    /// Opcodes with a nonzero count.
    pub opcodes: BTreeMap<Opcode, OpStats>,
    pub categories: BTreeMap<MacroCategory, u64>,
}

impl WindowAggregate {
    pub fn new(window_start: u64) -> Self {
        Self { window_start, ..Default::default() }
    }

    pub fn opcode(&self, op: Opcode) -> OpStats {
        self.opcodes.get(&op).copied().unwrap_or_default()
    }

    pub fn category(&self, c: MacroCategory) -> u64 {
        self.categories.get(&c).copied().unwrap_or(0)
    }

    /// Mean time per execution, if the opcode ran in this window.
    pub fn mean_time(&self, op: Opcode) -> Option<f64> {
        let s = self.opcode(op);
        (s.count > 0).then(|| s.time_ns as f64 / s.count as f64)
    }

    pub fn micro_time_ns(&self) -> u64 {
        self.opcodes.values().map(|s| s.time_ns).sum()
    }

    pub fn micro_gas(&self) -> u64 {
        self.opcodes.values().map(|s| s.gas).sum()
    }

    pub fn add(&mut self, other: &WindowAggregate) {
        for (op, s) in &other.opcodes {
            let e = self.opcodes.entry(*op).or_default();
            e.count += s.count;
            e.gas += s.gas;
            e.time_ns += s.time_ns;
        }
        for (c, t) in &other.categories {
            *self.categories.entry(*c).or_default() += t;
        }
    }
}

/// Window start containing `height` for windows of `size` blocks.
pub fn window_of(height: u64, size: u64) -> u64 {
    height - height % size
}

/// Sums windows into coarser windows of `size` blocks.
pub fn resample(windows: &[WindowAggregate], size: u64) -> Vec<WindowAggregate> {
    let mut out: BTreeMap<u64, WindowAggregate> = BTreeMap::new();
    for w in windows {
        let start = window_of(w.window_start, size);
        out.entry(start).or_insert_with(|| WindowAggregate::new(start)).add(w);
    }
    out.into_values().collect()
}

struct Cell {
    count: AtomicU64,
    gas: AtomicU64,
    time_ns: AtomicU64,
}

impl Cell {
    fn new() -> Self {
        Cell { count: AtomicU64::new(0), gas: AtomicU64::new(0), time_ns: AtomicU64::new(0) }
    }

    fn take(&mut self) -> OpStats {
        OpStats {
            count: std::mem::take(self.count.get_mut()),
            gas: std::mem::take(self.gas.get_mut()),
            time_ns: std::mem::take(self.time_ns.get_mut()),
        }
    }
}

/// Current-window accumulator plus the archive of closed windows.
pub struct SampleSink {
    current_start: u64,
    opcodes: Box<[Cell]>,
    categories: [AtomicU64; 6],
    archive: Vec<WindowAggregate>,
}

impl Default for SampleSink {
    fn default() -> Self {
        Self::new(0)
    }
}

impl SampleSink {
    pub fn new(first_window_start: u64) -> Self {
        Self {
            current_start: first_window_start,
            opcodes: (0..256).map(|_| Cell::new()).collect(),
            categories: Default::default(),
            archive: Vec::new(),
        }
    }

    pub fn current_start(&self) -> u64 {
        self.current_start
    }

    pub fn record_span(&self, category: MacroCategory, duration_ns: u64) {
        self.categories[category.index()].fetch_add(duration_ns, Ordering::Relaxed);
    }

    pub fn record_instruction(&self, op: Opcode, gas: u64, duration_ns: u64) {
        self.record_stats(op, OpStats { count: 1, gas, time_ns: duration_ns });
    }

    pub fn record_stats(&self, op: Opcode, s: OpStats) {
        let c = &self.opcodes[op.0 as usize];
        c.count.fetch_add(s.count, Ordering::Relaxed);
        c.gas.fetch_add(s.gas, Ordering::Relaxed);
        c.time_ns.fetch_add(s.time_ns, Ordering::Relaxed);
    }

    pub fn record_table(&self, table: &OpcodeTable) {
        for (op, s) in table.iter() {
            self.record_stats(op, s);
        }
    }

    /// Freezes the current window, archives it and opens one at `next_start`.
    ///
    /// # Panics
    /// If `next_start` does not advance past the current window start.
    pub fn close_window(&mut self, next_start: u64) -> &WindowAggregate {
        assert!(
            next_start > self.current_start,
            "window {next_start} does not follow {}",
            self.current_start
        );
        let mut w = WindowAggregate::new(self.current_start);
        for (i, cell) in self.opcodes.iter_mut().enumerate() {
            let s = cell.take();
            if s.count > 0 || s.gas > 0 || s.time_ns > 0 {
                w.opcodes.insert(Opcode(i as u8), s);
            }
        }
        for c in MacroCategory::ALL {
            w.categories.insert(c, std::mem::take(self.categories[c.index()].get_mut()));
        }
        self.current_start = next_start;
        self.archive.push(w);
        self.archive.last().expect("just pushed")
    }

    pub fn archive(&self) -> &[WindowAggregate] {
        &self.archive
    }

    pub fn into_archive(self) -> Vec<WindowAggregate> {
        self.archive
    }
}
