use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use super::{MacroCategory, WindowAggregate};
use crate::evm::{OpStats, Opcode};

pub const MICRO_HEADER: [&str; 5] = ["window_start", "opcode", "count", "total_gas", "total_time_ns"];
pub const MACRO_HEADER: [&str; 3] = ["window_start", "category", "total_time_ns"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {msg}")]
    Row { line: u64, msg: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CsvError {
    /// True for malformed content, false for I/O failures.
    pub fn is_input_error(&self) -> bool {
        match self {
            CsvError::Row { .. } => true,
            CsvError::Csv(e) => !matches!(e.kind(), csv::ErrorKind::Io(_)),
            CsvError::Io(_) => false,
        }
    }
}

/// One row per (window, opcode) with a nonzero count.
pub fn write_micro<W: Write>(windows: &[WindowAggregate], out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MICRO_HEADER)?;
    for win in windows {
        for (op, s) in &win.opcodes {
            if s.count == 0 {
                continue;
            }
            w.write_record([
                win.window_start.to_string(),
                op.name().to_string(),
                s.count.to_string(),
                s.gas.to_string(),
                s.time_ns.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per (window, category), all six categories per window.
pub fn write_macro<W: Write>(windows: &[WindowAggregate], out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MACRO_HEADER)?;
    for win in windows {
        for c in MacroCategory::ALL {
            w.write_record([win.window_start.to_string(), c.name().to_string(), win.category(c).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input)
}

fn check_header<R: Read>(r: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), CsvError> {
    let h = r.headers()?.clone();
    let line = r.position().line();
    if h.iter().ne(expected.iter().copied()) {
        return Err(CsvError::Row { line, msg: format!("expected header {}", expected.join(",")) });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<T, CsvError> {
    let raw = rec.get(i).ok_or_else(|| CsvError::Row { line, msg: format!("missing {name}") })?;
    raw.parse().map_err(|_| CsvError::Row { line, msg: format!("bad {name} {raw:?}") })
}

/// Windows come back sorted by start; row order within the file is free.
pub fn read_micro<R: Read>(input: R) -> Result<Vec<WindowAggregate>, CsvError> {
    let mut r = reader(input);
    check_header(&mut r, &MICRO_HEADER)?;
    let mut out: BTreeMap<u64, WindowAggregate> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let start: u64 = field(&rec, 0, "window_start", line)?;
        let name = rec.get(1).unwrap_or("");
        let op = Opcode::from_name(name)
            .ok_or_else(|| CsvError::Row { line, msg: format!("unknown opcode {name:?}") })?;
        let s = OpStats {
            count: field(&rec, 2, "count", line)?,
            gas: field(&rec, 3, "total_gas", line)?,
            time_ns: field(&rec, 4, "total_time_ns", line)?,
        };
        if s.count == 0 && (s.gas > 0 || s.time_ns > 0) {
            return Err(CsvError::Row { line, msg: "zero count with nonzero gas or time".into() });
        }
        let w = out.entry(start).or_insert_with(|| WindowAggregate::new(start));
        if w.opcodes.insert(op, s).is_some() {
            return Err(CsvError::Row { line, msg: format!("duplicate row for {name} in window {start}") });
        }
    }
    Ok(out.into_values().collect())
}

pub fn read_macro<R: Read>(input: R) -> Result<Vec<WindowAggregate>, CsvError> {
    let mut r = reader(input);
    check_header(&mut r, &MACRO_HEADER)?;
    let mut out: BTreeMap<u64, WindowAggregate> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let start: u64 = field(&rec, 0, "window_start", line)?;
        let c: MacroCategory = field(&rec, 1, "category", line)?;
        let t: u64 = field(&rec, 2, "total_time_ns", line)?;
        let w = out.entry(start).or_insert_with(|| WindowAggregate::new(start));
        if w.categories.insert(c, t).is_some() {
            return Err(CsvError::Row { line, msg: format!("duplicate row for {c} in window {start}") });
        }
    }
    Ok(out.into_values().collect())
}
