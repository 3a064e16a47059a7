//! Fee schedules and their text format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::opcode::{self, Opcode};

pub const DEFAULT_INTRINSIC_GAS: u64 = 21_000;

const DEFAULT_SCHEDULE: &str = include_str!("../../schedules/default.gas");

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown opcode {name}")]
    UnknownOpcode { line: usize, name: String },
    #[error("line {line}: duplicate rule for {name}")]
    Duplicate { line: usize, name: String },
    #[error("no gas rule for {0}")]
    MissingRule(Opcode),
    #[error("{0} must cost at least 1 gas")]
    ZeroCost(Opcode),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GasRule {
    Constant(u64),
    /// Storage write tiers: zero to nonzero, nonzero to nonzero, nonzero to zero.
    Sstore { set: u64, reset: u64, clear: u64 },
    /// `c0 + c1 n + c2 n^2 + ...` in block height `n`, materialized with
    /// round-half-up and a floor of 1.
    Polynomial(Vec<f64>),
}

impl GasRule {
    pub fn at_height(&self, height: u64) -> u64 {
        match self {
            GasRule::Constant(c) => *c,
            GasRule::Sstore { reset, .. } => *reset,
            GasRule::Polynomial(c) => materialize_gas(eval_poly(c, height as f64)),
        }
    }
}

pub fn eval_poly(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Real-valued gas to an integer charge: round half up, never below 1.
pub fn materialize_gas(value: f64) -> u64 {
    let rounded = (value + 0.5).floor();
    if rounded.is_nan() || rounded < 1.0 {
        1
    } else if rounded >= u64::MAX as f64 {
        u64::MAX
    } else {
        rounded as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GasSchedule {
    pub intrinsic: u64,
    pub memory_word: u64,
    pub memory_quad_divisor: u64,
    rules: BTreeMap<Opcode, GasRule>,
    /// Height at which a proposed schedule was materialized, if any.
    pub materialized_at: Option<u64>,
}

impl GasSchedule {
    /// The checked-in default schedule.
    pub fn default_schedule() -> Self {
        Self::parse(DEFAULT_SCHEDULE).expect("checked-in default schedule is valid")
    }

    pub fn rule(&self, op: Opcode) -> Option<&GasRule> {
        self.rules.get(&op)
    }

    pub fn set_rule(&mut self, op: Opcode, rule: GasRule) {
        self.rules.insert(op, rule);
    }

    pub fn rules(&self) -> impl Iterator<Item = (Opcode, &GasRule)> {
        self.rules.iter().map(|(o, r)| (*o, r))
    }

    /// Parses and validates: every implemented opcode needs exactly one
    /// rule, and every constant rule for a non-halting opcode must be >= 1.
    pub fn parse(text: &str) -> Result<Self, ScheduleError> {
        let mut s = GasSchedule {
            intrinsic: DEFAULT_INTRINSIC_GAS,
            memory_word: 3,
            memory_quad_divisor: 512,
            rules: BTreeMap::new(),
            materialized_at: None,
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ScheduleError::Parse {
                line,
                msg: format!("expected NAME = RULE, got {body:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| {
                v.parse::<u64>().map_err(|e| ScheduleError::Parse { line, msg: format!("{v:?}: {e}") })
            };
            match key {
                "intrinsic" => s.intrinsic = int(value)?,
                "memory_word" => s.memory_word = int(value)?,
                "memory_quad_divisor" => {
                    s.memory_quad_divisor = int(value)?;
                    if s.memory_quad_divisor == 0 {
                        return Err(ScheduleError::Parse { line, msg: "divisor must be > 0".into() });
                    }
                }
                "@height" => s.materialized_at = Some(int(value)?),
                name => {
                    let op = Opcode::from_name(name).ok_or_else(|| ScheduleError::UnknownOpcode {
                        line,
                        name: name.to_string(),
                    })?;
                    let rule = parse_rule(value, line)?;
                    if s.rules.insert(op, rule).is_some() {
                        return Err(ScheduleError::Duplicate { line, name: name.to_string() });
                    }
                }
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        for op in opcode::all() {
            let rule = self.rules.get(&op).ok_or(ScheduleError::MissingRule(op))?;
            let halting = matches!(op, Opcode::STOP | Opcode::RETURN);
            let zero = match rule {
                GasRule::Constant(c) => *c == 0,
                GasRule::Sstore { set, reset, clear } => *set == 0 || *reset == 0 || *clear == 0,
                GasRule::Polynomial(_) => false,
            };
            if zero && !halting {
                return Err(ScheduleError::ZeroCost(op));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(h) = self.materialized_at {
            let _ = writeln!(out, "@height = {h}");
        }
        let _ = writeln!(out, "intrinsic = {}", self.intrinsic);
        let _ = writeln!(out, "memory_word = {}", self.memory_word);
        let _ = writeln!(out, "memory_quad_divisor = {}", self.memory_quad_divisor);
        for (op, rule) in &self.rules {
            let _ = match rule {
                GasRule::Constant(c) => writeln!(out, "{op} = {c}"),
                GasRule::Sstore { set, reset, clear } => {
                    writeln!(out, "{op} = sstore set={set} reset={reset} clear={clear}")
                }
                GasRule::Polynomial(cs) => {
                    let terms: Vec<String> = cs.iter().map(|c| format!("{c:?}")).collect();
                    writeln!(out, "{op} = poly {}", terms.join(" "))
                }
            };
        }
        out
    }

    /// Replaces every polynomial rule with its integer value at `height`.
    pub fn materialize(&self, height: u64) -> GasSchedule {
        let mut out = self.clone();
        for rule in out.rules.values_mut() {
            if let GasRule::Polynomial(_) = rule {
                *rule = GasRule::Constant(rule.at_height(height));
            }
        }
        out.materialized_at = Some(height);
        out
    }

    /// Flat cost table for execution at one block height.
    pub fn resolve(&self, height: u64) -> ResolvedSchedule {
        let mut costs = [0u64; 256];
        let mut sstore = None;
        for (op, rule) in &self.rules {
            costs[op.0 as usize] = rule.at_height(height);
            if let (Opcode::SSTORE, GasRule::Sstore { set, reset, clear }) = (*op, rule) {
                sstore = Some(SstoreTiers { set: *set, reset: *reset, clear: *clear });
            }
        }
        ResolvedSchedule {
            costs,
            sstore,
            memory_word: self.memory_word,
            memory_quad_divisor: self.memory_quad_divisor,
            intrinsic: self.intrinsic,
        }
    }
}

fn parse_rule(value: &str, line: usize) -> Result<GasRule, ScheduleError> {
    let err = |msg: String| ScheduleError::Parse { line, msg };
    let mut words = value.split_whitespace();
    match words.next() {
        Some("sstore") => {
            let (mut set, mut reset, mut clear) = (None, None, None);
            for w in words {
                let (k, v) = w.split_once('=').ok_or_else(|| err(format!("bad tier {w:?}")))?;
                let v: u64 = v.parse().map_err(|e| err(format!("{w:?}: {e}")))?;
                match k {
                    "set" => set = Some(v),
                    "reset" => reset = Some(v),
                    "clear" => clear = Some(v),
                    _ => return Err(err(format!("unknown tier {k:?}"))),
                }
            }
            match (set, reset, clear) {
                (Some(set), Some(reset), Some(clear)) => Ok(GasRule::Sstore { set, reset, clear }),
                _ => Err(err("sstore needs set=, reset= and clear=".into())),
            }
        }
        Some("poly") => {
            let cs = words
                .map(|w| w.parse::<f64>().map_err(|e| err(format!("{w:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if cs.is_empty() || cs.iter().any(|c| !c.is_finite()) {
                return Err(err("poly needs finite coefficients".into()));
            }
            Ok(GasRule::Polynomial(cs))
        }
        Some(v) if words.next().is_none() => v
            .parse::<u64>()
            .map(GasRule::Constant)
            .map_err(|e| err(format!("{v:?}: {e}"))),
        _ => Err(err(format!("cannot parse rule {value:?}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SstoreTiers {
    pub set: u64,
    pub reset: u64,
    pub clear: u64,
}

/// A schedule flattened for one block height.
#[derive(Clone, Debug)]
pub struct ResolvedSchedule {
    pub costs: [u64; 256],
    /// `None` when SSTORE has a flat (e.g. polynomial) rule.
    pub sstore: Option<SstoreTiers>,
    pub memory_word: u64,
    pub memory_quad_divisor: u64,
    pub intrinsic: u64,
}

impl ResolvedSchedule {
    pub fn cost(&self, op: Opcode) -> u64 {
        self.costs[op.0 as usize]
    }

    pub fn sstore_cost(&self, current_is_zero: bool, new_is_zero: bool) -> u64 {
        match self.sstore {
            None => self.cost(Opcode::SSTORE),
            Some(t) => match (current_is_zero, new_is_zero) {
                (true, false) => t.set,
                (false, true) => t.clear,
                _ => t.reset,
            },
        }
    }

    /// Total memory cost for `words` 32-byte words.
    pub fn memory_cost(&self, words: u64) -> u128 {
        let w = words as u128;
        w * self.memory_word as u128 + w * w / self.memory_quad_divisor as u128
    }
}
