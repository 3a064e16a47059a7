use std::collections::BTreeMap;

use primitive_types::U256;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::evm::{Assembler, Opcode};
use crate::keccak256;
use crate::rlp;
use crate::trie::RootHash;

/// Address the shared library contract for CALLCODE is deployed at.
pub const LIBRARY_ADDRESS: u64 = 0xca11;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("workload parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("workload: {0}")]
    Invalid(String),
}

/// Synthetic workload description, read from TOML.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    #[serde(default)]
    pub name: String,
    pub txs_per_block: usize,
    /// Mix instructions per transaction, not counting operand pushes and pops.
    pub tx_length: usize,
    /// Opcode name to frequency; must sum to 1.
    pub mix: BTreeMap<String, f64>,
    /// Fraction of each block's SSTOREs that write a never-used slot.
    #[serde(default)]
    pub fresh_key_rate: f64,
    /// Slots populated before block 0.
    #[serde(default = "default_initial_keys")]
    pub initial_keys: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gas_limit")]
    pub gas_limit: u64,
    #[serde(default = "default_gas_price")]
    pub gas_price: u64,
}

fn default_initial_keys() -> u64 {
    1024
}

fn default_gas_limit() -> u64 {
    8_000_000
}

fn default_gas_price() -> u64 {
    20_000_000_000
}

impl WorkloadSpec {
    pub fn parse(text: &str) -> Result<Self, WorkloadError> {
        let spec: WorkloadSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: String| Err(WorkloadError::Invalid(m));
        if self.mix.is_empty() {
            return bad("empty mix".into());
        }
        let mut sum = 0.0;
        for (name, f) in &self.mix {
            let op = Opcode::from_name(name).ok_or_else(|| WorkloadError::Invalid(format!("unknown opcode {name}")))?;
            if matches!(op, Opcode::STOP | Opcode::RETURN) {
                return bad(format!("{name} cannot appear in a mix"));
            }
            if !(f.is_finite() && *f >= 0.0) {
                return bad(format!("frequency of {name} is {f}"));
            }
            sum += f;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("frequencies sum to {sum}"));
        }
        if !(0.0..=1.0).contains(&self.fresh_key_rate) {
            return bad(format!("fresh_key_rate {} outside [0, 1]", self.fresh_key_rate));
        }
        if self.tx_length == 0 {
            return bad("tx_length must be positive".into());
        }
        let touches_storage = self.counts().iter().any(|(op, n)| *n > 0 && matches!(*op, Opcode::SLOAD | Opcode::SSTORE));
        if touches_storage && self.initial_keys == 0 {
            return bad("storage opcodes need initial_keys >= 1".into());
        }
        Ok(())
    }

    /// Per-transaction mix counts by largest remainder; they sum to `tx_length`.
    pub fn counts(&self) -> Vec<(Opcode, usize)> {
        let mut rows: Vec<(Opcode, usize, f64)> = self
            .mix
            .iter()
            .filter_map(|(name, f)| {
                let exact = f * self.tx_length as f64;
                Opcode::from_name(name).map(|op| (op, exact.floor() as usize, exact - exact.floor()))
            })
            .collect();
        let assigned: usize = rows.iter().map(|r| r.1).sum();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|a, b| rows[*b].2.total_cmp(&rows[*a].2).then(rows[*a].0.cmp(&rows[*b].0)));
        for i in order.into_iter().take(self.tx_length.saturating_sub(assigned)) {
            rows[i].1 += 1;
        }
        rows.into_iter().map(|(op, n, _)| (op, n)).collect()
    }

    pub fn sstores_per_block(&self) -> u64 {
        let per_tx = self.counts().iter().find(|(op, _)| *op == Opcode::SSTORE).map_or(0, |c| c.1);
        (per_tx * self.txs_per_block) as u64
    }

    /// Fresh slots written in blocks `0..height`.
    pub fn fresh_before(&self, height: u64) -> u64 {
        (self.fresh_key_rate * self.sstores_per_block() as f64 * height as f64).floor() as u64
    }

    pub fn uses_library(&self) -> bool {
        self.counts().iter().any(|(op, n)| *op == Opcode::CALLCODE && *n > 0)
    }

    /// Keys present before block 0, including deployed code.
    pub fn genesis_keys(&self) -> u64 {
        self.initial_keys + u64::from(self.uses_library())
    }

    /// Trie key count after `blocks` blocks when every transaction succeeds.
    pub fn expected_keys(&self, blocks: u64) -> u64 {
        self.genesis_keys() + self.fresh_before(blocks)
    }
}

/// Code of the library contract reached through CALLCODE.
pub fn library_code() -> Vec<u8> {
    Assembler::new().push(1u64).push(2u64).op(Opcode::ADD).op(Opcode::POP).op(Opcode::STOP).build()
}

/// Initial slot value for slot `i`; never zero.
pub fn initial_value(i: u64) -> U256 {
    U256::from(i) + U256::one()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub code: Vec<u8>,
    pub gas_limit: u64,
    pub gas_price: u64,
}

impl Transaction {
    pub fn encode(&self) -> Vec<u8> {
        let fields = [
            rlp::encode_bytes(&self.code),
            rlp::encode_bytes(&trim(self.gas_limit)),
            rlp::encode_bytes(&trim(self.gas_price)),
        ];
        rlp::encode_list_raw(fields.iter().map(Vec::as_slice))
    }
}

fn trim(v: u64) -> Vec<u8> {
    let be = v.to_be_bytes();
    be[be.iter().take_while(|b| **b == 0).count()..].to_vec()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub transactions: Vec<Transaction>,
    /// Keccak of the RLP list of transaction encodings.
    pub tx_root: [u8; 32],
    /// Filled in by the importer.
    pub parent_root: Option<RootHash>,
    pub post_root: Option<RootHash>,
}

pub fn tx_root(txs: &[Transaction]) -> [u8; 32] {
    let enc: Vec<Vec<u8>> = txs.iter().map(Transaction::encode).collect();
    keccak256(&rlp::encode_list_raw(enc.iter().map(Vec::as_slice)))
}

fn block_rng(seed: u64, height: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(height);
    rng
}

/// Builds block `height`. Depends only on `(spec, height)`.
pub fn generate_block(spec: &WorkloadSpec, height: u64) -> Block {
    let mut rng = block_rng(spec.seed, height);
    let counts = spec.counts();
    let existing = spec.initial_keys + spec.fresh_before(height);
    let mut next_fresh = existing;
    let fresh_end = spec.initial_keys + spec.fresh_before(height + 1);

    let mut txs = Vec::with_capacity(spec.txs_per_block);
    for _ in 0..spec.txs_per_block {
        let mut ops: Vec<Opcode> = counts.iter().flat_map(|(op, n)| std::iter::repeat_n(*op, *n)).collect();
        ops.shuffle(&mut rng);
        let mut asm = Assembler::new();
        for op in ops {
            emit(&mut asm, op, &mut rng, existing, &mut next_fresh, fresh_end);
        }
        asm.op(Opcode::STOP);
        txs.push(Transaction { code: asm.build(), gas_limit: spec.gas_limit, gas_price: spec.gas_price });
    }
    let tx_root = tx_root(&txs);
    Block { height, transactions: txs, tx_root, parent_root: None, post_root: None }
}

fn small(rng: &mut ChaCha8Rng) -> u64 {
    rng.random_range(1..=255)
}

/// Emits `op` with the operands it needs and pops whatever it leaves.
fn emit(asm: &mut Assembler, op: Opcode, rng: &mut ChaCha8Rng, existing: u64, next_fresh: &mut u64, fresh_end: u64) {
    match op {
        Opcode::SLOAD => {
            asm.push(rng.random_range(0..existing)).op(op).op(Opcode::POP);
        }
        Opcode::SSTORE => {
            let slot = if *next_fresh < fresh_end {
                *next_fresh += 1;
                *next_fresh - 1
            } else {
                rng.random_range(0..existing)
            };
            asm.push(rng.random::<u32>() as u64 | 1).push(slot).op(op);
        }
        Opcode::MSTORE => {
            asm.push(small(rng)).push(32 * rng.random_range(0..32u64)).op(op);
        }
        Opcode::MLOAD => {
            asm.push(32 * rng.random_range(0..32u64)).op(op).op(Opcode::POP);
        }
        Opcode::JUMP => {
            let dest = asm.len() + 4;
            asm.push_n(2, U256::from(dest)).op(op).op(Opcode::JUMPDEST);
        }
        Opcode::JUMPI => {
            let dest = asm.len() + 6;
            asm.push(1u64).push_n(2, U256::from(dest)).op(op).op(Opcode::JUMPDEST);
        }
        Opcode::JUMPDEST => {
            asm.op(op);
        }
        Opcode::POP => {
            asm.push(small(rng)).op(op);
        }
        Opcode::PC => {
            asm.op(op).op(Opcode::POP);
        }
        Opcode::CALLCODE => {
            // gas, address, value, in offset, in size, out offset, out size
            for _ in 0..5 {
                asm.push(0u64);
            }
            asm.push(LIBRARY_ADDRESS).push(100_000u64).op(op).op(Opcode::POP);
        }
        _ if op.push_size() > 0 => {
            let n = op.push_size();
            let mut bytes = vec![0u8; n];
            rng.fill(bytes.as_mut_slice());
            asm.push_n(n, U256::from_big_endian(&bytes)).op(Opcode::POP);
        }
        _ => {
            let info = op.info().expect("validated opcode");
            for _ in 0..info.inputs {
                asm.push(small(rng));
            }
            asm.op(op);
            for _ in 0..info.outputs {
                asm.op(Opcode::POP);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> WorkloadSpec {
        WorkloadSpec::parse(
            r#"
            txs_per_block = 3
            tx_length = 10
            fresh_key_rate = 0.5
            initial_keys = 8
            seed = 11
            [mix]
            SLOAD = 0.35
            SSTORE = 0.2
            ADD = 0.25
            PUSH1 = 0.2
            "#,
        )
        .unwrap()
    }

    #[test]
    fn largest_remainder_counts() {
        let c: BTreeMap<_, _> = spec().counts().into_iter().collect();
        assert_eq!(c.values().sum::<usize>(), 10);
        assert_eq!(c[&Opcode::SSTORE], 2);
        assert_eq!(c[&Opcode::ADD] + c[&Opcode::SLOAD], 6);
    }

    #[test]
    fn fresh_key_arithmetic() {
        let s = spec();
        assert_eq!(s.sstores_per_block(), 6);
        assert_eq!(s.fresh_before(10), 30);
        assert_eq!(s.expected_keys(10), 38);
    }

    #[test]
    fn blocks_are_deterministic() {
        let s = spec();
        assert_eq!(generate_block(&s, 7), generate_block(&s, 7));
        assert_ne!(generate_block(&s, 7).tx_root, generate_block(&s, 8).tx_root);
    }

    #[test]
    fn validation() {
        let mut s = spec();
        s.mix.insert("MUL".into(), 0.1);
        assert!(s.validate().is_err());
        let mut s = spec();
        s.fresh_key_rate = 1.5;
        assert!(s.validate().is_err());
        assert!(WorkloadSpec::parse("txs_per_block = 1\ntx_length = 1\n[mix]\nBOGUS = 1.0\n").is_err());
        assert!(WorkloadSpec::parse("txs_per_block = 1\ntx_length = 1\n[mix]\nSTOP = 1.0\n").is_err());
    }
}
