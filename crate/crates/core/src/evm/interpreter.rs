use std::collections::BTreeMap;
use std::time::Instant;

use primitive_types::U256;
use thiserror::Error;

use super::opcode::Opcode;
use super::schedule::{GasSchedule, ResolvedSchedule};
use crate::rlp;
use crate::trie::{MemoryBackend, NodeBackend, StateTrie, TrieError};

pub const STACK_LIMIT: usize = 1024;
pub const DEFAULT_CALL_DEPTH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Success,
    OutOfGas,
    InvalidOp,
    StackError,
}

impl Status {
    pub fn is_success(self) -> bool {
        self == Status::Success
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TxError {
    #[error("gas limit {limit} below intrinsic gas {intrinsic}")]
    IntrinsicGas { limit: u64, intrinsic: u64 },
    #[error("state: {0}")]
    State(#[from] TrieError),
}

/// Accumulated `(count, gas, time)` for one opcode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpStats {
    pub count: u64,
    pub gas: u64,
    pub time_ns: u64,
}

/// Per-opcode sample totals, indexed by opcode byte.
#[derive(Clone, PartialEq, Eq)]
pub struct OpcodeTable(Box<[OpStats; 256]>);

impl Default for OpcodeTable {
    fn default() -> Self {
        OpcodeTable(Box::new([OpStats::default(); 256]))
    }
}

impl std::fmt::Debug for OpcodeTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

impl OpcodeTable {
    pub fn record(&mut self, op: Opcode, gas: u64, time_ns: u64) {
        let s = &mut self.0[op.0 as usize];
        s.count += 1;
        s.gas += gas;
        s.time_ns += time_ns;
    }

    pub fn get(&self, op: Opcode) -> OpStats {
        self.0[op.0 as usize]
    }

    pub fn get_mut(&mut self, op: Opcode) -> &mut OpStats {
        &mut self.0[op.0 as usize]
    }

    /// Opcodes with a nonzero count, in byte order.
    pub fn iter(&self) -> impl Iterator<Item = (Opcode, OpStats)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, s)| s.count > 0)
            .map(|(i, s)| (Opcode(i as u8), *s))
    }

    pub fn merge(&mut self, other: &OpcodeTable) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            a.count += b.count;
            a.gas += b.gas;
            a.time_ns += b.time_ns;
        }
    }

    pub fn total_gas(&self) -> u64 {
        self.0.iter().map(|s| s.gas).sum()
    }

    pub fn total_time_ns(&self) -> u64 {
        self.0.iter().map(|s| s.time_ns).sum()
    }

    pub fn total_count(&self) -> u64 {
        self.0.iter().map(|s| s.count).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sample {
    pub opcode: Opcode,
    pub gas: u64,
    pub time_ns: u64,
}

/// Deterministic stand-in durations derived from work done.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VirtualCosts {
    pub instruction_ns: u64,
    pub node_read_ns: u64,
    /// Charged to the EVM span per instruction but not to any sample.
    pub dispatch_ns: u64,
}

impl Default for VirtualCosts {
    fn default() -> Self {
        Self { instruction_ns: 20, node_read_ns: 250, dispatch_ns: 1 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Clock {
    /// No per-instruction timing; samples carry time 0.
    Off,
    #[default]
    Wall,
    Virtual(VirtualCosts),
}

#[derive(Clone, Debug)]
pub struct ExecConfig {
    pub clock: Clock,
    pub max_call_depth: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self { clock: Clock::Wall, max_call_depth: DEFAULT_CALL_DEPTH }
    }
}

#[derive(Clone, Debug)]
pub struct TxReceipt {
    pub status: Status,
    pub gas_limit: u64,
    pub gas_used: u64,
    pub intrinsic_gas: u64,
    pub return_data: Vec<u8>,
    pub samples: OpcodeTable,
    /// Time inside the interpreter loop of the outermost frame.
    pub evm_time_ns: u64,
}

impl TxReceipt {
    pub fn instructions(&self) -> u64 {
        self.samples.total_count()
    }
}

/// A receipt plus the storage writes to apply if it succeeded.
#[derive(Debug)]
pub struct Execution {
    pub receipt: TxReceipt,
    pub writes: Vec<([u8; 32], U256)>,
}

impl Execution {
    /// Applies writes on success. Returns the number of trie mutations.
    pub fn commit<B: NodeBackend>(&self, state: &mut StateTrie<B>) -> Result<usize, TrieError> {
        if !self.receipt.status.is_success() {
            return Ok(0);
        }
        for (slot, value) in &self.writes {
            state.insert(slot, &encode_word(value))?;
        }
        Ok(self.writes.len())
    }
}

/// Storage value bytes: RLP of the big-endian word without leading zeros.
/// Zero encodes to the empty string, which the trie treats as deletion.
pub fn encode_word(value: &U256) -> Vec<u8> {
    if value.is_zero() {
        return Vec::new();
    }
    let be = value.to_big_endian();
    let skip = be.iter().take_while(|b| **b == 0).count();
    rlp::encode_bytes(&be[skip..])
}

pub fn decode_word(stored: &[u8]) -> Result<U256, TrieError> {
    let payload = rlp::bytes_payload(stored)?;
    if payload.len() > 32 {
        return Err(TrieError::MalformedNode("storage word over 32 bytes".into()));
    }
    Ok(U256::from_big_endian(payload))
}

pub fn slot_key(slot: &U256) -> [u8; 32] {
    slot.to_big_endian()
}

/// Trie key under which contract code for `address` lives.
pub fn code_key(address: &U256) -> Vec<u8> {
    let be = address.to_big_endian();
    let mut k = b"code".to_vec();
    k.extend_from_slice(&be[12..]);
    k
}

pub fn deploy_code<B: NodeBackend>(
    state: &mut StateTrie<B>,
    address: &U256,
    code: &[u8],
) -> Result<(), TrieError> {
    state.insert(&code_key(address), code)?;
    Ok(())
}

/// Committed trie plus a journaled write overlay.
struct StorageView<'a, B: NodeBackend> {
    trie: &'a StateTrie<B>,
    writes: BTreeMap<[u8; 32], U256>,
    journal: Vec<([u8; 32], Option<U256>)>,
    reads: usize,
}

impl<'a, B: NodeBackend> StorageView<'a, B> {
    fn load(&mut self, slot: &[u8; 32]) -> Result<U256, TrieError> {
        if let Some(v) = self.writes.get(slot) {
            return Ok(*v);
        }
        let l = self.trie.lookup(slot)?;
        self.reads += l.reads;
        l.value.map_or(Ok(U256::zero()), |v| decode_word(&v))
    }

    fn store(&mut self, slot: [u8; 32], value: U256) {
        let prev = self.writes.insert(slot, value);
        self.journal.push((slot, prev));
    }

    fn code(&mut self, address: &U256) -> Result<Option<Vec<u8>>, TrieError> {
        let l = self.trie.lookup(&code_key(address))?;
        self.reads += l.reads;
        Ok(l.value)
    }

    fn checkpoint(&self) -> usize {
        self.journal.len()
    }

    fn revert(&mut self, checkpoint: usize) {
        while self.journal.len() > checkpoint {
            let (slot, prev) = self.journal.pop().expect("len checked");
            match prev {
                Some(v) => self.writes.insert(slot, v),
                None => self.writes.remove(&slot),
            };
        }
    }
}

/// Volatile state of one executive.
#[derive(Clone, Debug)]
pub struct MachineState {
    pub pc: usize,
    pub stack: Vec<U256>,
    pub memory: Vec<u8>,
    pub gas_remaining: u64,
    pub block_height: u64,
    pub depth: usize,
    code: Vec<u8>,
    jumpdests: Vec<bool>,
}

impl MachineState {
    pub fn new(code: Vec<u8>, gas: u64, block_height: u64, depth: usize) -> Self {
        let jumpdests = jumpdest_map(&code);
        Self {
            pc: 0,
            stack: Vec::with_capacity(64),
            memory: Vec::new(),
            gas_remaining: gas,
            block_height,
            depth,
            code,
            jumpdests,
        }
    }

    pub fn code(&self) -> &[u8] {
        &self.code
    }

    fn pop(&mut self) -> U256 {
        self.stack.pop().expect("stack depth checked before dispatch")
    }

    fn push(&mut self, v: U256) {
        self.stack.push(v);
    }
}

fn jumpdest_map(code: &[u8]) -> Vec<bool> {
    let mut map = vec![false; code.len()];
    let mut pc = 0;
    while pc < code.len() {
        let op = Opcode(code[pc]);
        if op == Opcode::JUMPDEST {
            map[pc] = true;
        }
        pc += 1 + op.push_size();
    }
    map
}

/// Outcome of one [`Executive::step`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Continue(Sample),
    Halt {
        /// Present when the halting instruction itself succeeded (STOP, RETURN).
        sample: Option<Sample>,
        status: Status,
        return_data: Vec<u8>,
    },
}

struct FrameResult {
    status: Status,
    gas_left: u64,
    return_data: Vec<u8>,
    loop_ns: u64,
}

enum Flow {
    Next,
    Jump(usize),
    Halt(Status, Vec<u8>),
}

/// Executes one transaction's frames against a read-only view of the state.
pub struct Executive<'a, B: NodeBackend = MemoryBackend> {
    storage: StorageView<'a, B>,
    schedule: ResolvedSchedule,
    config: &'a ExecConfig,
    samples: OpcodeTable,
    virtual_ns: u64,
}

impl<'a, B: NodeBackend> Executive<'a, B> {
    pub fn new(
        state: &'a StateTrie<B>,
        schedule: &GasSchedule,
        block_height: u64,
        config: &'a ExecConfig,
    ) -> Self {
        Self {
            storage: StorageView { trie: state, writes: BTreeMap::new(), journal: Vec::new(), reads: 0 },
            schedule: schedule.resolve(block_height),
            config,
            samples: OpcodeTable::default(),
            virtual_ns: 0,
        }
    }

    pub fn samples(&self) -> &OpcodeTable {
        &self.samples
    }

    /// Executes the instruction at `m.pc`. Gas is deducted before the
    /// instruction's effect is applied.
    pub fn step(&mut self, m: &mut MachineState) -> Result<Step, TrieError> {
        let Some(&byte) = m.code.get(m.pc) else {
            return Ok(Step::Halt { sample: None, status: Status::Success, return_data: Vec::new() });
        };
        let op = Opcode(byte);
        let Some(info) = op.info() else {
            m.gas_remaining = 0;
            return Ok(Step::Halt { sample: None, status: Status::InvalidOp, return_data: Vec::new() });
        };
        let depth = m.stack.len();
        if depth < info.inputs as usize
            || depth - info.inputs as usize + info.outputs as usize > STACK_LIMIT
        {
            m.gas_remaining = 0;
            return Ok(Step::Halt { sample: None, status: Status::StackError, return_data: Vec::new() });
        }

        let reads_before = self.storage.reads;
        let start = match self.config.clock {
            Clock::Wall => Some(Instant::now()),
            _ => None,
        };
        let gas_before = m.gas_remaining;
        let mut extra_gas = 0;
        let mut nested_ns = 0;
        let flow = self.exec(op, m, &mut extra_gas, &mut nested_ns)?;
        let time_ns = match self.config.clock {
            Clock::Off => 0,
            Clock::Wall => (start.expect("wall clock").elapsed().as_nanos() as u64).saturating_sub(nested_ns),
            Clock::Virtual(v) => {
                let reads = (self.storage.reads - reads_before) as u64;
                let t = v.instruction_ns + v.node_read_ns * reads;
                self.virtual_ns += t + v.dispatch_ns;
                t
            }
        };

        // Charged gas minus what nested frames already sampled.
        let sample_gas = |m: &MachineState| gas_before - m.gas_remaining - extra_gas;
        Ok(match flow {
            Flow::Halt(Status::Success, data) => {
                let s = Sample { opcode: op, gas: sample_gas(m), time_ns };
                self.samples.record(op, s.gas, s.time_ns);
                Step::Halt { sample: Some(s), status: Status::Success, return_data: data }
            }
            Flow::Halt(status, data) => {
                m.gas_remaining = 0;
                Step::Halt { sample: None, status, return_data: data }
            }
            Flow::Next | Flow::Jump(_) => {
                m.pc = match flow {
                    Flow::Jump(dest) => dest,
                    _ => m.pc + 1 + op.push_size(),
                };
                let s = Sample { opcode: op, gas: sample_gas(m), time_ns };
                self.samples.record(op, s.gas, s.time_ns);
                Step::Continue(s)
            }
        })
    }

    fn charge(&self, m: &mut MachineState, cost: u128) -> bool {
        if cost > m.gas_remaining as u128 {
            false
        } else {
            m.gas_remaining -= cost as u64;
            true
        }
    }

    /// Memory expansion cost to cover `[offset, offset + size)`, or `None`
    /// if the range cannot be paid for.
    fn expansion_cost(&self, m: &MachineState, offset: U256, size: U256) -> Option<(u128, usize)> {
        if size.is_zero() {
            return Some((0, m.memory.len()));
        }
        if offset.bits() > 32 || size.bits() > 32 {
            return None;
        }
        let end = offset.low_u64() + size.low_u64();
        let words = end.div_ceil(32);
        let current = (m.memory.len() / 32) as u64;
        if words <= current {
            return Some((0, m.memory.len()));
        }
        let cost = self.schedule.memory_cost(words) - self.schedule.memory_cost(current);
        Some((cost, (words * 32) as usize))
    }

    fn exec(
        &mut self,
        op: Opcode,
        m: &mut MachineState,
        extra_gas: &mut u64,
        nested_ns: &mut u64,
    ) -> Result<Flow, TrieError> {
        macro_rules! charge {
            ($cost:expr) => {
                if !self.charge(m, $cost as u128) {
                    return Ok(Flow::Halt(Status::OutOfGas, Vec::new()));
                }
            };
        }
        macro_rules! binop {
            ($f:expr) => {{
                charge!(self.schedule.cost(op));
                let a = m.pop();
                let b = m.pop();
                m.push($f(a, b));
            }};
        }
        let bool_word = |b: bool| if b { U256::one() } else { U256::zero() };

        match op {
            Opcode::STOP => {
                charge!(self.schedule.cost(op));
                return Ok(Flow::Halt(Status::Success, Vec::new()));
            }
            Opcode::ADD => binop!(|a: U256, b| a.overflowing_add(b).0),
            Opcode::MUL => binop!(|a: U256, b| a.overflowing_mul(b).0),
            Opcode::SUB => binop!(|a: U256, b| a.overflowing_sub(b).0),
            Opcode::DIV => binop!(|a: U256, b: U256| if b.is_zero() { U256::zero() } else { a / b }),
            Opcode::LT => binop!(|a, b| bool_word(a < b)),
            Opcode::GT => binop!(|a, b| bool_word(a > b)),
            Opcode::EQ => binop!(|a, b| bool_word(a == b)),
            Opcode::AND => binop!(|a, b| a & b),
            Opcode::OR => binop!(|a, b| a | b),
            Opcode::XOR => binop!(|a, b| a ^ b),
            Opcode::ISZERO => {
                charge!(self.schedule.cost(op));
                let a = m.pop();
                m.push(bool_word(a.is_zero()));
            }
            Opcode::NOT => {
                charge!(self.schedule.cost(op));
                let a = m.pop();
                m.push(!a);
            }
            Opcode::POP => {
                charge!(self.schedule.cost(op));
                m.pop();
            }
            Opcode::MLOAD | Opcode::MSTORE => {
                let offset = m.stack[m.stack.len() - 1];
                let Some((mem, new_len)) = self.expansion_cost(m, offset, U256::from(32)) else {
                    return Ok(Flow::Halt(Status::OutOfGas, Vec::new()));
                };
                charge!(self.schedule.cost(op) as u128 + mem);
                if new_len > m.memory.len() {
                    m.memory.resize(new_len, 0);
                }
                let off = m.pop().low_u64() as usize;
                if op == Opcode::MLOAD {
                    let w = U256::from_big_endian(&m.memory[off..off + 32]);
                    m.push(w);
                } else {
                    let v = m.pop();
                    m.memory[off..off + 32].copy_from_slice(&v.to_big_endian());
                }
            }
            Opcode::SLOAD => {
                charge!(self.schedule.cost(op));
                let slot = slot_key(&m.pop());
                let v = self.storage.load(&slot)?;
                m.push(v);
            }
            Opcode::SSTORE => {
                let slot = slot_key(&m.stack[m.stack.len() - 1]);
                let value = m.stack[m.stack.len() - 2];
                let current = self.storage.load(&slot)?;
                charge!(self.schedule.sstore_cost(current.is_zero(), value.is_zero()));
                m.pop();
                m.pop();
                self.storage.store(slot, value);
            }
            Opcode::JUMP => {
                charge!(self.schedule.cost(op));
                let dest = m.pop();
                return Ok(self.jump_target(m, dest));
            }
            Opcode::JUMPI => {
                charge!(self.schedule.cost(op));
                let dest = m.pop();
                let cond = m.pop();
                if !cond.is_zero() {
                    return Ok(self.jump_target(m, dest));
                }
            }
            Opcode::PC => {
                charge!(self.schedule.cost(op));
                m.push(U256::from(m.pc));
            }
            Opcode::JUMPDEST => charge!(self.schedule.cost(op)),
            Opcode::CALLCODE => return self.callcode(m, extra_gas, nested_ns),
            Opcode::RETURN => {
                let offset = m.stack[m.stack.len() - 1];
                let size = m.stack[m.stack.len() - 2];
                let Some((mem, new_len)) = self.expansion_cost(m, offset, size) else {
                    return Ok(Flow::Halt(Status::OutOfGas, Vec::new()));
                };
                charge!(self.schedule.cost(op) as u128 + mem);
                if new_len > m.memory.len() {
                    m.memory.resize(new_len, 0);
                }
                let off = m.pop().low_u64() as usize;
                let size = m.pop().low_u64() as usize;
                let data = if size == 0 { Vec::new() } else { m.memory[off..off + size].to_vec() };
                return Ok(Flow::Halt(Status::Success, data));
            }
            _ if op.push_size() > 0 => {
                charge!(self.schedule.cost(op));
                let n = op.push_size();
                let start = m.pc + 1;
                let mut buf = [0u8; 32];
                let avail = m.code.len().saturating_sub(start).min(n);
                buf[32 - n..32 - n + avail].copy_from_slice(&m.code[start..start + avail]);
                m.push(U256::from_big_endian(&buf));
            }
            _ if (Opcode::DUP1.0..=Opcode::DUP16.0).contains(&op.0) => {
                charge!(self.schedule.cost(op));
                let n = (op.0 - Opcode::DUP1.0) as usize + 1;
                let v = m.stack[m.stack.len() - n];
                m.push(v);
            }
            _ if (Opcode::SWAP1.0..=Opcode::SWAP16.0).contains(&op.0) => {
                charge!(self.schedule.cost(op));
                let n = (op.0 - Opcode::SWAP1.0) as usize + 1;
                let top = m.stack.len() - 1;
                m.stack.swap(top, top - n);
            }
            _ => return Ok(Flow::Halt(Status::InvalidOp, Vec::new())),
        }
        Ok(Flow::Next)
    }

    fn jump_target(&self, m: &MachineState, dest: U256) -> Flow {
        if dest.bits() <= 32 && m.jumpdests.get(dest.low_u64() as usize) == Some(&true) {
            Flow::Jump(dest.low_u64() as usize)
        } else {
            Flow::Halt(Status::InvalidOp, Vec::new())
        }
    }

    /// Runs the code stored at `address` in a fresh executive against the
    /// caller's storage. Gas used by the callee's instructions is sampled
    /// under those instructions; gas forfeited by a failing callee is
    /// charged to CALLCODE.
    fn callcode(
        &mut self,
        m: &mut MachineState,
        extra_gas: &mut u64,
        nested_ns: &mut u64,
    ) -> Result<Flow, TrieError> {
        let top = m.stack.len() - 1;
        let (in_off, in_size) = (m.stack[top - 3], m.stack[top - 4]);
        let (out_off, out_size) = (m.stack[top - 5], m.stack[top - 6]);
        let (Some((in_mem, in_len)), Some((out_mem, out_len))) = (
            self.expansion_cost(m, in_off, in_size),
            self.expansion_cost(m, out_off, out_size),
        ) else {
            return Ok(Flow::Halt(Status::OutOfGas, Vec::new()));
        };
        let (mem, new_len) = if out_len >= in_len { (out_mem, out_len) } else { (in_mem, in_len) };
        if !self.charge(m, self.schedule.cost(Opcode::CALLCODE) as u128 + mem) {
            return Ok(Flow::Halt(Status::OutOfGas, Vec::new()));
        }
        if new_len > m.memory.len() {
            m.memory.resize(new_len, 0);
        }
        let requested = m.pop();
        let address = m.pop();
        let _value = m.pop();
        let _ = (m.pop(), m.pop());
        let out_off = m.pop().low_u64() as usize;
        let out_size = m.pop().low_u64() as usize;

        if m.depth + 1 >= self.config.max_call_depth {
            m.push(U256::zero());
            return Ok(Flow::Next);
        }
        let Some(code) = self.storage.code(&address)? else {
            m.push(U256::one());
            return Ok(Flow::Next);
        };
        let gas = if requested.bits() > 64 { m.gas_remaining } else { requested.low_u64().min(m.gas_remaining) };
        m.gas_remaining -= gas;
        let sampled_before = self.samples.total_gas();
        let checkpoint = self.storage.checkpoint();
        let r = self.run_frame(code, gas, m.block_height, m.depth + 1)?;
        let sampled = self.samples.total_gas() - sampled_before;
        *nested_ns = r.loop_ns;
        if r.status.is_success() {
            m.gas_remaining += r.gas_left;
            *extra_gas = sampled;
            let n = out_size.min(r.return_data.len());
            m.memory[out_off..out_off + n].copy_from_slice(&r.return_data[..n]);
            m.push(U256::one());
        } else {
            self.storage.revert(checkpoint);
            *extra_gas = sampled;
            m.push(U256::zero());
        }
        Ok(Flow::Next)
    }

    fn run_frame(
        &mut self,
        code: Vec<u8>,
        gas: u64,
        block_height: u64,
        depth: usize,
    ) -> Result<FrameResult, TrieError> {
        let mut m = MachineState::new(code, gas, block_height, depth);
        let virtual_before = self.virtual_ns;
        let start = Instant::now();
        let (status, return_data) = loop {
            if let Step::Halt { status, return_data, .. } = self.step(&mut m)? {
                break (status, return_data);
            }
        };
        let loop_ns = match self.config.clock {
            Clock::Virtual(_) => self.virtual_ns - virtual_before,
            _ => start.elapsed().as_nanos() as u64,
        };
        let gas_left = if status.is_success() { m.gas_remaining } else { 0 };
        Ok(FrameResult { status, gas_left, return_data, loop_ns })
    }

    /// Runs `code` as a transaction body with `gas` available after
    /// intrinsic gas. Storage writes are returned, not applied.
    fn run_transaction(mut self, code: &[u8], gas_limit: u64, block_height: u64) -> Result<Execution, TrieError> {
        let intrinsic = self.schedule.intrinsic;
        let r = self.run_frame(code.to_vec(), gas_limit - intrinsic, block_height, 0)?;
        let writes = if r.status.is_success() {
            self.storage.writes.into_iter().collect()
        } else {
            Vec::new()
        };
        Ok(Execution {
            receipt: TxReceipt {
                status: r.status,
                gas_limit,
                gas_used: gas_limit - r.gas_left,
                intrinsic_gas: intrinsic,
                return_data: r.return_data,
                samples: self.samples,
                evm_time_ns: r.loop_ns,
            },
            writes,
        })
    }
}

/// Executes without touching `state`; apply the result with
/// [`Execution::commit`].
pub fn run_transaction<B: NodeBackend>(
    code: &[u8],
    state: &StateTrie<B>,
    gas_limit: u64,
    block_height: u64,
    schedule: &GasSchedule,
    config: &ExecConfig,
) -> Result<Execution, TxError> {
    if gas_limit < schedule.intrinsic {
        return Err(TxError::IntrinsicGas { limit: gas_limit, intrinsic: schedule.intrinsic });
    }
    let exec = Executive::new(state, schedule, block_height, config);
    Ok(exec.run_transaction(code, gas_limit, block_height)?)
}

/// Executes and, on success, commits storage writes to `state`.
pub fn execute_transaction<B: NodeBackend>(
    code: &[u8],
    state: &mut StateTrie<B>,
    gas_limit: u64,
    block_height: u64,
    schedule: &GasSchedule,
    config: &ExecConfig,
) -> Result<TxReceipt, TxError> {
    let exec = run_transaction(code, state, gas_limit, block_height, schedule, config)?;
    exec.commit(state)?;
    Ok(exec.receipt)
}
