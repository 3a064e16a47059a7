//! Mini-EVM: opcode table, gas schedules and the interpreter.

pub mod bytecode;
pub mod interpreter;
pub mod opcode;
pub mod schedule;

pub use bytecode::{assemble, disassemble, parse_hex, Assembler, BytecodeError};
pub use interpreter::{
    code_key, decode_word, deploy_code, encode_word, execute_transaction, run_transaction,
    slot_key, Clock, ExecConfig, Execution, Executive, MachineState, OpStats, OpcodeTable, Sample,
    Status, Step, TxError, TxReceipt, VirtualCosts,
};
pub use opcode::Opcode;
pub use schedule::{GasRule, GasSchedule, ResolvedSchedule, ScheduleError};
