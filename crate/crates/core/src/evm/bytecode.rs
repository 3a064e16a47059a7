use primitive_types::U256;
use thiserror::Error;

use super::opcode::Opcode;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BytecodeError {
    #[error("line {line}: {msg}")]
    Hex { line: usize, msg: String },
    #[error("token {index}: unknown mnemonic {token}")]
    Mnemonic { index: usize, token: String },
    #[error("token {index}: {msg}")]
    Immediate { index: usize, msg: String },
}

/// Parses hex bytecode. `#` starts a comment; whitespace and an optional
/// `0x` prefix per line are ignored.
pub fn parse_hex(text: &str) -> Result<Vec<u8>, BytecodeError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let digits: String = line.split_whitespace().collect();
        let digits = digits.strip_prefix("0x").unwrap_or(&digits);
        if digits.len() % 2 != 0 {
            return Err(BytecodeError::Hex { line: i + 1, msg: "odd number of hex digits".into() });
        }
        let mut bytes = (0..digits.len())
            .step_by(2)
            .map(|j| u8::from_str_radix(&digits[j..j + 2], 16))
            .collect::<Result<Vec<u8>, _>>()
            .map_err(|e| BytecodeError::Hex { line: i + 1, msg: e.to_string() })?;
        out.append(&mut bytes);
    }
    Ok(out)
}

pub fn to_hex(code: &[u8]) -> String {
    code.iter().map(|b| format!("{b:02x}")).collect()
}

/// Assembles whitespace-separated mnemonics. A PUSHn takes the next token
/// as its immediate, in hex (`0x..`) or decimal.
pub fn assemble(text: &str) -> Result<Vec<u8>, BytecodeError> {
    let mut asm = Assembler::new();
    let mut tokens = text
        .lines()
        .flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace())
        .enumerate();
    while let Some((index, tok)) = tokens.next() {
        let op = Opcode::from_name(tok)
            .ok_or_else(|| BytecodeError::Mnemonic { index, token: tok.to_string() })?;
        let n = op.push_size();
        if n == 0 {
            asm.op(op);
            continue;
        }
        let (index, imm) = tokens
            .next()
            .ok_or(BytecodeError::Immediate { index, msg: format!("{tok} needs an immediate") })?;
        let parsed = match imm.strip_prefix("0x") {
            Some(h) => U256::from_str_radix(h, 16).ok(),
            None => U256::from_dec_str(imm).ok(),
        };
        let value =
            parsed.ok_or_else(|| BytecodeError::Immediate { index, msg: format!("bad immediate {imm}") })?;
        if value.bits() > n * 8 {
            return Err(BytecodeError::Immediate { index, msg: format!("{imm} does not fit {tok}") });
        }
        asm.push_n(n, value);
    }
    Ok(asm.build())
}

/// One mnemonic per instruction, immediates in hex.
pub fn disassemble(code: &[u8]) -> Vec<String> {
    let mut out = Vec::new();
    let mut pc = 0;
    while pc < code.len() {
        let op = Opcode(code[pc]);
        let n = op.push_size();
        if n > 0 {
            let end = (pc + 1 + n).min(code.len());
            out.push(format!("{} 0x{}", op.name(), to_hex(&code[pc + 1..end])));
        } else {
            out.push(op.to_string());
        }
        pc += 1 + n;
    }
    out
}

/// Bytecode builder.
#[derive(Clone, Debug, Default)]
pub struct Assembler {
    code: Vec<u8>,
}

impl Assembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn op(&mut self, op: Opcode) -> &mut Self {
        self.code.push(op.0);
        self
    }

    /// Pushes with the narrowest PUSHn that fits (PUSH1 for zero).
    pub fn push(&mut self, value: impl Into<U256>) -> &mut Self {
        let v = value.into();
        let n = v.bits().div_ceil(8).max(1);
        self.push_n(n, v)
    }

    pub fn push_n(&mut self, n: usize, value: U256) -> &mut Self {
        assert!((1..=32).contains(&n) && value.bits() <= n * 8, "immediate does not fit PUSH{n}");
        self.code.push(Opcode::push(n as u8).0);
        let be = value.to_big_endian();
        self.code.extend_from_slice(&be[32 - n..]);
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.code.extend_from_slice(bytes);
        self
    }

    pub fn build(&self) -> Vec<u8> {
        self.code.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_with_comments() {
        let code = parse_hex("# add\n0x6001 6002 # push\n01\n").unwrap();
        assert_eq!(code, vec![0x60, 1, 0x60, 2, 1]);
        assert!(matches!(parse_hex("600"), Err(BytecodeError::Hex { line: 1, .. })));
        assert!(matches!(parse_hex("00\nzz"), Err(BytecodeError::Hex { line: 2, .. })));
    }

    #[test]
    fn assemble_round_trip() {
        let code = assemble("PUSH1 0x05 PUSH2 300 ADD STOP").unwrap();
        assert_eq!(code, vec![0x60, 5, 0x61, 0x01, 0x2c, 0x01, 0x00]);
        assert_eq!(disassemble(&code), ["PUSH1 0x05", "PUSH2 0x012c", "ADD", "STOP"]);
        assert!(assemble("PUSH1 256").is_err());
        assert!(assemble("FOO").is_err());
        assert!(assemble("PUSH1").is_err());
    }

    #[test]
    fn builder_picks_narrow_push() {
        let code = Assembler::new().push(0u64).push(0x1234u64).op(Opcode::ADD).build();
        assert_eq!(code, vec![0x60, 0, 0x61, 0x12, 0x34, 0x01]);
    }
}
