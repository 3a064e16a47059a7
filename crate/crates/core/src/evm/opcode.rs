use std::fmt;

/// One EVM opcode byte. Only bytes for which [`Opcode::info`] returns
/// `Some` are executable.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Opcode(pub u8);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpInfo {
    pub name: &'static str,
    pub inputs: u8,
    pub outputs: u8,
}

impl Opcode {
    pub const STOP: Opcode = Opcode(0x00);
    pub const ADD: Opcode = Opcode(0x01);
    pub const MUL: Opcode = Opcode(0x02);
    pub const SUB: Opcode = Opcode(0x03);
    pub const DIV: Opcode = Opcode(0x04);
    pub const LT: Opcode = Opcode(0x10);
    pub const GT: Opcode = Opcode(0x11);
    pub const EQ: Opcode = Opcode(0x14);
    pub const ISZERO: Opcode = Opcode(0x15);
    pub const AND: Opcode = Opcode(0x16);
    pub const OR: Opcode = Opcode(0x17);
    pub const XOR: Opcode = Opcode(0x18);
    pub const NOT: Opcode = Opcode(0x19);
    pub const POP: Opcode = Opcode(0x50);
    pub const MLOAD: Opcode = Opcode(0x51);
    pub const MSTORE: Opcode = Opcode(0x52);
    pub const SLOAD: Opcode = Opcode(0x54);
    pub const SSTORE: Opcode = Opcode(0x55);
    pub const JUMP: Opcode = Opcode(0x56);
    pub const JUMPI: Opcode = Opcode(0x57);
    pub const PC: Opcode = Opcode(0x58);
    pub const JUMPDEST: Opcode = Opcode(0x5b);
    pub const PUSH1: Opcode = Opcode(0x60);
    pub const PUSH32: Opcode = Opcode(0x7f);
    pub const DUP1: Opcode = Opcode(0x80);
    pub const DUP16: Opcode = Opcode(0x8f);
    pub const SWAP1: Opcode = Opcode(0x90);
    pub const SWAP16: Opcode = Opcode(0x9f);
    pub const CALLCODE: Opcode = Opcode(0xf2);
    pub const RETURN: Opcode = Opcode(0xf3);

    pub fn push(n: u8) -> Opcode {
        assert!((1..=32).contains(&n), "PUSH{n} out of range");
        Opcode(0x5f + n)
    }

    pub fn dup(n: u8) -> Opcode {
        assert!((1..=16).contains(&n), "DUP{n} out of range");
        Opcode(0x7f + n)
    }

    pub fn swap(n: u8) -> Opcode {
        assert!((1..=16).contains(&n), "SWAP{n} out of range");
        Opcode(0x8f + n)
    }

    pub fn byte(self) -> u8 {
        self.0
    }

    /// Immediate bytes following a PUSH.
    pub fn push_size(self) -> usize {
        if (0x60..=0x7f).contains(&self.0) {
            (self.0 - 0x5f) as usize
        } else {
            0
        }
    }

    pub fn info(self) -> Option<&'static OpInfo> {
        INFO[self.0 as usize].as_ref()
    }

    pub fn is_defined(self) -> bool {
        INFO[self.0 as usize].is_some()
    }

    pub fn name(self) -> &'static str {
        self.info().map_or("INVALID", |i| i.name)
    }

    pub fn from_name(name: &str) -> Option<Opcode> {
        all().find(|op| op.name() == name)
    }

    pub fn touches_memory(self) -> bool {
        matches!(self, Opcode::MLOAD | Opcode::MSTORE | Opcode::RETURN | Opcode::CALLCODE)
    }
}

/// Every implemented opcode in byte order.
pub fn all() -> impl Iterator<Item = Opcode> {
    (0u16..=255).map(|b| Opcode(b as u8)).filter(|op| op.is_defined())
}

impl fmt::Debug for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.info() {
            Some(i) => f.write_str(i.name),
            None => write!(f, "INVALID(0x{:02x})", self.0),
        }
    }
}

impl serde::Serialize for Opcode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

const PUSH_NAMES: [&str; 32] = [
    "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9", "PUSH10",
    "PUSH11", "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19",
    "PUSH20", "PUSH21", "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28",
    "PUSH29", "PUSH30", "PUSH31", "PUSH32",
];
const DUP_NAMES: [&str; 16] = [
    "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9", "DUP10", "DUP11",
    "DUP12", "DUP13", "DUP14", "DUP15", "DUP16",
];
const SWAP_NAMES: [&str; 16] = [
    "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8", "SWAP9", "SWAP10",
    "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15", "SWAP16",
];

static INFO: [Option<OpInfo>; 256] = build_table();

const fn op(name: &'static str, inputs: u8, outputs: u8) -> Option<OpInfo> {
    Some(OpInfo { name, inputs, outputs })
}

const fn build_table() -> [Option<OpInfo>; 256] {
    let mut t: [Option<OpInfo>; 256] = [None; 256];
    t[0x00] = op("STOP", 0, 0);
    t[0x01] = op("ADD", 2, 1);
    t[0x02] = op("MUL", 2, 1);
    t[0x03] = op("SUB", 2, 1);
    t[0x04] = op("DIV", 2, 1);
    t[0x10] = op("LT", 2, 1);
    t[0x11] = op("GT", 2, 1);
    t[0x14] = op("EQ", 2, 1);
    t[0x15] = op("ISZERO", 1, 1);
    t[0x16] = op("AND", 2, 1);
    t[0x17] = op("OR", 2, 1);
    t[0x18] = op("XOR", 2, 1);
    t[0x19] = op("NOT", 1, 1);
    t[0x50] = op("POP", 1, 0);
    t[0x51] = op("MLOAD", 1, 1);
    t[0x52] = op("MSTORE", 2, 0);
    t[0x54] = op("SLOAD", 1, 1);
    t[0x55] = op("SSTORE", 2, 0);
    t[0x56] = op("JUMP", 1, 0);
    t[0x57] = op("JUMPI", 2, 0);
    t[0x58] = op("PC", 0, 1);
    t[0x5b] = op("JUMPDEST", 0, 0);
    let mut i = 0;
    while i < 32 {
        t[0x60 + i] = op(PUSH_NAMES[i], 0, 1);
        i += 1;
    }
    let mut i = 0;
    while i < 16 {
        t[0x80 + i] = op(DUP_NAMES[i], i as u8 + 1, i as u8 + 2);
        t[0x90 + i] = op(SWAP_NAMES[i], i as u8 + 2, i as u8 + 2);
        i += 1;
    }
    t[0xf2] = op("CALLCODE", 7, 1);
    t[0xf3] = op("RETURN", 2, 0);
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for op in all() {
            assert_eq!(Opcode::from_name(op.name()), Some(op));
        }
        assert_eq!(all().count(), 22 + 32 + 16 + 16 + 2);
    }

    #[test]
    fn push_helpers() {
        assert_eq!(Opcode::push(1), Opcode::PUSH1);
        assert_eq!(Opcode::push(32), Opcode::PUSH32);
        assert_eq!(Opcode::PUSH32.push_size(), 32);
        assert_eq!(Opcode::ADD.push_size(), 0);
        assert_eq!(Opcode::dup(16), Opcode::DUP16);
        assert_eq!(Opcode::swap(1), Opcode::SWAP1);
    }

    #[test]
    fn undefined_bytes() {
        assert!(!Opcode(0xfe).is_defined());
        assert_eq!(Opcode(0x20).name(), "INVALID");
    }
}
