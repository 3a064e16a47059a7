//! Desk-scale execution laboratory for studying how EVM instruction costs
//! drift as chain state grows.
//!
//! The crate is layered bottom-up:
//!
//! - [`rlp`] and [`trie`]: canonical RLP and a Merkle-Patricia trie over a
//!   content-addressed node store.
//! - [`evm`]: a gas-metered interpreter for an EVM opcode subset that emits
//!   per-instruction gas and wall-time samples.
//! - [`instrument`]: lock-free windowed aggregation of those samples plus
//!   macro category spans, with stable CSV formats.
//! - [`chain`]: a synthetic block driver that grows state with height.
//! - [`model`]: block-height cost models, classification, fitting and the
//!   constant time-per-gas repricing.

pub mod chain;
pub mod evm;
pub mod instrument;
pub mod model;
pub mod par;
pub mod rlp;
pub mod trie;

pub use primitive_types::U256;

/// keccak-256 digest of `data`.
pub fn keccak256(data: &[u8]) -> [u8; 32] {
    use sha3::{Digest, Keccak256};
    Keccak256::digest(data).into()
}
