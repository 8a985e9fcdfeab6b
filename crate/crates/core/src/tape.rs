//! Addressable public randomness.
//!
//! Every random draw any algorithm in this crate makes is addressed by a
//! [`StreamKey`] and evaluated lazily as `SHA-256(seed ‖ key)`. Two queries
//! that need the same draw therefore see the same value without sharing any
//! state, which is what makes the samplers memory-less.
//!
//! Key layout (17 bytes, fixed width): one namespace tag byte followed by two
//! 8-byte big-endian fields. Signed times are stored in two's complement.
//!
//! | tag | namespace       | field 1            | field 2          |
//! |-----|-----------------|--------------------|------------------|
//! | 1   | `InitY`         | variable           | 0                |
//! | 2   | `LbSample`      | time (i64)         | 0                |
//! | 3   | `PaddingDraw`   | time (i64)         | 0                |
//! | 4   | `ComponentDraw` | representative var | counter          |
//! | 5   | `MarkOrder`     | variable           | 0                |
//! | 6   | `MarkPhase1`    | variable           | 0                |
//! | 7   | `MarkPhase2`    | variable           | repetition       |
//! | 8   | `MarkPhase3`    | representative var | counter          |

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::formula::VarId;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed([u8; 32]);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeedError {
    #[error("seed must be 64 hex characters, got {0}")]
    WrongLength(usize),
    #[error("seed is not valid hex")]
    NotHex,
}

impl Seed {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Seed(bytes)
    }

    /// A seed whose first eight bytes hold `value` big-endian, rest zero.
    /// Handy for enumerating seeds in experiments.
    pub fn from_u64(value: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&value.to_be_bytes());
        Seed(bytes)
    }

    pub fn from_hex(text: &str) -> Result<Self, SeedError> {
        let text = text.trim();
        if text.len() != 64 {
            return Err(SeedError::WrongLength(text.len()));
        }
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(text, &mut bytes).map_err(|_| SeedError::NotHex)?;
        Ok(Seed(bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl FromStr for Seed {
    type Err = SeedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Seed::from_hex(s)
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", self.to_hex())
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamKey {
    /// Initial state `Y(u)` of the scan chain.
    InitY(VarId),
    /// The uniform behind the lower-bound sample at a time.
    LbSample(i64),
    /// The uniform behind the padding draw at a time.
    PaddingDraw(i64),
    ComponentDraw {
        rep: VarId,
        counter: u64,
    },
    /// Rank `a_v` of a variable in the marking order.
    MarkOrder(VarId),
    MarkPhase1(VarId),
    MarkPhase2 {
        var: VarId,
        repetition: u32,
    },
    /// Reserved; the last marking phase is a deterministic search.
    MarkPhase3 {
        rep: VarId,
        counter: u64,
    },
}

pub const KEY_LEN: usize = 17;

impl StreamKey {
    pub fn to_bytes(&self) -> [u8; KEY_LEN] {
        let (tag, a, b): (u8, u64, u64) = match *self {
            StreamKey::InitY(v) => (1, v.index().into(), 0),
            StreamKey::LbSample(t) => (2, t as u64, 0),
            StreamKey::PaddingDraw(t) => (3, t as u64, 0),
            StreamKey::ComponentDraw { rep, counter } => (4, rep.index().into(), counter),
            StreamKey::MarkOrder(v) => (5, v.index().into(), 0),
            StreamKey::MarkPhase1(v) => (6, v.index().into(), 0),
            StreamKey::MarkPhase2 { var, repetition } => (7, var.index().into(), repetition.into()),
            StreamKey::MarkPhase3 { rep, counter } => (8, rep.index().into(), counter),
        };
        let mut out = [0u8; KEY_LEN];
        out[0] = tag;
        out[1..9].copy_from_slice(&a.to_be_bytes());
        out[9..17].copy_from_slice(&b.to_be_bytes());
        out
    }
}

/// Uniform in `[0, 1)` with 53 bits of precision.
pub fn u01(seed: &Seed, key: StreamKey) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.0);
    hasher.update(key.to_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    (u64::from_be_bytes(word) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `1` iff `u01(seed, key) >= 1/2`.
pub fn bit(seed: &Seed, key: StreamKey) -> bool {
    u01(seed, key) >= 0.5
}
