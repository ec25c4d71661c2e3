//! Error types for the arithmetic, key-lifecycle, signing, and codec layers.

use thiserror::Error;

/// Errors from modular vector/matrix arithmetic.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ZqError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("modulus mismatch: {left} vs {right}")]
    Modulus { left: u32, right: u32 },
    #[error("{0} is not a prime modulus in [3, 2^16)")]
    InvalidModulus(u32),
}

/// Errors from the key lifecycle (registration, issuance, tracing).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("duplicate registration for the same (pk1, rid, timestamp)")]
    DuplicateRegistration,
    #[error("vehicle is not registered under this (pk1, pseudonym)")]
    UnregisteredVehicle,
    #[error("no registration record matches this pseudonym")]
    UnknownPseudonym,
    #[error("partial secret key failed the issuance soundness check")]
    InvalidPartialKey,
    #[error("real identity must be {expected} bits, got {got}")]
    BadRealIdLength { expected: usize, got: usize },
    #[error(transparent)]
    Zq(#[from] ZqError),
}

/// Errors from signature generation and verification.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SigningError {
    #[error("malformed message: {0}")]
    Dimension(#[from] ZqError),
    #[error("batch verification requires at least one message")]
    EmptyBatch,
    #[error("no public key announced for this pseudonym")]
    UnknownPseudonym,
}

/// Errors from the bit-exact wire codec and binary stores.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("element out of range for the modulus")]
    EncodingRange,
    #[error("input ends before the fixed portion or declared payload")]
    Truncated,
    #[error("packed element decodes to a value >= q")]
    MalformedElement,
    #[error("trailing bytes after the declared payload")]
    TrailingBytes,
    #[error("padding bits before the payload length are not zero")]
    NonZeroPadding,
    #[error("payload longer than 65535 bytes cannot be framed")]
    PayloadTooLong,
    #[error("bad magic or unsupported container version")]
    BadHeader,
    #[error("container kind {0:#04x} not valid here")]
    WrongKind(u8),
    #[error("unknown hash identifier {0:?}")]
    UnknownHash(String),
    #[error(transparent)]
    Zq(#[from] ZqError),
}

/// Errors from scenario parsing and execution.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario references undeclared actor index {0}")]
    UnknownActor(usize),
    #[error("step at t={at} would move the clock backwards from {now}")]
    ClockBackwards { at: u32, now: u32 },
}
