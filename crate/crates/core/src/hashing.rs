//! Concrete instantiations of the three hash oracles H1, H2, H3.
//!
//! All three are the same extendable-output hash under distinct one-byte
//! domain-separation tags, applied to a canonical injective encoding of
//! the structured inputs:
//!
//! ```text
//! stream = XOF( tag ‖ field_1 ‖ field_2 ‖ ... )
//! field  = len(4 bytes, big-endian) ‖ bytes
//! ```
//!
//! Field bytes are: one element per `elem_bytes(q)` big-endian bytes for
//! Z_q vectors, the packed bytes of a bit string, and 4-byte big-endian
//! seconds for timestamps. This encoding is a cross-implementation wire
//! contract; the hash identifier travels inside serialized system
//! parameters so peers can refuse a mismatched instantiation.
//!
//! * `h1` (tag `0x01`) masks real identities: its output is the first `l`
//!   bits of the stream.
//! * `h2` (tag `0x02`) and `h3` (tag `0x03`) map into `Z_q^*`: the stream
//!   is consumed in `elem_bits(q)`-bit chunks, rejecting chunks that are
//!   zero or `>= q`. Zero is excluded because a zero challenge would erase
//!   the nonce (or the master-key term) from the verification identity.

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::bits::BitString;
use crate::error::{CodecError, ZqError};
use crate::zq::{Modulus, ZqRowVec, ZqVec};
use crate::Timestamp;

/// Domain tags, one per oracle.
pub const TAG_H1: u8 = 0x01;
pub const TAG_H2: u8 = 0x02;
pub const TAG_H3: u8 = 0x03;

/// The extendable-output hash backing the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XofAlgorithm {
    Shake256,
}

impl XofAlgorithm {
    pub fn id(self) -> &'static str {
        match self {
            XofAlgorithm::Shake256 => "shake256",
        }
    }

    pub fn from_id(id: &str) -> Result<Self, CodecError> {
        match id {
            "shake256" => Ok(XofAlgorithm::Shake256),
            other => Err(CodecError::UnknownHash(other.to_string())),
        }
    }
}

/// Hash parameters shared by all actors: which XOF, the pseudonym bit
/// length `l`, and the modulus the field oracles map into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashConfig {
    pub xof: XofAlgorithm,
    pub l: usize,
    pub q: Modulus,
}

impl HashConfig {
    pub fn new(xof: XofAlgorithm, l: usize, q: Modulus) -> Self {
        assert!(l > 0, "pseudonym bit length must be positive");
        Self { xof, l, q }
    }
}

/// Canonical input accumulator: tag byte then length-prefixed fields.
pub(crate) struct CanonicalInput {
    buf: Vec<u8>,
}

impl CanonicalInput {
    pub(crate) fn new(tag: u8) -> Self {
        Self { buf: vec![tag] }
    }

    pub(crate) fn field_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf
            .extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub(crate) fn field_vec(&mut self, v: &ZqVec) -> &mut Self {
        self.field_bytes(&v.to_bytes())
    }

    pub(crate) fn field_row(&mut self, v: &ZqRowVec) -> &mut Self {
        self.field_bytes(&v.to_bytes())
    }

    pub(crate) fn field_bits(&mut self, s: &BitString) -> &mut Self {
        self.field_bytes(s.as_bytes())
    }

    pub(crate) fn field_time(&mut self, t: Timestamp) -> &mut Self {
        self.field_bytes(&t.0.to_be_bytes())
    }

    #[cfg(test)]
    pub(crate) fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    fn into_reader(self, xof: XofAlgorithm) -> impl XofReader {
        match xof {
            XofAlgorithm::Shake256 => {
                let mut h = Shake256::default();
                h.update(&self.buf);
                h.finalize_xof()
            }
        }
    }
}

/// MSB-first bit cursor over an XOF stream.
struct XofBits<R: XofReader> {
    reader: R,
    byte: u8,
    left: u32,
}

impl<R: XofReader> XofBits<R> {
    fn new(reader: R) -> Self {
        Self {
            reader,
            byte: 0,
            left: 0,
        }
    }

    fn take(&mut self, width: u32) -> u32 {
        let mut v = 0u32;
        for _ in 0..width {
            if self.left == 0 {
                let mut b = [0u8; 1];
                self.reader.read(&mut b);
                self.byte = b[0];
                self.left = 8;
            }
            v = v << 1 | u32::from(self.byte >> 7);
            self.byte <<= 1;
            self.left -= 1;
        }
        v
    }
}

/// Maps the stream into `Z_q^*` by rejection on `elem_bits(q)`-bit chunks.
fn stream_to_nonzero(reader: impl XofReader, q: Modulus) -> u32 {
    let mut bits = XofBits::new(reader);
    let width = q.elem_bits();
    loop {
        let v = bits.take(width);
        if v >= 1 && v < q.get() {
            return v;
        }
    }
}

fn check_row(v: &ZqRowVec, cfg: &HashConfig) -> Result<(), ZqError> {
    if v.modulus() != cfg.q {
        return Err(ZqError::Modulus {
            left: v.modulus().get(),
            right: cfg.q.get(),
        });
    }
    Ok(())
}

/// H1: `(pk¹, d, T) -> {0,1}^l`, the identity-masking oracle.
///
/// The second argument is the master secret vector itself, so only its
/// holder can recompute the mask.
pub fn h1(pk1: &ZqRowVec, d: &ZqVec, t: Timestamp, cfg: &HashConfig) -> Result<BitString, ZqError> {
    check_row(pk1, cfg)?;
    if d.modulus() != cfg.q {
        return Err(ZqError::Modulus {
            left: d.modulus().get(),
            right: cfg.q.get(),
        });
    }
    let mut input = CanonicalInput::new(TAG_H1);
    input.field_row(pk1).field_vec(d).field_time(t);
    let mut reader = input.into_reader(cfg.xof);
    let mut buf = vec![0u8; cfg.l.div_ceil(8)];
    reader.read(&mut buf);
    Ok(BitString::from_bytes(cfg.l, &buf))
}

/// H2: `(pk, T) -> Z_q^*`, the key-binding challenge.
///
/// Issuance evaluates it on `pk¹ + X` and verification on the full public
/// key; those are the same vector, so one function serves both phases.
pub fn h2(pk: &ZqRowVec, t: Timestamp, cfg: &HashConfig) -> Result<u32, ZqError> {
    check_row(pk, cfg)?;
    let mut input = CanonicalInput::new(TAG_H2);
    input.field_row(pk).field_time(t);
    Ok(stream_to_nonzero(input.into_reader(cfg.xof), cfg.q))
}

/// H3: `(R, P_ID, m, T) -> Z_q^*`, the per-message challenge.
pub fn h3(
    r_pub: &ZqRowVec,
    pid: &BitString,
    msg: &[u8],
    t: Timestamp,
    cfg: &HashConfig,
) -> Result<u32, ZqError> {
    check_row(r_pub, cfg)?;
    let mut input = CanonicalInput::new(TAG_H3);
    input
        .field_row(r_pub)
        .field_bits(pid)
        .field_bytes(msg)
        .field_time(t);
    Ok(stream_to_nonzero(input.into_reader(cfg.xof), cfg.q))
}
