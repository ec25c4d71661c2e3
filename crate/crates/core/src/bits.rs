//! Fixed-length bit strings and MSB-first bit packing.
//!
//! Pseudonyms and real identities are `l`-bit strings with `l` not a
//! multiple of 8, and the wire format packs field values at sub-byte
//! widths, so both sides of the crate share these primitives.

use rand::RngCore;

use crate::error::CodecError;

/// An immutable-length bit string, packed MSB-first.
///
/// Bits past `len` in the final byte are always zero, which makes byte
/// comparison equivalent to bit comparison and keeps encodings canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    len: usize,
    bytes: Vec<u8>,
}

impl BitString {
    /// All-zero string of `len` bits.
    pub fn zero(len: usize) -> Self {
        Self {
            len,
            bytes: vec![0u8; len.div_ceil(8)],
        }
    }

    /// Builds from packed bytes, masking any excess bits in the last byte.
    pub fn from_bytes(len: usize, bytes: &[u8]) -> Self {
        let mut s = Self::zero(len);
        let n = s.bytes.len().min(bytes.len());
        s.bytes[..n].copy_from_slice(&bytes[..n]);
        s.mask_tail();
        s
    }

    /// Uniformly random string of `len` bits.
    pub fn random(len: usize, rng: &mut impl RngCore) -> Self {
        let mut s = Self::zero(len);
        rng.fill_bytes(&mut s.bytes);
        s.mask_tail();
        s
    }

    fn mask_tail(&mut self) {
        let excess = self.bytes.len() * 8 - self.len;
        if excess > 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xffu8 << excess;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Packed representation, `ceil(len/8)` bytes, excess bits zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit(&self, idx: usize) -> bool {
        assert!(idx < self.len, "bit index {idx} out of range {}", self.len);
        self.bytes[idx / 8] >> (7 - idx % 8) & 1 == 1
    }

    pub fn flip_bit(&mut self, idx: usize) {
        assert!(idx < self.len, "bit index {idx} out of range {}", self.len);
        self.bytes[idx / 8] ^= 1 << (7 - idx % 8);
    }

    /// Bitwise XOR of two strings of identical length.
    ///
    /// This is the pseudonym mask operation: it is an involution, so
    /// applying the same mask twice recovers the original string.
    pub fn xor(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len, "xor of unequal bit lengths");
        Self {
            len: self.len,
            bytes: self
                .bytes
                .iter()
                .zip(&other.bytes)
                .map(|(a, b)| a ^ b)
                .collect(),
        }
    }

    pub fn to_hex(&self) -> String {
        self.bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// MSB-first bit accumulator for packed encodings.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    /// Bits already used in the final byte (0 means byte-aligned).
    used: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value < 1u64 << width);
        for i in (0..width).rev() {
            let bit = (value >> i & 1) as u8;
            if self.used == 0 {
                self.bytes.push(0);
            }
            let last = self.bytes.last_mut().unwrap();
            *last |= bit << (7 - self.used);
            self.used = (self.used + 1) % 8;
        }
    }

    pub fn write_bitstring(&mut self, s: &BitString) {
        for i in 0..s.len() {
            self.write_bits(s.bit(i) as u64, 1);
        }
    }

    /// Zero-pads to the next byte boundary and returns the buffer.
    pub fn finish(mut self) -> Vec<u8> {
        self.used = 0;
        std::mem::take(&mut self.bytes)
    }

    pub fn bit_len(&self) -> usize {
        if self.used == 0 {
            self.bytes.len() * 8
        } else {
            (self.bytes.len() - 1) * 8 + self.used as usize
        }
    }
}

/// MSB-first bit cursor over a byte slice.
#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Reads `width` bits as an unsigned value, most significant first.
    pub fn read_bits(&mut self, width: u32) -> Result<u64, CodecError> {
        debug_assert!(width <= 64);
        let mut v = 0u64;
        for _ in 0..width {
            let byte = self.bytes.get(self.pos / 8).ok_or(CodecError::Truncated)?;
            v = v << 1 | u64::from(byte >> (7 - self.pos % 8) & 1);
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn read_bitstring(&mut self, len: usize) -> Result<BitString, CodecError> {
        let mut s = BitString::zero(len);
        for i in 0..len {
            if self.read_bits(1)? == 1 {
                s.flip_bit(i);
            }
        }
        Ok(s)
    }

    /// Consumes padding up to the next byte boundary, requiring zeros.
    pub fn align_to_byte(&mut self) -> Result<(), CodecError> {
        while !self.pos.is_multiple_of(8) {
            if self.read_bits(1)? != 0 {
                return Err(CodecError::NonZeroPadding);
            }
        }
        Ok(())
    }

    /// Byte offset of the cursor; valid only when byte-aligned.
    pub fn byte_pos(&self) -> usize {
        debug_assert_eq!(self.pos % 8, 0);
        self.pos / 8
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_has_masked_tail() {
        let s = BitString::zero(9);
        assert_eq!(s.as_bytes(), &[0, 0]);
        assert_eq!(s.len(), 9);
    }

    #[test]
    fn from_bytes_masks_excess() {
        let s = BitString::from_bytes(9, &[0xff, 0xff]);
        assert_eq!(s.as_bytes(), &[0xff, 0x80]);
        assert!(s.bit(8));
    }

    #[test]
    fn xor_is_involution() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = BitString::random(700, &mut rng);
            let b = BitString::random(700, &mut rng);
            assert_eq!(a.xor(&b).xor(&b), a);
        }
    }

    #[test]
    fn flip_bit_changes_exactly_one_bit() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let a = BitString::random(21, &mut rng);
        let mut b = a.clone();
        b.flip_bit(13);
        let diff = a.xor(&b);
        let set: Vec<usize> = (0..21).filter(|&i| diff.bit(i)).collect();
        assert_eq!(set, vec![13]);
    }

    #[test]
    fn writer_reader_round_trip() {
        let mut w = BitWriter::new();
        w.write_bits(0b101, 3);
        w.write_bits(0x01020304, 32);
        w.write_bits(0b10, 2);
        assert_eq!(w.bit_len(), 37);
        let bytes = w.finish();
        assert_eq!(bytes.len(), 5);

        let mut r = BitReader::new(&bytes);
        assert_eq!(r.read_bits(3).unwrap(), 0b101);
        assert_eq!(r.read_bits(32).unwrap(), 0x01020304);
        assert_eq!(r.read_bits(2).unwrap(), 0b10);
        r.align_to_byte().unwrap();
        assert_eq!(r.byte_pos(), 5);
    }

    #[test]
    fn reader_rejects_nonzero_padding() {
        let mut w = BitWriter::new();
        w.write_bits(0b1011, 4);
        let bytes = w.finish();
        let mut r = BitReader::new(&bytes);
        r.read_bits(2).unwrap();
        assert!(matches!(r.align_to_byte(), Err(CodecError::NonZeroPadding)));
    }

    #[test]
    fn reader_detects_truncation() {
        let mut r = BitReader::new(&[0xab]);
        assert_eq!(r.read_bits(8).unwrap(), 0xab);
        assert!(matches!(r.read_bits(1), Err(CodecError::Truncated)));
    }
}
