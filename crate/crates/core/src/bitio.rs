//! Bit-level I/O over byte buffers, most significant bit first.

use crate::error::{Error, Result};

/// An owned bit string. Bit `i` lives in byte `i / 8` at position `7 - i % 8`,
/// and pad bits past `len` are always zero so equality works on the raw bytes.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Bits {
    bytes: Vec<u8>,
    len: u64,
}

impl Bits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: u64) -> Self {
        Bits {
            bytes: Vec::with_capacity((bits as usize).div_ceil(8)),
            len: 0,
        }
    }

    /// Wraps whole bytes; the bit length is `8 * bytes.len()`.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let len = bytes.len() as u64 * 8;
        Bits { bytes, len }
    }

    /// Takes the first `len` bits of `bytes`, zeroing whatever the final
    /// partial byte carried past the end.
    pub fn from_bytes_truncated(mut bytes: Vec<u8>, len: u64) -> Self {
        assert!(len <= bytes.len() as u64 * 8, "length exceeds the buffer");
        bytes.truncate((len as usize).div_ceil(8));
        if len % 8 != 0 {
            if let Some(last) = bytes.last_mut() {
                *last &= 0xffu8 << (8 - len % 8);
            }
        }
        Bits { bytes, len }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: u64) -> u8 {
        debug_assert!(i < self.len);
        (self.bytes[(i / 8) as usize] >> (7 - (i % 8) as u32)) & 1
    }

    #[inline]
    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        let last = self.bytes.last_mut().unwrap();
        *last |= bit << (7 - (self.len % 8) as u32);
        self.len += 1;
    }

    /// Appends every bit of `other`.
    pub fn extend(&mut self, other: &Bits) {
        if self.len % 8 == 0 {
            // Byte-aligned: splice the buffers directly.
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
        } else {
            for i in 0..other.len {
                self.push(other.get(i));
            }
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

impl std::fmt::Debug for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Bits[{}; ", self.len)?;
        let shown = self.len.min(64);
        for i in 0..shown {
            write!(f, "{}", self.get(i))?;
        }
        if shown < self.len {
            write!(f, "...")?;
        }
        write!(f, "]")
    }
}

/// Accumulates bits into a [`Bits`] buffer.
#[derive(Default)]
pub struct BitWriter {
    out: Bits,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn write_bit(&mut self, bit: u8) {
        self.out.push(bit);
    }

    /// Writes the low `count` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, count: u32) {
        debug_assert!(count <= 64);
        debug_assert!(count == 64 || value < 1u64 << count);
        for i in (0..count).rev() {
            self.out.push(((value >> i) & 1) as u8);
        }
    }

    pub fn len_bits(&self) -> u64 {
        self.out.len()
    }

    pub fn into_bits(self) -> Bits {
        self.out
    }
}

/// Reads bits back out of a byte slice. The reader is bounded by an explicit
/// bit length, which may be shorter than the slice it wraps.
pub struct BitReader<'a> {
    bytes: &'a [u8],
    len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader {
            bytes,
            len: bytes.len() as u64 * 8,
            pos: 0,
        }
    }

    pub fn with_len(bytes: &'a [u8], len: u64) -> Self {
        assert!(len <= bytes.len() as u64 * 8);
        BitReader { bytes, len, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.len - self.pos
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<u8> {
        self.next_bit().ok_or(Error::BitstreamUnderrun)
    }

    /// `None` once the stream is exhausted.
    #[inline]
    pub fn next_bit(&mut self) -> Option<u8> {
        if self.pos >= self.len {
            return None;
        }
        let bit = (self.bytes[(self.pos / 8) as usize] >> (7 - (self.pos % 8) as u32)) & 1;
        self.pos += 1;
        Some(bit)
    }

    /// Reads `count` bits as one big-endian value.
    pub fn read_bits(&mut self, count: u32) -> Result<u64> {
        debug_assert!(count <= 64);
        if self.remaining() < count as u64 {
            return Err(Error::BitstreamUnderrun);
        }
        let mut value = 0u64;
        for _ in 0..count {
            value = (value << 1) | self.next_bit().unwrap() as u64;
        }
        Ok(value)
    }
}
