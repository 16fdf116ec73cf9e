//! Binary arithmetic coder over explicit per-symbol probabilities.
//!
//! Low/range registers of configurable width W (default 32). Probabilities
//! are discretized to W-2 bits with both branches kept nonzero, and interval
//! rounding always goes against the more probable symbol, so the penalty per
//! coded symbol stays far below a thousandth of a bit. Straddle states are
//! handled with a pending-bit counter; finalization costs at most two bits.

use crate::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: u32 = 32;

#[inline]
fn discretize(p1: f64, scale: u64) -> u64 {
    ((p1 * scale as f64).round() as i64).clamp(1, scale as i64 - 1) as u64
}

/// Interval split for one symbol: `(size of the 0 branch, size of the 1
/// branch)`. The floor lands on the larger branch.
#[inline]
fn split(range: u64, p1: u64, prec: u32) -> (u64, u64) {
    let p0 = (1u64 << prec) - p1;
    if p1 >= p0 {
        let r1 = (range * p1) >> prec;
        (range - r1, r1)
    } else {
        let r0 = (range * p0) >> prec;
        (r0, range - r0)
    }
}

pub struct Encoder {
    w: BitWriter,
    low: u64,
    range: u64,
    pending: u64,
    width: u32,
    start_bits: u64,
    ideal_bits: f64,
    symbols: u64,
}

impl Encoder {
    /// Starts coding into `w`, appending after whatever it already holds.
    pub fn new(w: BitWriter) -> Self {
        Self::with_width(w, DEFAULT_WIDTH)
    }

    pub fn with_width(w: BitWriter, width: u32) -> Self {
        assert!((8..=32).contains(&width));
        let start_bits = w.len_bits();
        Encoder {
            w,
            low: 0,
            range: 1u64 << width,
            pending: 0,
            width,
            start_bits,
            ideal_bits: 0.0,
            symbols: 0,
        }
    }

    #[inline]
    fn emit(&mut self, bit: u8) {
        self.w.write_bit(bit);
        for _ in 0..self.pending {
            self.w.write_bit(bit ^ 1);
        }
        self.pending = 0;
    }

    #[inline]
    fn renorm(&mut self) {
        let half = 1u64 << (self.width - 1);
        let quarter = half >> 1;
        while self.range <= quarter {
            if self.low + self.range <= half {
                self.emit(0);
            } else if self.low >= half {
                self.emit(1);
                self.low -= half;
            } else {
                self.pending += 1;
                self.low -= quarter;
            }
            self.low <<= 1;
            self.range <<= 1;
        }
    }

    /// Codes one symbol against probability `p1` of it being 1.
    pub fn encode_bit(&mut self, bit: u8, p1: f64) {
        debug_assert!(bit <= 1);
        let prec = self.width - 2;
        let scale = 1u64 << prec;
        let p = discretize(p1, scale);
        let (r0, r1) = split(self.range, p, prec);
        if bit == 1 {
            self.low += r0;
            self.range = r1;
            self.ideal_bits -= (p as f64 / scale as f64).log2();
        } else {
            self.range = r0;
            self.ideal_bits -= ((scale - p) as f64 / scale as f64).log2();
        }
        self.symbols += 1;
        self.renorm();
    }

    /// Codes an index in `[0, levels)` as a chain of balanced binary splits;
    /// the branch probabilities telescope to exactly `1 / levels`.
    pub fn encode_uniform(&mut self, k: u32, levels: u32) {
        debug_assert!(k < levels);
        let (mut lo, mut hi) = (0u64, levels as u64);
        let k = k as u64;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let p1 = (hi - mid) as f64 / (hi - lo) as f64;
            let bit = (k >= mid) as u8;
            self.encode_bit(bit, p1);
            if bit == 1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// Sum of `-log2` of the discretized probabilities coded so far.
    pub fn ideal_bits(&self) -> f64 {
        self.ideal_bits
    }

    pub fn symbols(&self) -> u64 {
        self.symbols
    }

    /// Bits appended to the writer so far, excluding what finish will add.
    pub fn bits_written(&self) -> u64 {
        self.w.len_bits() - self.start_bits
    }

    /// Flushes the final interval and hands the writer back. Exactly two
    /// bits plus any pending carries: the smallest quarter-multiple inside
    /// [low, low + range) is reachable with two bits, and zero padding on the
    /// decoder side extends it for free.
    pub fn finish(mut self) -> BitWriter {
        let quarter = 1u64 << (self.width - 2);
        let z = self.low.div_ceil(quarter) * quarter;
        debug_assert!(z < self.low + self.range);
        self.emit(((z >> (self.width - 1)) & 1) as u8);
        self.emit(((z >> (self.width - 2)) & 1) as u8);
        self.w
    }
}

pub struct Decoder<'a> {
    r: BitReader<'a>,
    /// Offset of the code value above the interval base; renormalization is
    /// translation invariant, so the base itself never needs tracking.
    off: u64,
    range: u64,
    width: u32,
    synthetic: u64,
}

impl<'a> Decoder<'a> {
    pub fn new(r: BitReader<'a>) -> Result<Self> {
        Self::with_width(r, DEFAULT_WIDTH)
    }

    pub fn with_width(r: BitReader<'a>, width: u32) -> Result<Self> {
        assert!((8..=32).contains(&width));
        let mut d = Decoder {
            r,
            off: 0,
            range: 1u64 << width,
            width,
            synthetic: 0,
        };
        for _ in 0..width {
            let b = d.pull()?;
            d.off = (d.off << 1) | b;
        }
        Ok(d)
    }

    /// Next stream bit, padding with zeros once the reader runs dry. A valid
    /// stream never needs more than W-2 padding bits; well past that the
    /// stream must be truncated.
    #[inline]
    fn pull(&mut self) -> Result<u64> {
        match self.r.next_bit() {
            Some(b) => Ok(b as u64),
            None => {
                self.synthetic += 1;
                if self.synthetic > 2 * self.width as u64 {
                    Err(Error::BitstreamUnderrun)
                } else {
                    Ok(0)
                }
            }
        }
    }

    pub fn decode_bit(&mut self, p1: f64) -> Result<u8> {
        let prec = self.width - 2;
        let scale = 1u64 << prec;
        let p = discretize(p1, scale);
        let (r0, r1) = split(self.range, p, prec);
        let bit = if self.off >= r0 {
            self.off -= r0;
            self.range = r1;
            1
        } else {
            self.range = r0;
            0
        };
        let full = 1u64 << self.width;
        let quarter = full >> 2;
        while self.range <= quarter {
            self.range <<= 1;
            // The min keeps a corrupted stream from growing `off` without
            // bound; in-range values are never touched by it.
            self.off = (((self.off << 1) | self.pull()?)).min(full - 1);
        }
        Ok(bit)
    }

    pub fn decode_uniform(&mut self, levels: u32) -> Result<u32> {
        let (mut lo, mut hi) = (0u64, levels as u64);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let p1 = (hi - mid) as f64 / (hi - lo) as f64;
            if self.decode_bit(p1)? == 1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo as u32)
    }

    /// Releases the underlying reader, positioned after the last bit pulled.
    pub fn into_reader(self) -> BitReader<'a> {
        self.r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn roundtrip(seq: &[(u8, f64)]) -> (u64, f64) {
        let mut enc = Encoder::new(BitWriter::new());
        for &(bit, p1) in seq {
            enc.encode_bit(bit, p1);
        }
        let ideal = enc.ideal_bits();
        let bits = enc.finish().into_bits();
        let mut dec = Decoder::new(BitReader::with_len(bits.as_bytes(), bits.len())).unwrap();
        for &(bit, p1) in seq {
            assert_eq!(dec.decode_bit(p1).unwrap(), bit);
        }
        (bits.len(), ideal)
    }

    #[test]
    fn fair_coin_costs_one_bit_per_symbol() {
        let seq: Vec<(u8, f64)> = (0..1000).map(|i| (((i * 7) % 3 == 0) as u8, 0.5)).collect();
        let (len, ideal) = roundtrip(&seq);
        assert_eq!(ideal, 1000.0);
        assert!((1000..=1002).contains(&len), "payload {len}");
    }

    #[test]
    fn empty_stream_flushes_two_bits() {
        let bits = Encoder::new(BitWriter::new()).finish().into_bits();
        assert!(bits.len() <= 2);
    }

    #[test]
    fn single_fair_bit_within_three() {
        for bit in [0u8, 1] {
            let mut enc = Encoder::new(BitWriter::new());
            enc.encode_bit(bit, 0.5);
            let out = enc.finish().into_bits();
            assert!(out.len() <= 3);
            let mut dec = Decoder::new(BitReader::with_len(out.as_bytes(), out.len())).unwrap();
            assert_eq!(dec.decode_bit(0.5).unwrap(), bit);
        }
    }

    #[test]
    fn skewed_zeros_stay_near_ideal() {
        let n = 10_000usize;
        let seq: Vec<(u8, f64)> = (0..n).map(|_| (0u8, 0.2)).collect();
        let (len, ideal) = roundtrip(&seq);
        let expect = n as f64 * -(0.8f64.log2());
        assert!((ideal - expect).abs() < 1e-3);
        assert!(len as f64 >= ideal);
        assert!(len as f64 <= ideal + 2.0 + n as f64 / (1u64 << 24) as f64);
    }

    #[test]
    fn extreme_probabilities_are_clamped() {
        let seq: Vec<(u8, f64)> = vec![(0, 0.0), (1, 0.0), (0, 1.0), (1, 1.0), (0, 0.5)];
        roundtrip(&seq);
    }

    #[test]
    fn random_streams_roundtrip_and_respect_overhead() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(0..400);
            let seq: Vec<(u8, f64)> = (0..n)
                .map(|_| {
                    let p1: f64 = rng.random_range(0.001..0.999);
                    ((rng.random::<f64>() < p1) as u8, p1)
                })
                .collect();
            let (len, ideal) = roundtrip(&seq);
            let slack = 2.0 + n as f64 / (1u64 << 24) as f64;
            assert!(len as f64 <= ideal + slack, "len {len} ideal {ideal}");
        }
    }

    #[test]
    fn narrow_width_still_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for width in [8u32, 12, 16, 24, 31] {
            let seq: Vec<(u8, f64)> = (0..500)
                .map(|_| {
                    let p1: f64 = rng.random_range(0.05..0.95);
                    ((rng.random::<f64>() < p1) as u8, p1)
                })
                .collect();
            let mut enc = Encoder::with_width(BitWriter::new(), width);
            for &(bit, p1) in &seq {
                enc.encode_bit(bit, p1);
            }
            let bits = enc.finish().into_bits();
            let mut dec =
                Decoder::with_width(BitReader::with_len(bits.as_bytes(), bits.len()), width)
                    .unwrap();
            for &(bit, p1) in &seq {
                assert_eq!(dec.decode_bit(p1).unwrap(), bit, "width {width}");
            }
        }
    }

    #[test]
    fn uniform_power_of_two_is_exact() {
        let mut enc = Encoder::new(BitWriter::new());
        for i in 0..100u32 {
            enc.encode_uniform((i * 5) % 8, 8);
        }
        assert_eq!(enc.ideal_bits(), 300.0);
        // 300 exact halvings: the first narrows the full range without a
        // renormalization, the rest cost one bit each, plus two to finish.
        let bits = enc.finish().into_bits();
        assert_eq!(bits.len(), 301);
        let mut dec = Decoder::new(BitReader::with_len(bits.as_bytes(), bits.len())).unwrap();
        for i in 0..100u32 {
            assert_eq!(dec.decode_uniform(8).unwrap(), (i * 5) % 8);
        }
    }

    #[test]
    fn uniform_single_level_is_free() {
        let mut enc = Encoder::new(BitWriter::new());
        enc.encode_uniform(0, 1);
        assert_eq!(enc.bits_written(), 0);
        assert_eq!(enc.ideal_bits(), 0.0);
    }

    #[test]
    fn uniform_large_alphabet_near_entropy() {
        let levels = 1772u32;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ks: Vec<u32> = (0..1000).map(|_| rng.random_range(0..levels)).collect();
        let mut enc = Encoder::new(BitWriter::new());
        for &k in &ks {
            enc.encode_uniform(k, levels);
        }
        let bits = enc.finish().into_bits();
        let bound = 1000.0 * (levels as f64).log2() + 2.0 + 1.0;
        assert!((bits.len() as f64) <= bound, "{} vs {bound}", bits.len());
        let mut dec = Decoder::new(BitReader::with_len(bits.as_bytes(), bits.len())).unwrap();
        for &k in &ks {
            assert_eq!(dec.decode_uniform(levels).unwrap(), k);
        }
    }

    #[test]
    fn truncated_stream_errors_instead_of_spinning() {
        let mut enc = Encoder::new(BitWriter::new());
        for _ in 0..5000 {
            enc.encode_bit(1, 0.5);
        }
        let bits = enc.finish().into_bits();
        // Hand the decoder only the first few bytes.
        let mut dec = Decoder::new(BitReader::with_len(&bits.as_bytes()[..4], 32)).unwrap();
        let mut failed = false;
        for _ in 0..5000 {
            if dec.decode_bit(0.5).is_err() {
                failed = true;
                break;
            }
        }
        assert!(failed);
    }
}
