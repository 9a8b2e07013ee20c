//! Binary-output arithmetic coder driven by an exact frequency table.
//!
//! The model is the symbol histogram itself (no scaling), so the output is
//! within a couple of bits of `d * H(p)`. State is 62 bits wide in `u64`
//! registers with `u128` products; underflow is handled with pending bits and
//! the coder emits individual bits rather than bytes.

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};

use super::histogram::CountHistogram;

const STATE_BITS: u32 = 62;
const TOP: u64 = 1 << STATE_BITS;
const HALF: u64 = TOP >> 1;
const QUARTER: u64 = TOP >> 2;

/// An encoded bit string; `bytes` holds `bit_len` bits MSB first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedBits {
    pub bytes: Vec<u8>,
    pub bit_len: usize,
}

struct Model {
    /// `cum[r]..cum[r + 1]` is symbol `r`'s interval.
    cum: Vec<u64>,
    total: u64,
}

impl Model {
    fn new(h: &CountHistogram) -> Result<Self> {
        let mut cum = Vec::with_capacity(h.k() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for &c in h.counts() {
            acc += c;
            cum.push(acc);
        }
        if acc == 0 || acc >= QUARTER {
            return Err(Error::InvalidConfig(format!(
                "unsupported model total {acc}"
            )));
        }
        Ok(Self { cum, total: acc })
    }

    fn interval(&self, symbol: u32) -> Result<(u64, u64)> {
        let r = symbol as usize;
        if r + 1 >= self.cum.len() {
            return Err(Error::Malformed(format!(
                "symbol {symbol} outside the model"
            )));
        }
        let (lo, hi) = (self.cum[r], self.cum[r + 1]);
        if lo == hi {
            return Err(Error::ZeroCountSymbol(r));
        }
        Ok((lo, hi))
    }

    /// Symbol whose interval contains `target`.
    fn lookup(&self, target: u64) -> u32 {
        (self.cum.partition_point(|&c| c <= target) - 1) as u32
    }
}

fn narrow(low: &mut u64, high: &mut u64, lo: u64, hi: u64, total: u64) {
    let range = (*high - *low + 1) as u128;
    *high = *low + (range * hi as u128 / total as u128) as u64 - 1;
    *low += (range * lo as u128 / total as u128) as u64;
}

struct Encoder {
    out: BitWriter,
    low: u64,
    high: u64,
    pending: u64,
}

impl Encoder {
    fn emit(&mut self, bit: bool) {
        self.out.push_bit(bit);
        for _ in 0..self.pending {
            self.out.push_bit(!bit);
        }
        self.pending = 0;
    }

    fn encode(&mut self, lo: u64, hi: u64, total: u64) {
        narrow(&mut self.low, &mut self.high, lo, hi, total);
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < 3 * QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    fn finish(mut self) -> BitWriter {
        self.pending += 1;
        let bit = self.low >= QUARTER;
        self.emit(bit);
        self.out
    }
}

pub fn arith_encode(symbols: &[u32], h: &CountHistogram) -> Result<CodedBits> {
    let mut w = BitWriter::new();
    arith_encode_into(&mut w, symbols, h)?;
    let bit_len = w.bit_len();
    Ok(CodedBits {
        bytes: w.into_bytes(),
        bit_len,
    })
}

/// Appends the coded symbols to `w`; returns the number of bits written.
pub fn arith_encode_into(w: &mut BitWriter, symbols: &[u32], h: &CountHistogram) -> Result<usize> {
    let model = Model::new(h)?;
    let start = w.bit_len();
    let mut enc = Encoder {
        out: std::mem::take(w),
        low: 0,
        high: TOP - 1,
        pending: 0,
    };
    for &s in symbols {
        let (lo, hi) = model.interval(s)?;
        enc.encode(lo, hi, model.total);
    }
    *w = enc.finish();
    Ok(w.bit_len() - start)
}

struct Decoder<'a, 'b> {
    input: &'b mut BitReader<'a>,
    budget: usize,
    consumed: usize,
}

impl Decoder<'_, '_> {
    // Bits past the end of the coded string read as zero.
    fn next_bit(&mut self) -> Result<u64> {
        let bit = if self.consumed < self.budget {
            self.input.read_bit()? as u64
        } else {
            0
        };
        self.consumed += 1;
        Ok(bit)
    }
}

pub fn arith_decode(bits: &CodedBits, h: &CountHistogram, d: usize) -> Result<Vec<u32>> {
    if bits.bytes.len() * 8 < bits.bit_len {
        return Err(Error::Truncated("coded bit string"));
    }
    let mut r = BitReader::new(&bits.bytes);
    arith_decode_from(&mut r, bits.bit_len, h, d)
}

/// Decodes `d` symbols from the next `bit_len` bits of `r`, leaving `r` just
/// past them. Fails unless the string has exactly the length the encoder
/// would have produced.
pub fn arith_decode_from(
    r: &mut BitReader<'_>,
    bit_len: usize,
    h: &CountHistogram,
    d: usize,
) -> Result<Vec<u32>> {
    let model = Model::new(h)?;
    if r.remaining() < bit_len {
        return Err(Error::Truncated("coded bit string"));
    }
    let mut dec = Decoder {
        input: r,
        budget: bit_len,
        consumed: 0,
    };
    let (mut low, mut high) = (0u64, TOP - 1);
    let mut value = 0u64;
    for _ in 0..STATE_BITS {
        value = (value << 1) | dec.next_bit()?;
    }
    let mut shifts = 0usize;
    let mut out = Vec::with_capacity(d);
    for _ in 0..d {
        let range = (high - low + 1) as u128;
        let target = (((value - low) as u128 + 1) * model.total as u128 - 1) / range;
        if target >= model.total as u128 {
            return Err(Error::Malformed("coded value outside model range".into()));
        }
        let s = model.lookup(target as u64);
        let (lo, hi) = model.interval(s)?;
        narrow(&mut low, &mut high, lo, hi, model.total);
        if value < low || value > high {
            return Err(Error::Malformed("inconsistent coded value".into()));
        }
        loop {
            if high < HALF {
            } else if low >= HALF {
                low -= HALF;
                high -= HALF;
                value -= HALF;
            } else if low >= QUARTER && high < 3 * QUARTER {
                low -= QUARTER;
                high -= QUARTER;
                value -= QUARTER;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
            value = (value << 1) | dec.next_bit()?;
            shifts += 1;
        }
        out.push(s);
    }
    // every renormalization shift emits one bit, and termination adds two
    let expected = shifts + 2;
    if bit_len < expected {
        return Err(Error::Truncated("coded bit string"));
    }
    if bit_len > expected {
        return Err(Error::Malformed(format!(
            "coded string has {bit_len} bits, expected {expected}"
        )));
    }
    // leave the reader positioned after the coded bits
    let read = dec.consumed.min(bit_len);
    for _ in read..bit_len {
        r.read_bit()?;
    }
    Ok(out)
}
