//! MSB-first bit packing and LEB128 varints used by the wire formats.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bytes(bytes: Vec<u8>) -> Self {
        let bit_len = bytes.len() * 8;
        Self { bytes, bit_len }
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    pub fn push_bit(&mut self, bit: bool) {
        let offset = self.bit_len % 8;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> offset;
        }
        self.bit_len += 1;
    }

    /// Writes the low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        for i in (0..width).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    /// Appends whole bytes; the writer must be byte aligned.
    pub fn push_bytes(&mut self, data: &[u8]) {
        assert_eq!(self.bit_len % 8, 0, "push_bytes on unaligned writer");
        self.bytes.extend_from_slice(data);
        self.bit_len += data.len() * 8;
    }

    pub fn push_varint(&mut self, mut value: u64) {
        loop {
            let mut byte = (value & 0x7f) as u8;
            value >>= 7;
            if value != 0 {
                byte |= 0x80;
            }
            self.push_bits(byte as u64, 8);
            if value == 0 {
                break;
            }
        }
    }

    /// Pads with zero bits up to the next byte boundary.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.bytes.len() * 8 {
            return Err(Error::Truncated("bit stream"));
        }
        let bit = self.bytes[self.pos / 8] & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn align(&mut self) {
        self.pos = self.pos.div_ceil(8) * 8;
    }

    pub fn read_bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        assert_eq!(self.pos % 8, 0, "read_bytes on unaligned reader");
        let start = self.pos / 8;
        if start + n > self.bytes.len() {
            return Err(Error::Truncated("byte field"));
        }
        self.pos += n * 8;
        Ok(&self.bytes[start..start + n])
    }

    pub fn read_varint(&mut self) -> Result<u64> {
        let mut value = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.read_bits(8)?;
            value |= (byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::Malformed("varint longer than 10 bytes".into()))
    }
}

/// Number of bits needed to write any value in `0..k`, i.e. ceil(log2 k).
pub fn symbol_width(k: u64) -> u32 {
    if k <= 1 {
        0
    } else {
        64 - (k - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first_layout() {
        let mut w = BitWriter::new();
        w.push_bits(0b101, 3);
        w.push_bit(true);
        assert_eq!(w.bit_len(), 4);
        assert_eq!(w.into_bytes(), vec![0b1011_0000]);
    }

    #[test]
    fn varint_known_encoding() {
        let mut w = BitWriter::new();
        w.push_varint(300);
        assert_eq!(w.into_bytes(), vec![0xac, 0x02]);
    }

    #[test]
    fn widths() {
        assert_eq!(symbol_width(1), 0);
        assert_eq!(symbol_width(2), 1);
        assert_eq!(symbol_width(3), 2);
        assert_eq!(symbol_width(4), 2);
        assert_eq!(symbol_width(5), 3);
        assert_eq!(symbol_width(33), 6);
    }

    #[test]
    fn reading_past_end_fails() {
        let mut r = BitReader::new(&[0xff]);
        assert_eq!(r.read_bits(8).unwrap(), 0xff);
        assert!(r.read_bit().is_err());
    }

    proptest! {
        #[test]
        fn fields_roundtrip(fields in prop::collection::vec((any::<u64>(), 1u32..=64), 0..40), v in any::<u64>()) {
            let mut w = BitWriter::new();
            for &(x, width) in &fields {
                w.push_bits(x, width);
            }
            w.push_varint(v);
            let bytes = w.into_bytes();
            let mut r = BitReader::new(&bytes);
            for &(x, width) in &fields {
                let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
                prop_assert_eq!(r.read_bits(width).unwrap(), x & mask);
            }
            prop_assert_eq!(r.read_varint().unwrap(), v);
        }
    }
}
