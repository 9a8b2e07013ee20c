//! Serialized client messages.
//!
//! Layout for the fixed-width protocols (sb, sk, srk):
//!
//! ```text
//! [tag: 1 byte][d: varint][k: varint][x_min: scalar][s: scalar][seed: u64 LE, srk only]
//! [payload: n_symbols * ceil(log2 k) bits, MSB first, zero padded to a byte]
//! ```
//!
//! The variable-length protocol (svk) replaces `s` with the vector norm and
//! follows the scalars with `[payload_bits: varint][rank bits][coded bits]`.
//! The tag's low seven bits hold the protocol id; the high bit marks f32 scalars.
//! Scalars are little-endian IEEE-754. Unquantized messages carry no header at
//! all: they are the `d` raw scalars.

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::mean::{Protocol, ScalarPrecision};

const F32_FLAG: u8 = 0x80;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMessage {
    pub protocol: Protocol,
    pub precision: ScalarPrecision,
    /// Dimension of the client's input (before any padding).
    pub d: usize,
    pub k: u32,
    /// Lowest bin boundary, as transmitted.
    pub x_min: f64,
    /// `s` for sb/sk/srk, the vector norm for svk, as transmitted.
    pub scale: f64,
    pub rotation_seed: Option<u64>,
    /// Bin index per quantized coordinate (or nothing for unquantized messages).
    pub symbols: Vec<u32>,
    /// Unquantized payload values.
    pub raw: Vec<f64>,
    /// Bits spent on the enumeratively coded histogram (svk only).
    pub histogram_bits: usize,
    /// Everything that is not payload, including byte padding and `histogram_bits`.
    pub header_bits: usize,
    pub payload_bits: usize,
    pub(crate) bytes: Vec<u8>,
}

impl EncodedMessage {
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    /// Communication cost in bits: the serialized length.
    pub fn total_bits(&self) -> usize {
        self.bytes.len() * 8
    }

    /// Parses any tagged message (everything except unquantized payloads).
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let tag = *bytes.first().ok_or(Error::Truncated("message tag"))?;
        let protocol = Protocol::from_wire_id(tag & !F32_FLAG)
            .ok_or_else(|| Error::Malformed(format!("unknown tag {tag:#04x}")))?;
        match protocol {
            Protocol::Exact => Err(Error::Malformed(
                "unquantized payloads are untagged; use parse_exact".into(),
            )),
            Protocol::Sb | Protocol::Sk | Protocol::Srk => crate::quant::parse_fixed(bytes),
            Protocol::Svk => crate::vlc::parse_svk(bytes),
        }
    }
}

pub(crate) fn write_scalar(w: &mut BitWriter, v: f64, precision: ScalarPrecision) {
    match precision {
        ScalarPrecision::F32 => w.push_bytes(&(v as f32).to_le_bytes()),
        ScalarPrecision::F64 => w.push_bytes(&v.to_le_bytes()),
    }
}

pub(crate) fn read_scalar(r: &mut BitReader<'_>, precision: ScalarPrecision) -> Result<f64> {
    let b = r.read_bytes(precision.bytes())?;
    let v = match precision {
        ScalarPrecision::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
        ScalarPrecision::F64 => f64::from_le_bytes(b.try_into().unwrap()),
    };
    if !v.is_finite() {
        return Err(Error::Malformed("non-finite scalar".into()));
    }
    Ok(v)
}

/// Value of `v` after a round trip through the wire precision.
pub fn round_to_precision(v: f64, precision: ScalarPrecision) -> f64 {
    match precision {
        ScalarPrecision::F32 => v as f32 as f64,
        ScalarPrecision::F64 => v,
    }
}

pub(crate) struct Header {
    pub protocol: Protocol,
    pub precision: ScalarPrecision,
    pub d: usize,
    pub k: u32,
    pub x_min: f64,
    pub scale: f64,
}

pub(crate) fn write_header(w: &mut BitWriter, h: &Header) {
    let mut tag = h.protocol.wire_id();
    if h.precision == ScalarPrecision::F32 {
        tag |= F32_FLAG;
    }
    w.push_bits(tag as u64, 8);
    w.push_varint(h.d as u64);
    w.push_varint(h.k as u64);
    write_scalar(w, h.x_min, h.precision);
    write_scalar(w, h.scale, h.precision);
}

pub(crate) fn read_header(r: &mut BitReader<'_>) -> Result<Header> {
    let tag = r.read_bits(8)? as u8;
    let protocol = Protocol::from_wire_id(tag & !F32_FLAG)
        .ok_or_else(|| Error::Malformed(format!("unknown tag {tag:#04x}")))?;
    let precision = if tag & F32_FLAG != 0 {
        ScalarPrecision::F32
    } else {
        ScalarPrecision::F64
    };
    let d = r.read_varint()?;
    let k = r.read_varint()?;
    if d == 0 || d > (1 << 40) {
        return Err(Error::Malformed(format!("bad dimension {d}")));
    }
    if !(2..=u32::MAX as u64).contains(&k) {
        return Err(Error::Malformed(format!("bad level count {k}")));
    }
    let x_min = read_scalar(r, precision)?;
    let scale = read_scalar(r, precision)?;
    if scale < 0.0 {
        return Err(Error::Malformed("negative scale".into()));
    }
    Ok(Header {
        protocol,
        precision,
        d: d as usize,
        k: k as u32,
        x_min,
        scale,
    })
}

/// Serializes an unquantized vector: `d` raw scalars, no header.
pub fn encode_exact(x: &[f64], precision: ScalarPrecision) -> EncodedMessage {
    let mut w = BitWriter::new();
    for &v in x {
        write_scalar(&mut w, v, precision);
    }
    let bytes = w.into_bytes();
    EncodedMessage {
        protocol: Protocol::Exact,
        precision,
        d: x.len(),
        k: 0,
        x_min: 0.0,
        scale: 0.0,
        rotation_seed: None,
        symbols: Vec::new(),
        raw: x
            .iter()
            .map(|&v| round_to_precision(v, precision))
            .collect(),
        histogram_bits: 0,
        header_bits: 0,
        payload_bits: bytes.len() * 8,
        bytes,
    }
}

pub fn parse_exact(bytes: &[u8], precision: ScalarPrecision) -> Result<EncodedMessage> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(precision.bytes()) {
        return Err(Error::Malformed(format!(
            "{} bytes is not a whole number of scalars",
            bytes.len()
        )));
    }
    let mut r = BitReader::new(bytes);
    let d = bytes.len() / precision.bytes();
    let raw = (0..d)
        .map(|_| read_scalar(&mut r, precision))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedMessage {
        protocol: Protocol::Exact,
        precision,
        d,
        k: 0,
        x_min: 0.0,
        scale: 0.0,
        rotation_seed: None,
        symbols: Vec::new(),
        raw,
        histogram_bits: 0,
        header_bits: 0,
        payload_bits: bytes.len() * 8,
        bytes: bytes.to_vec(),
    })
}
