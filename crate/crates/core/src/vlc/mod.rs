//! Variable-length coded k-level quantization (svk).
//!
//! Coordinates are quantized exactly as in sk with `s = sqrt(2) * ||x||`. The
//! message carries the bin histogram as an enumerative rank, followed by the
//! bin indices arithmetic-coded under the histogram's own distribution.

pub mod arith;
pub mod histogram;

use rand::Rng;

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::mean::{Protocol, ScalarPrecision};
use crate::quant::{check_input, dequantize, min_max, quantize_klevel};
use crate::wire::{self, EncodedMessage, Header};

pub use arith::{arith_decode, arith_encode, CodedBits};
pub use histogram::{
    composition_count, histogram_rank, histogram_unrank, rank_width, CountHistogram,
};

pub fn encode_svk<R: Rng + ?Sized>(x: &[f64], k: u32, rng: &mut R) -> Result<EncodedMessage> {
    encode_svk_with(x, k, ScalarPrecision::F64, rng)
}

pub fn encode_svk_with<R: Rng + ?Sized>(
    x: &[f64],
    k: u32,
    precision: ScalarPrecision,
    rng: &mut R,
) -> Result<EncodedMessage> {
    check_input(x)?;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = std::f64::consts::SQRT_2 * norm;
    let (lo, _) = min_max(x);
    let symbols = quantize_klevel(x, k, lo, s, rng)?;
    let hist = CountHistogram::from_symbols(&symbols, k)?;

    let mut body = BitWriter::new();
    let width = rank_width(x.len() as u64, k as u64);
    histogram::write_rank(&mut body, &histogram_rank(&hist), width);
    let payload_bits = arith::arith_encode_into(&mut body, &symbols, &hist)?;

    let mut w = BitWriter::new();
    wire::write_header(
        &mut w,
        &Header {
            protocol: Protocol::Svk,
            precision,
            d: x.len(),
            k,
            x_min: lo,
            scale: norm,
        },
    );
    w.push_varint(payload_bits as u64);
    w.push_bytes(&body.into_bytes());
    let bytes = w.into_bytes();
    Ok(EncodedMessage {
        protocol: Protocol::Svk,
        precision,
        d: x.len(),
        k,
        x_min: wire::round_to_precision(lo, precision),
        scale: wire::round_to_precision(norm, precision),
        rotation_seed: None,
        symbols,
        raw: Vec::new(),
        histogram_bits: width as usize,
        header_bits: bytes.len() * 8 - payload_bits,
        payload_bits,
        bytes,
    })
}

pub(crate) fn parse_svk(bytes: &[u8]) -> Result<EncodedMessage> {
    let mut r = BitReader::new(bytes);
    let h = wire::read_header(&mut r)?;
    if h.protocol != Protocol::Svk {
        return Err(Error::Malformed("not an svk message".into()));
    }
    let payload_bits = r.read_varint()? as usize;
    let width = rank_width(h.d as u64, h.k as u64);
    let expected_len = (r.position() + width as usize + payload_bits).div_ceil(8);
    if bytes.len() < expected_len {
        return Err(Error::Truncated("svk body"));
    }
    if bytes.len() > expected_len {
        return Err(Error::Malformed("trailing bytes after svk body".into()));
    }
    let rank = histogram::read_rank(&mut r, width)?;
    let hist = histogram_unrank(&rank, h.d as u64, h.k as usize)?;
    let symbols = arith::arith_decode_from(&mut r, payload_bits, &hist, h.d)?;
    Ok(EncodedMessage {
        protocol: Protocol::Svk,
        precision: h.precision,
        d: h.d,
        k: h.k,
        x_min: h.x_min,
        scale: h.scale,
        rotation_seed: None,
        symbols,
        raw: Vec::new(),
        histogram_bits: width as usize,
        header_bits: bytes.len() * 8 - payload_bits,
        payload_bits,
        bytes: bytes.to_vec(),
    })
}

pub fn decode_svk(msg: &EncodedMessage) -> Result<Vec<f64>> {
    if msg.protocol != Protocol::Svk {
        return Err(Error::Malformed(format!(
            "expected svk message, got {}",
            msg.protocol
        )));
    }
    let s = std::f64::consts::SQRT_2 * msg.scale;
    Ok(dequantize(&msg.symbols, msg.k, msg.x_min, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean::ScaleMode;
    use crate::quant::{decode_sk, encode_sk};
    use crate::rng::StreamRng;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> StreamRng {
        StreamRng::seed_from_u64(seed)
    }

    fn unit_gaussian(d: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        let v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn constant_vector_has_single_bin() {
        let x = vec![0.4; 64];
        let m = encode_svk(&x, 9, &mut rng(1)).unwrap();
        assert!(m.symbols.iter().all(|&s| s == 0));
        assert_eq!(m.payload_bits, 2);
        assert_eq!(decode_svk(&m).unwrap(), x);

        let zero = encode_svk(&[0.0; 8], 5, &mut rng(1)).unwrap();
        assert_eq!(decode_svk(&zero).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn same_quantizer_as_sk_with_norm_scale() {
        for seed in 0..10 {
            let x = unit_gaussian(100, seed);
            let svk = encode_svk(&x, 11, &mut rng(seed + 100)).unwrap();
            let sk = encode_sk(&x, 11, ScaleMode::Sqrt2Norm, &mut rng(seed + 100)).unwrap();
            assert_eq!(svk.symbols, sk.symbols);
            assert_eq!(decode_svk(&svk).unwrap(), decode_sk(&sk).unwrap());
        }
    }

    #[test]
    fn wire_roundtrip_and_accounting() {
        let x = unit_gaussian(1024, 5);
        let m = encode_svk(&x, 33, &mut rng(6)).unwrap();
        let back = EncodedMessage::from_bytes(m.as_bytes()).unwrap();
        assert_eq!(back.symbols, m.symbols);
        assert_eq!(back.payload_bits, m.payload_bits);
        assert_eq!(back.histogram_bits as u64, rank_width(1024, 33));
        assert_eq!(m.total_bits(), m.header_bits + m.payload_bits);
        assert_eq!(decode_svk(&back).unwrap(), decode_svk(&m).unwrap());
    }

    #[test]
    fn damaged_messages_rejected() {
        let x = unit_gaussian(64, 7);
        let m = encode_svk(&x, 9, &mut rng(8)).unwrap();
        let b = m.as_bytes();
        assert!(EncodedMessage::from_bytes(&b[..b.len() - 1]).is_err());
        let mut longer = b.to_vec();
        longer.push(0);
        assert!(EncodedMessage::from_bytes(&longer).is_err());
    }

    #[test]
    fn golden_svk_bytes() {
        // constant input: x_min = 0.5, norm = 1, one symbol value, coded as "01"
        let x = [0.5; 4];
        let m = encode_svk(&x, 2, &mut rng(0)).unwrap();
        let mut expected = vec![0x04, 0x04, 0x02];
        expected.extend_from_slice(&0.5f64.to_le_bytes());
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        // payload length 2, then rank of (4, 0) = 0 in 3 bits, then "01"
        expected.push(0x02);
        expected.push(0b0000_1000);
        assert_eq!(m.as_bytes(), &expected[..]);
    }

    proptest! {
        #[test]
        fn svk_roundtrip(x in prop::collection::vec(-3.0f64..3.0, 1..200), k in 2u32..70, seed in any::<u64>()) {
            let m = encode_svk(&x, k, &mut rng(seed)).unwrap();
            let back = EncodedMessage::from_bytes(m.as_bytes()).unwrap();
            prop_assert_eq!(back.symbols, m.symbols);
        }
    }
}
