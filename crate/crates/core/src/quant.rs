//! Stochastic k-level quantization and the fixed-width codecs (sb, sk, srk).
//!
//! Bin boundaries are `B(r) = x_min + r * s / (k - 1)` for `r` in `0..k`. A
//! coordinate in `[B(r), B(r+1))` rounds up to `r + 1` with probability
//! proportional to its distance from `B(r)`, so `E[B(index)] = x` exactly.

use rand::Rng;

use crate::bits::{symbol_width, BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::mean::{Protocol, ProtocolConfig, ScalarPrecision, ScaleMode};
use crate::transform::RotationSpec;
use crate::wire::{self, EncodedMessage, Header};

// Relative slack for roundoff in `x_min + s >= max` checks.
const RANGE_SLACK: f64 = 1e-9;

/// Randomized rounding of every coordinate onto `k` levels.
///
/// Draws exactly one uniform per coordinate regardless of the outcome, so two
/// quantizers fed the same stream make the same decisions.
pub fn quantize_klevel<R: Rng + ?Sized>(
    x: &[f64],
    k: u32,
    x_min: f64,
    s: f64,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if k < 2 {
        return Err(Error::InvalidConfig("k must be at least 2".into()));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidConfig(format!("invalid scale {s}")));
    }
    let top = (k - 1) as f64;
    let mut out = Vec::with_capacity(x.len());
    for (j, &v) in x.iter().enumerate() {
        let u: f64 = rng.gen();
        if s == 0.0 {
            if v != x_min {
                return Err(Error::OutOfRange {
                    index: j,
                    value: v,
                    lo: x_min,
                    hi: x_min,
                });
            }
            out.push(0);
            continue;
        }
        let t = (v - x_min) / s * top;
        if !(t >= -RANGE_SLACK * top && t <= top * (1.0 + RANGE_SLACK)) {
            return Err(Error::OutOfRange {
                index: j,
                value: v,
                lo: x_min,
                hi: x_min + s,
            });
        }
        let t = t.clamp(0.0, top);
        // half-open bins; the top boundary maps to k-1 deterministically
        let r = (t.floor() as u32).min(k - 2);
        let frac = t - r as f64;
        out.push(if u < frac { r + 1 } else { r });
    }
    Ok(out)
}

/// `B(r)` for each symbol.
pub fn dequantize(symbols: &[u32], k: u32, x_min: f64, s: f64) -> Vec<f64> {
    let step = s / (k - 1) as f64;
    symbols.iter().map(|&r| x_min + r as f64 * step).collect()
}

/// Per-client scale for the given mode.
pub fn scale_for(x: &[f64], mode: ScaleMode) -> f64 {
    match mode {
        ScaleMode::Range => {
            let (lo, hi) = min_max(x);
            hi - lo
        }
        ScaleMode::Sqrt2Norm => {
            std::f64::consts::SQRT_2 * x.iter().map(|v| v * v).sum::<f64>().sqrt()
        }
    }
}

pub(crate) fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

pub(crate) fn check_input(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty("client vector"));
    }
    if let Some(j) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(j));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_fixed(
    protocol: Protocol,
    d: usize,
    k: u32,
    x_min: f64,
    s: f64,
    rotation_seed: Option<u64>,
    symbols: Vec<u32>,
    precision: ScalarPrecision,
) -> EncodedMessage {
    let mut w = BitWriter::new();
    let header = Header {
        protocol,
        precision,
        d,
        k,
        x_min,
        scale: s,
    };
    wire::write_header(&mut w, &header);
    if let Some(seed) = rotation_seed {
        w.push_bytes(&seed.to_le_bytes());
    }
    let width = symbol_width(k as u64);
    for &r in &symbols {
        w.push_bits(r as u64, width);
    }
    let payload_bits = symbols.len() * width as usize;
    let bytes = w.into_bytes();
    EncodedMessage {
        protocol,
        precision,
        d,
        k,
        x_min: wire::round_to_precision(x_min, precision),
        scale: wire::round_to_precision(s, precision),
        rotation_seed,
        symbols,
        raw: Vec::new(),
        histogram_bits: 0,
        header_bits: bytes.len() * 8 - payload_bits,
        payload_bits,
        bytes,
    }
}

pub(crate) fn parse_fixed(bytes: &[u8]) -> Result<EncodedMessage> {
    let mut r = BitReader::new(bytes);
    let h = wire::read_header(&mut r)?;
    let (rotation_seed, n_symbols) = match h.protocol {
        Protocol::Srk => {
            let seed = u64::from_le_bytes(r.read_bytes(8)?.try_into().unwrap());
            (Some(seed), h.d.next_power_of_two())
        }
        Protocol::Sb | Protocol::Sk => (None, h.d),
        p => return Err(Error::Malformed(format!("{p} is not a fixed-width format"))),
    };
    if h.protocol == Protocol::Sb && h.k != 2 {
        return Err(Error::Malformed("sb message with k != 2".into()));
    }
    let width = symbol_width(h.k as u64);
    let payload_bits = n_symbols * width as usize;
    let expected_len = (r.position() + payload_bits).div_ceil(8);
    if bytes.len() != expected_len {
        return Err(if bytes.len() < expected_len {
            Error::Truncated("payload")
        } else {
            Error::Malformed("trailing bytes after payload".into())
        });
    }
    let mut symbols = Vec::with_capacity(n_symbols);
    for _ in 0..n_symbols {
        let s = r.read_bits(width)? as u32;
        if s >= h.k {
            return Err(Error::Malformed(format!(
                "symbol {s} out of range for k = {}",
                h.k
            )));
        }
        symbols.push(s);
    }
    Ok(EncodedMessage {
        protocol: h.protocol,
        precision: h.precision,
        d: h.d,
        k: h.k,
        x_min: h.x_min,
        scale: h.scale,
        rotation_seed,
        symbols,
        raw: Vec::new(),
        histogram_bits: 0,
        header_bits: bytes.len() * 8 - payload_bits,
        payload_bits,
        bytes: bytes.to_vec(),
    })
}

/// Stochastic binary quantization: each coordinate becomes the client's max or min.
pub fn encode_sb<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Result<EncodedMessage> {
    encode_sb_with(x, ScalarPrecision::F64, rng)
}

pub fn encode_sb_with<R: Rng + ?Sized>(
    x: &[f64],
    precision: ScalarPrecision,
    rng: &mut R,
) -> Result<EncodedMessage> {
    check_input(x)?;
    let mut m = encode_levels(Protocol::Sb, x, 2, ScaleMode::Range, precision, rng)?;
    m.protocol = Protocol::Sb;
    Ok(m)
}

pub fn encode_sk<R: Rng + ?Sized>(
    x: &[f64],
    k: u32,
    s_mode: ScaleMode,
    rng: &mut R,
) -> Result<EncodedMessage> {
    encode_sk_with(x, k, s_mode, ScalarPrecision::F64, rng)
}

pub fn encode_sk_with<R: Rng + ?Sized>(
    x: &[f64],
    k: u32,
    s_mode: ScaleMode,
    precision: ScalarPrecision,
    rng: &mut R,
) -> Result<EncodedMessage> {
    check_input(x)?;
    encode_levels(Protocol::Sk, x, k, s_mode, precision, rng)
}

fn encode_levels<R: Rng + ?Sized>(
    protocol: Protocol,
    x: &[f64],
    k: u32,
    s_mode: ScaleMode,
    precision: ScalarPrecision,
    rng: &mut R,
) -> Result<EncodedMessage> {
    let (lo, hi) = min_max(x);
    let s = if lo == hi { 0.0 } else { scale_for(x, s_mode) };
    let symbols = quantize_klevel(x, k, lo, s, rng)?;
    Ok(build_fixed(
        protocol,
        x.len(),
        k,
        lo,
        s,
        None,
        symbols,
        precision,
    ))
}

/// Rotates with `R = HD / sqrt(d)` and quantizes the rotated vector with `s = range`.
pub fn encode_srk<R: Rng + ?Sized>(
    x: &[f64],
    k: u32,
    rotation: &RotationSpec,
    rng: &mut R,
) -> Result<EncodedMessage> {
    encode_srk_with(x, k, rotation, ScalarPrecision::F64, rng)
}

pub fn encode_srk_with<R: Rng + ?Sized>(
    x: &[f64],
    k: u32,
    rotation: &RotationSpec,
    precision: ScalarPrecision,
    rng: &mut R,
) -> Result<EncodedMessage> {
    check_input(x)?;
    let z = rotation.rotate(x)?;
    let (lo, hi) = min_max(&z);
    let s = hi - lo;
    let symbols = quantize_klevel(&z, k, lo, s, rng)?;
    Ok(build_fixed(
        Protocol::Srk,
        x.len(),
        k,
        lo,
        s,
        Some(rotation.seed()),
        symbols,
        precision,
    ))
}

fn expect(msg: &EncodedMessage, protocol: Protocol) -> Result<()> {
    if msg.protocol != protocol {
        return Err(Error::Malformed(format!(
            "expected {protocol} message, got {}",
            msg.protocol
        )));
    }
    Ok(())
}

pub fn decode_sb(msg: &EncodedMessage) -> Result<Vec<f64>> {
    expect(msg, Protocol::Sb)?;
    Ok(dequantize(&msg.symbols, msg.k, msg.x_min, msg.scale))
}

pub fn decode_sk(msg: &EncodedMessage) -> Result<Vec<f64>> {
    expect(msg, Protocol::Sk)?;
    Ok(dequantize(&msg.symbols, msg.k, msg.x_min, msg.scale))
}

/// Quantized rotated vector (length `d_padded`). The server averages these
/// and applies the inverse rotation once.
pub fn decode_srk(msg: &EncodedMessage) -> Result<Vec<f64>> {
    expect(msg, Protocol::Srk)?;
    Ok(dequantize(&msg.symbols, msg.k, msg.x_min, msg.scale))
}

/// Decodes any message into the space the server averages in: input space for
/// everything except srk, which stays rotated.
pub fn decode(msg: &EncodedMessage) -> Result<Vec<f64>> {
    match msg.protocol {
        Protocol::Exact => Ok(msg.raw.clone()),
        Protocol::Sb => decode_sb(msg),
        Protocol::Sk => decode_sk(msg),
        Protocol::Srk => decode_srk(msg),
        Protocol::Svk => crate::vlc::decode_svk(msg),
    }
}

/// Encodes `x` with the configured protocol. `rotation` is required for srk.
pub fn encode<R: Rng + ?Sized>(
    x: &[f64],
    config: &ProtocolConfig,
    rotation: Option<&RotationSpec>,
    rng: &mut R,
) -> Result<EncodedMessage> {
    let precision = config.scalar_precision;
    match config.protocol {
        Protocol::Exact => {
            check_input(x)?;
            Ok(wire::encode_exact(x, precision))
        }
        Protocol::Sb => encode_sb_with(x, precision, rng),
        Protocol::Sk => encode_sk_with(x, config.k, config.s_mode, precision, rng),
        Protocol::Srk => {
            let rotation =
                rotation.ok_or_else(|| Error::InvalidConfig("srk needs a rotation".into()))?;
            encode_srk_with(x, config.k, rotation, precision, rng)
        }
        Protocol::Svk => crate::vlc::encode_svk_with(x, config.k, precision, rng),
    }
}

/// Parses serialized bytes produced by [`encode`] under the same config.
pub fn parse(bytes: &[u8], config: &ProtocolConfig) -> Result<EncodedMessage> {
    let msg = match config.protocol {
        Protocol::Exact => wire::parse_exact(bytes, config.scalar_precision)?,
        _ => EncodedMessage::from_bytes(bytes)?,
    };
    if msg.protocol != config.protocol {
        return Err(Error::Malformed(format!(
            "expected {} message, got {}",
            config.protocol, msg.protocol
        )));
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> StreamRng {
        StreamRng::seed_from_u64(seed)
    }

    #[test]
    fn boundary_values_are_deterministic() {
        // k = 5 on [0, 1]: boundaries 0, .25, .5, .75, 1 are exact in binary
        let x = [0.0, 0.25, 0.5, 0.75, 1.0];
        for seed in 0..50 {
            let q = quantize_klevel(&x, 5, 0.0, 1.0, &mut rng(seed)).unwrap();
            assert_eq!(q, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn binary_endpoints_map_to_themselves() {
        for seed in 0..50 {
            let q = quantize_klevel(&[0.5, -0.5], 2, -0.5, 1.0, &mut rng(seed)).unwrap();
            assert_eq!(q, vec![1, 0]);
        }
    }

    #[test]
    fn rounding_frequency_matches_binomial() {
        // k = 4, bins at 0, 1/3, 2/3, 1; x = 0.3 sits 0.9 of the way into bin 0
        let trials = 100_000;
        let mut r = rng(17);
        let mut ones = 0usize;
        for _ in 0..trials {
            match quantize_klevel(&[0.3], 4, 0.0, 1.0, &mut r).unwrap()[0] {
                1 => ones += 1,
                0 => {}
                other => panic!("index {other} impossible"),
            }
        }
        let p = 0.9;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((ones as f64 - trials as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn quantizer_errors() {
        let mut r = rng(0);
        assert!(quantize_klevel(&[0.0, 1.0], 4, 0.0, 0.0, &mut r).is_err());
        assert!(quantize_klevel(&[2.0], 4, 0.0, 1.0, &mut r).is_err());
        assert!(quantize_klevel(&[-0.5], 4, 0.0, 1.0, &mut r).is_err());
        assert!(quantize_klevel(&[0.5], 1, 0.0, 1.0, &mut r).is_err());
        assert_eq!(
            quantize_klevel(&[3.0, 3.0], 4, 3.0, 0.0, &mut r).unwrap(),
            vec![0, 0]
        );
    }

    #[test]
    fn constant_vector_is_exact() {
        let x = vec![-1.75; 9];
        let m = encode_sb(&x, &mut rng(1)).unwrap();
        assert_eq!(decode_sb(&m).unwrap(), x);
        assert!(m.symbols.iter().all(|&s| s == 0));
        let m = encode_sk(&x, 7, ScaleMode::Range, &mut rng(1)).unwrap();
        assert_eq!(decode_sk(&m).unwrap(), x);
        let single = encode_sk(&[0.3], 3, ScaleMode::Range, &mut rng(1)).unwrap();
        assert_eq!(decode_sk(&single).unwrap(), vec![0.3]);
    }

    #[test]
    fn binary_two_point_support() {
        let (a, b) = (0.75, -0.25);
        for seed in 0..20 {
            let m = encode_sb(&[a, b], &mut rng(seed)).unwrap();
            assert_eq!(m.payload_bits, 2);
            for v in decode_sb(&m).unwrap() {
                assert!(v == a || v == b);
            }
        }
    }

    #[test]
    fn binary_is_two_level_special_case() {
        let x: Vec<f64> = (0..40)
            .map(|i| ((i * 7) % 13) as f64 / 13.0 - 0.4)
            .collect();
        for seed in 0..10 {
            let sb = encode_sb(&x, &mut rng(seed)).unwrap();
            let sk = encode_sk(&x, 2, ScaleMode::Range, &mut rng(seed)).unwrap();
            assert_eq!(sb.symbols, sk.symbols);
            assert_eq!(decode_sb(&sb).unwrap(), decode_sk(&sk).unwrap());
        }
    }

    #[test]
    fn payload_bit_counts() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).cos()).collect();
        for k in [2u32, 3, 4, 5, 16, 17, 33] {
            let m = encode_sk(&x, k, ScaleMode::Range, &mut rng(k as u64)).unwrap();
            assert_eq!(m.payload_bits, 100 * symbol_width(k as u64) as usize);
            assert_eq!(m.total_bits(), m.header_bits + m.payload_bits);
            // tag + d varint + k varint + two f64 scalars + padding
            let fixed = 8 + 8 + 8 + 128;
            assert_eq!(m.header_bits - fixed, (8 - m.payload_bits % 8) % 8);
        }
        let rot = RotationSpec::new(5, 100).unwrap();
        let m = encode_srk(&x, 4, &rot, &mut rng(3)).unwrap();
        assert_eq!(m.payload_bits, 128 * 2);
        assert_eq!(m.header_bits, 8 + 8 + 8 + 128 + 64);
    }

    #[test]
    fn golden_sb_bytes() {
        // symbols are deterministic here: both coordinates are endpoints
        let m = encode_sb(&[1.0, 0.0, 1.0], &mut rng(0)).unwrap();
        let mut expected = vec![0x01, 0x03, 0x02];
        expected.extend_from_slice(&0.0f64.to_le_bytes());
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.push(0b1010_0000);
        assert_eq!(m.as_bytes(), &expected[..]);
    }

    #[test]
    fn golden_srk_header() {
        let rot = RotationSpec::new(0x0102_0304_0506_0708, 2).unwrap();
        let m = encode_srk_with(&[0.5, 0.5], 2, &rot, ScalarPrecision::F32, &mut rng(0)).unwrap();
        let b = m.as_bytes();
        assert_eq!(b[0], 0x83);
        assert_eq!(&b[1..3], &[0x02, 0x02]);
        assert_eq!(&b[11..19], &0x0102_0304_0506_0708u64.to_le_bytes());
        assert_eq!(b.len(), 20);
        assert_eq!(m.header_bits + m.payload_bits, 160);
    }

    #[test]
    fn parse_rejects_damage() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = encode_sk(&x, 3, ScaleMode::Range, &mut rng(2)).unwrap();
        let bytes = m.as_bytes();
        assert!(EncodedMessage::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.to_vec();
        longer.push(0);
        assert!(EncodedMessage::from_bytes(&longer).is_err());
        // symbol 3 is out of range for k = 3
        let mut bad = bytes.to_vec();
        let last = bad.len() - 1;
        bad[last - 1] = 0xff;
        assert!(EncodedMessage::from_bytes(&bad).is_err());
    }

    #[test]
    fn srk_worked_example_is_exact() {
        // rotated [-1, 1, 0, 0] has only two distinct values for every sign pattern
        let x = [-1.0, 1.0, 0.0, 0.0];
        for bits in 0..16u32 {
            let diag = (0..4)
                .map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            let rot = RotationSpec::from_diagonal(4, diag).unwrap();
            let z = rot.rotate(&x).unwrap();
            let mut distinct: Vec<f64> = z.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            assert_eq!(distinct.len(), 2);
            for seed in 0..5 {
                let m = encode_srk(&x, 2, &rot, &mut rng(seed)).unwrap();
                let back = rot.inverse_rotate(&decode_srk(&m).unwrap()).unwrap();
                let err: f64 = back.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                assert!(err < 1e-24, "pattern {bits}: err {err}");
            }
        }
    }

    #[test]
    fn srk_is_deterministic() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let rot = RotationSpec::new(9, 50).unwrap();
        let a = encode_srk(&x, 8, &rot, &mut rng(4)).unwrap();
        let b = encode_srk(&x, 8, &rot, &mut rng(4)).unwrap();
        assert_eq!(a.as_bytes(), b.as_bytes());
    }

    #[test]
    fn per_coordinate_variance_bound() {
        // Var(Y_j) <= s^2 / (4 (k-1)^2) for every coordinate
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 1.3).sin() / 4.0).collect();
        for (k, mode) in [(3u32, ScaleMode::Range), (5, ScaleMode::Sqrt2Norm)] {
            let s = scale_for(&x, mode);
            let limit = s * s / (4.0 * ((k - 1) as f64).powi(2));
            let trials = 20_000;
            let mut sq = vec![0.0; x.len()];
            let mut r = rng(k as u64);
            for _ in 0..trials {
                let m = encode_sk(&x, k, mode, &mut r).unwrap();
                for (a, (y, xv)) in sq.iter_mut().zip(decode_sk(&m).unwrap().iter().zip(&x)) {
                    *a += (y - xv) * (y - xv);
                }
            }
            for v in sq {
                let var = v / trials as f64;
                // 5% covers Monte Carlo noise on a quantity bounded by `limit`
                assert!(var <= limit * 1.05, "var {var} > {limit}");
            }
        }
    }

    proptest! {
        #[test]
        fn parse_roundtrip(x in prop::collection::vec(-50.0f64..50.0, 1..80), k in 2u32..40, seed in any::<u64>(), f32s in any::<bool>()) {
            let precision = if f32s { ScalarPrecision::F32 } else { ScalarPrecision::F64 };
            let m = encode_sk_with(&x, k, ScaleMode::Range, precision, &mut rng(seed)).unwrap();
            prop_assert!(m.symbols.iter().all(|&s| s < k));
            let back = EncodedMessage::from_bytes(m.as_bytes()).unwrap();
            prop_assert_eq!(&back.symbols, &m.symbols);
            prop_assert_eq!(back.x_min, m.x_min);
            prop_assert_eq!(back.scale, m.scale);
            prop_assert_eq!(back.total_bits(), back.header_bits + back.payload_bits);

            let rot = RotationSpec::new(seed, x.len()).unwrap();
            let m = encode_srk_with(&x, k, &rot, precision, &mut rng(seed)).unwrap();
            let back = EncodedMessage::from_bytes(m.as_bytes()).unwrap();
            prop_assert_eq!(back.symbols, m.symbols);
            prop_assert_eq!(back.rotation_seed, Some(seed));
        }

        #[test]
        fn decoded_values_bracket_inputs(x in prop::collection::vec(-5.0f64..5.0, 2..40), k in 2u32..10, seed in any::<u64>()) {
            let m = encode_sk(&x, k, ScaleMode::Range, &mut rng(seed)).unwrap();
            let step = m.scale / (k - 1) as f64;
            for (y, v) in decode_sk(&m).unwrap().iter().zip(&x) {
                prop_assert!((y - v).abs() <= step * (1.0 + 1e-9) + 1e-12);
            }
        }
    }
}
