//! Quick property checks runnable from the command line.

use crate::data::{self, DataSource};
use crate::error::Result;
use crate::harness;
use crate::mean::{self, ProtocolConfig};
use crate::quant;
use crate::rng;
use crate::transform::RotationSpec;
use crate::vlc::{self, CountHistogram};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult {
            name,
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn wire_roundtrip() -> Result<(bool, String)> {
    let rows = data::generate(&DataSource::SyntheticGaussian, 20, 37, 1)?;
    let mut cases = 0;
    for (i, x) in rows.iter().enumerate() {
        for config in [
            ProtocolConfig::sb(),
            ProtocolConfig::sk(7),
            ProtocolConfig::srk(4),
            ProtocolConfig::svk(13),
        ] {
            let rot = RotationSpec::new(i as u64, x.len())?;
            let mut r = rng::private_stream(9, i as u64, 0);
            let msg = quant::encode(x, &config, Some(&rot), &mut r)?;
            let back = quant::parse(msg.as_bytes(), &config)?;
            if back.symbols != msg.symbols
                || back.total_bits() != back.header_bits + back.payload_bits
            {
                return Ok((false, format!("{} on row {i}", config.protocol)));
            }
            cases += 1;
        }
    }
    Ok((true, format!("{cases} messages")))
}

fn rank_bijection() -> Result<(bool, String)> {
    let mut count = 0;
    for d in 0..=6u64 {
        for k in 1..=4usize {
            let total = vlc::composition_count(d, k as u64);
            let mut r = num_bigint::BigUint::from(0u32);
            while r < total {
                let h = vlc::histogram_unrank(&r, d, k)?;
                if vlc::histogram_rank(&h) != r {
                    return Ok((false, format!("d={d} k={k}")));
                }
                r += 1u32;
                count += 1;
            }
        }
    }
    Ok((true, format!("{count} histograms")))
}

fn coder_lossless() -> Result<(bool, String)> {
    use rand::Rng;
    let mut r = rng::private_stream(3, 0, 0);
    for case in 0..500 {
        let k = r.gen_range(1..20u32);
        let len = r.gen_range(1..300);
        let symbols: Vec<u32> = (0..len).map(|_| r.gen_range(0..k)).collect();
        let h = CountHistogram::from_symbols(&symbols, k)?;
        let bits = vlc::arith_encode(&symbols, &h)?;
        if vlc::arith_decode(&bits, &h, len)? != symbols {
            return Ok((false, format!("case {case}")));
        }
    }
    Ok((true, "500 streams".into()))
}

fn unbiased(config: ProtocolConfig) -> Result<(bool, String)> {
    let vectors = data::to_clients(data::generate(&DataSource::SyntheticGaussian, 3, 8, 4)?)?;
    let truth = mean::exact_mean(&vectors)?;
    let trials = 4000;
    let d = truth.dim();
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for t in 0..trials {
        let out = harness::run_round(&vectors, &config, t)?;
        for j in 0..d {
            sum[j] += out.estimate.values[j];
            sq[j] += out.estimate.values[j] * out.estimate.values[j];
        }
    }
    let t = trials as f64;
    let mut worst: f64 = 0.0;
    for j in 0..d {
        let m = sum[j] / t;
        let se = ((sq[j] / t - m * m).max(0.0) / t).sqrt();
        let z = if se > 0.0 {
            (m - truth.values[j]).abs() / se
        } else if (m - truth.values[j]).abs() < 1e-9 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    Ok((worst < 5.0, format!("max |z| = {worst:.2}")))
}

pub fn run() -> Vec<CheckResult> {
    vec![
        check("wire roundtrip", wire_roundtrip),
        check("histogram rank bijection", rank_bijection),
        check("arithmetic coder lossless", coder_lossless),
        check("unbiased sb", || unbiased(ProtocolConfig::sb())),
        check("unbiased sk", || unbiased(ProtocolConfig::sk(5))),
        check("unbiased srk", || unbiased(ProtocolConfig::srk(3))),
        check("unbiased svk", || unbiased(ProtocolConfig::svk(9))),
        check("unbiased sampled sk", || {
            unbiased(ProtocolConfig::sk(4).with_sampling(0.5))
        }),
    ]
}
