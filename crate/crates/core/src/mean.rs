//! Domain types, the exact empirical mean, squared-error metrics and the
//! closed-form MSE expressions used as references for the codecs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A client's real-valued input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientVector {
    pub client_id: u64,
    pub values: Vec<f64>,
}

impl ClientVector {
    pub fn new(client_id: u64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("client vector"));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(j));
        }
        Ok(Self { client_id, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

/// Builds client vectors with ids `0..n` from raw rows.
pub fn clients_from_rows(rows: Vec<Vec<f64>>) -> Result<Vec<ClientVector>> {
    rows.into_iter()
        .enumerate()
        .map(|(i, v)| ClientVector::new(i as u64, v))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Unquantized transmission of every coordinate.
    Exact,
    /// Stochastic binary quantization.
    Sb,
    /// Stochastic k-level quantization.
    Sk,
    /// k-level quantization after a randomized Hadamard rotation.
    Srk,
    /// k-level quantization with entropy-coded bin indices.
    Svk,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Exact,
        Protocol::Sb,
        Protocol::Sk,
        Protocol::Srk,
        Protocol::Svk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Exact => "exact",
            Protocol::Sb => "sb",
            Protocol::Sk => "sk",
            Protocol::Srk => "srk",
            Protocol::Svk => "svk",
        }
    }

    pub fn wire_id(self) -> u8 {
        match self {
            Protocol::Exact => 0,
            Protocol::Sb => 1,
            Protocol::Sk => 2,
            Protocol::Srk => 3,
            Protocol::Svk => 4,
        }
    }

    pub fn from_wire_id(id: u8) -> Option<Self> {
        Protocol::ALL.into_iter().find(|p| p.wire_id() == id)
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown protocol {s:?}")))
    }
}

/// How the per-client bin range `s` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    /// `s = max - min`
    Range,
    /// `s = sqrt(2) * ||x||`
    Sqrt2Norm,
}

/// Precision of scalars on the wire. Internal arithmetic is always f64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarPrecision {
    F32,
    F64,
}

impl ScalarPrecision {
    pub fn bits(self) -> usize {
        match self {
            ScalarPrecision::F32 => 32,
            ScalarPrecision::F64 => 64,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() / 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub k: u32,
    pub s_mode: ScaleMode,
    pub sampling_p: f64,
    pub rotation_seed: u64,
    pub private_seed_base: u64,
    pub scalar_precision: ScalarPrecision,
    /// Draw a fresh rotation for every trial (derived from `rotation_seed`).
    pub rotation_per_trial: bool,
}

pub const DEFAULT_ROTATION_SEED: u64 = 0x5eed_0000_0000_0001;
pub const DEFAULT_PRIVATE_SEED: u64 = 0x5eed_0000_0000_0002;

impl ProtocolConfig {
    /// Defaults for a protocol: `k = 2`, and the scale mode the protocol requires.
    pub fn new(protocol: Protocol, k: u32) -> Self {
        let s_mode = match protocol {
            Protocol::Svk => ScaleMode::Sqrt2Norm,
            _ => ScaleMode::Range,
        };
        Self {
            protocol,
            k,
            s_mode,
            sampling_p: 1.0,
            rotation_seed: DEFAULT_ROTATION_SEED,
            private_seed_base: DEFAULT_PRIVATE_SEED,
            scalar_precision: ScalarPrecision::F64,
            rotation_per_trial: true,
        }
    }

    pub fn exact() -> Self {
        Self::new(Protocol::Exact, 2)
    }

    pub fn sb() -> Self {
        Self::new(Protocol::Sb, 2)
    }

    pub fn sk(k: u32) -> Self {
        Self::new(Protocol::Sk, k)
    }

    pub fn srk(k: u32) -> Self {
        Self::new(Protocol::Srk, k)
    }

    pub fn svk(k: u32) -> Self {
        Self::new(Protocol::Svk, k)
    }

    pub fn with_sampling(mut self, p: f64) -> Self {
        self.sampling_p = p;
        self
    }

    pub fn with_seeds(mut self, rotation_seed: u64, private_seed_base: u64) -> Self {
        self.rotation_seed = rotation_seed;
        self.private_seed_base = private_seed_base;
        self
    }

    pub fn with_scale_mode(mut self, s_mode: ScaleMode) -> Self {
        self.s_mode = s_mode;
        self
    }

    pub fn with_precision(mut self, precision: ScalarPrecision) -> Self {
        self.scalar_precision = precision;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if !(self.sampling_p > 0.0 && self.sampling_p <= 1.0) {
            return bad("sampling_p must lie in (0, 1]");
        }
        match self.protocol {
            Protocol::Sb if self.k != 2 => bad("sb requires k = 2"),
            Protocol::Sb | Protocol::Srk if self.s_mode != ScaleMode::Range => {
                bad("sb and srk use s = max - min")
            }
            Protocol::Svk if self.s_mode != ScaleMode::Sqrt2Norm => {
                bad("svk requires s = sqrt(2) * norm")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub values: Vec<f64>,
    pub protocol: Protocol,
    /// Participation probability when client sampling was applied.
    pub sampled: Option<f64>,
}

impl MeanEstimate {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub config: ProtocolConfig,
    pub n: usize,
    pub d: usize,
    /// Estimate from the last trial.
    pub estimate: MeanEstimate,
    pub empirical_mse: f64,
    /// Standard error of `empirical_mse` across trials.
    pub mse_std_error: f64,
    pub total_bits: u64,
    /// Mean bits per client over all trials.
    pub per_client_bits: Vec<u64>,
    pub mean_total_bits: f64,
    pub max_total_bits: u64,
    /// Bound evaluated at the dimension actually quantized (padded for srk).
    pub analytic_bound: f64,
    /// srk only: the same bound evaluated at the unpadded dimension.
    pub analytic_bound_unpadded: Option<f64>,
    pub trials: usize,
}

impl EstimationReport {
    pub fn mean_bits_per_dim(&self) -> f64 {
        self.mean_total_bits / (self.n as f64 * self.d as f64)
    }
}

fn common_dim(vectors: &[ClientVector]) -> Result<usize> {
    let first = vectors.first().ok_or(Error::Empty("client set"))?;
    let d = first.dim();
    for v in vectors {
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.dim(),
            });
        }
    }
    Ok(d)
}

pub fn exact_mean(vectors: &[ClientVector]) -> Result<MeanEstimate> {
    let d = common_dim(vectors)?;
    let mut acc = vec![0.0; d];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(&v.values) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(MeanEstimate {
        values: acc,
        protocol: Protocol::Exact,
        sampled: None,
    })
}

pub fn squared_error(a: &MeanEstimate, b: &MeanEstimate) -> Result<f64> {
    squared_distance(&a.values, &b.values)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Average squared norm `(1/n) sum ||X_i||^2`.
pub fn mean_norm_sq(vectors: &[ClientVector]) -> f64 {
    vectors.iter().map(ClientVector::norm_sq).sum::<f64>() / vectors.len() as f64
}

/// Exact expected MSE of stochastic binary quantization:
/// `(1/n^2) sum_i sum_j (max_i - x_ij)(x_ij - min_i)`.
pub fn analytic_mse_binary(vectors: &[ClientVector]) -> Result<f64> {
    common_dim(vectors)?;
    let n = vectors.len() as f64;
    let total: f64 = vectors
        .iter()
        .map(|v| {
            let (hi, lo) = (v.max(), v.min());
            v.values.iter().map(|&x| (hi - x) * (x - lo)).sum::<f64>()
        })
        .sum();
    Ok(total / (n * n))
}

/// Closed-form MSE upper bound for the configured protocol on these inputs.
///
/// srk is evaluated at the padded (power-of-two) dimension; svk shares the
/// k-level bound since it uses the same quantizer. Client sampling is not
/// folded in here, see [`crate::sampling::sampled_bound`].
pub fn analytic_bound(config: &ProtocolConfig, vectors: &[ClientVector]) -> Result<f64> {
    let d = common_dim(vectors)?;
    let dq = match config.protocol {
        Protocol::Srk => d.next_power_of_two(),
        _ => d,
    };
    Ok(bound_at_dim(config, vectors, dq))
}

/// The srk bound with the unpadded dimension plugged in.
pub fn analytic_bound_unpadded(config: &ProtocolConfig, vectors: &[ClientVector]) -> Result<f64> {
    let d = common_dim(vectors)?;
    Ok(bound_at_dim(config, vectors, d))
}

fn bound_at_dim(config: &ProtocolConfig, vectors: &[ClientVector], d: usize) -> f64 {
    let n = vectors.len() as f64;
    let d = d as f64;
    let km1 = (config.k as f64 - 1.0).powi(2);
    let avg = mean_norm_sq(vectors);
    match config.protocol {
        Protocol::Exact => 0.0,
        Protocol::Sb => d / (2.0 * n) * avg,
        Protocol::Sk | Protocol::Svk => d / (2.0 * n * km1) * avg,
        Protocol::Srk => (2.0 * d.ln() + 2.0) / (n * km1) * avg,
    }
}
