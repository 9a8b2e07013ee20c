//! Client sampling: each client transmits independently with probability `p`
//! and the server rescales the sum by `1 / (n p)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mean::{ClientVector, MeanEstimate, Protocol};
use crate::rng::{self, Domain};
use crate::transform::RotationSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub p: f64,
    /// Participation flag per client for one trial.
    pub participation: Vec<bool>,
}

impl SamplingPlan {
    /// Draws participation for clients `0..n` from per-client private streams.
    pub fn draw(p: f64, n: usize, seed_base: u64, trial: u64) -> Result<Self> {
        check_p(p)?;
        let participation = (0..n as u64)
            .map(|client| {
                if p >= 1.0 {
                    true
                } else {
                    rng::stream(seed_base, Domain::Participation, &[client, trial]).gen_bool(p)
                }
            })
            .collect();
        Ok(Self { p, participation })
    }

    pub fn participants(&self) -> usize {
        self.participation.iter().filter(|&&b| b).count()
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sampling probability {p} outside (0, 1]"
        )));
    }
    Ok(())
}

/// `R^{-1} (1/(n p)) sum_{i in S} Y_i`; `decoded` holds only participants.
///
/// With a rotation the decoded vectors are in the rotated (padded) space and
/// the output in the original one. An empty `decoded` yields the zero vector;
/// `dim` supplies its length.
pub fn sampled_estimate(
    decoded: &[(u64, Vec<f64>)],
    n: usize,
    p: f64,
    dim: usize,
    rotation: Option<&RotationSpec>,
    protocol: Protocol,
) -> Result<MeanEstimate> {
    check_p(p)?;
    if n == 0 {
        return Err(Error::Empty("client set"));
    }
    let inner_dim = rotation.map_or(dim, RotationSpec::d_padded);
    let mut acc = vec![0.0; inner_dim];
    for (_, y) in decoded {
        if y.len() != inner_dim {
            return Err(Error::DimensionMismatch {
                expected: inner_dim,
                got: y.len(),
            });
        }
        for (a, v) in acc.iter_mut().zip(y) {
            *a += v;
        }
    }
    let denom = n as f64 * p;
    acc.iter_mut().for_each(|a| *a /= denom);
    let values = match rotation {
        Some(r) => r.inverse_rotate(&acc)?,
        None => acc,
    };
    Ok(MeanEstimate {
        values,
        protocol,
        sampled: (p < 1.0).then_some(p),
    })
}

/// MSE of the sampled protocol given the unsampled protocol's MSE:
/// `E / p + (1 - p) / (n p) * (1/n) sum ||X_i||^2`.
pub fn sampled_mse(base_mse: f64, p: f64, vectors: &[ClientVector]) -> f64 {
    let n = vectors.len() as f64;
    base_mse / p + (1.0 - p) / (n * p) * crate::mean::mean_norm_sq(vectors)
}

/// The analytic bound of a protocol with client sampling folded in.
pub fn sampled_bound(base_bound: f64, p: f64, vectors: &[ClientVector]) -> f64 {
    sampled_mse(base_bound, p, vectors)
}
