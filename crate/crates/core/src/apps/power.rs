use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{check_app_config, round_rotation, transmit, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::mean::ProtocolConfig;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIterState {
    pub eigvec: Vec<f64>,
    pub iteration: usize,
    /// Sign-aligned distance to the reference eigenvector.
    pub distance_to_truth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRun {
    pub trajectory: Vec<TrajectoryPoint>,
    pub state: PowerIterState,
    pub uplink_bits: u64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalized(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = norm(&v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroAggregate);
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

/// `(1/m) X^T X v` for the shard's data matrix `X`, without forming `X^T X`.
pub fn apply_covariance(shard: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for x in shard {
        let proj: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
        for (o, a) in out.iter_mut().zip(x) {
            *o += proj * a;
        }
    }
    let m = shard.len() as f64;
    out.iter_mut().for_each(|o| *o /= m);
    out
}

/// Pooled second-moment matrix applied to `v`.
fn apply_pooled(shards: &[Vec<Vec<f64>>], v: &[f64]) -> Vec<f64> {
    let total: usize = shards.iter().map(Vec::len).sum();
    let mut out = vec![0.0; v.len()];
    for shard in shards {
        let part = apply_covariance(shard, v);
        let w = shard.len() as f64 / total as f64;
        for (o, p) in out.iter_mut().zip(part) {
            *o += w * p;
        }
    }
    out
}

/// Distance to `reference` after choosing the sign of `v` that minimizes it.
pub fn aligned_distance(v: &[f64], reference: &[f64]) -> f64 {
    let (mut plus, mut minus) = (0.0, 0.0);
    for (a, b) in v.iter().zip(reference) {
        plus += (a - b) * (a - b);
        minus += (a + b) * (a + b);
    }
    plus.min(minus).sqrt()
}

pub fn initial_vector(d: usize, seed: u64) -> Result<Vec<f64>> {
    let mut r = rng::stream(seed, Domain::Data, &[u64::MAX - 2]);
    normalized((0..d).map(|_| r.sample(StandardNormal)).collect())
}

/// Top eigenvector of the pooled second-moment matrix by centralized power
/// iteration, run until successive iterates agree to `1e-13` or `max_iter`.
pub fn reference_eigvec(shards: &[Vec<Vec<f64>>], max_iter: usize, seed: u64) -> Result<Vec<f64>> {
    let d = shard_dim(shards)?;
    let mut v = initial_vector(d, seed ^ 0x5245_4645)?;
    for _ in 0..max_iter {
        let next = normalized(apply_pooled(shards, &v))?;
        let delta = aligned_distance(&next, &v);
        v = next;
        if delta < 1e-13 {
            break;
        }
    }
    Ok(v)
}

fn shard_dim(shards: &[Vec<Vec<f64>>]) -> Result<usize> {
    let d = shards
        .first()
        .and_then(|s| s.first())
        .map(Vec::len)
        .ok_or(Error::Empty("dataset shards"))?;
    for s in shards {
        if s.is_empty() {
            return Err(Error::Empty("shard"));
        }
        if let Some(x) = s.iter().find(|x| x.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
    }
    Ok(d)
}

/// Runs `iterations` rounds of distributed power iteration.
///
/// Each client applies its local second-moment matrix to the broadcast vector,
/// normalizes, and uploads the result (quantized); the server averages the
/// decoded vectors and renormalizes.
pub fn distributed_power_iteration(
    shards: &[Vec<Vec<f64>>],
    config: &ProtocolConfig,
    iterations: usize,
    reference: &[f64],
    seed: u64,
) -> Result<PowerRun> {
    check_app_config(config)?;
    let d = shard_dim(shards)?;
    if reference.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: reference.len(),
        });
    }
    let mut v = initial_vector(d, seed)?;
    let per_dim = (shards.len() * d) as f64;
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        cumulative_bits_per_dim: 0.0,
        metric: aligned_distance(&v, reference),
    }];
    let mut uplink = 0u64;

    for it in 0..iterations {
        let rotation = round_rotation(config, d, it as u64)?;
        let replies: Vec<(Vec<f64>, u64)> = shards
            .par_iter()
            .enumerate()
            .map(|(client, shard)| {
                let local = normalized(apply_covariance(shard, &v))?;
                let mut r = rng::stream(
                    config.private_seed_base,
                    Domain::Quantize,
                    &[client as u64, it as u64],
                );
                transmit(&local, config, rotation.as_ref(), &mut r)
            })
            .collect::<Result<_>>()?;

        let mut avg = vec![0.0; d];
        for (y, bits) in &replies {
            uplink += bits;
            for (a, b) in avg.iter_mut().zip(y) {
                *a += b;
            }
        }
        v = normalized(avg)?;
        trajectory.push(TrajectoryPoint {
            iteration: it + 1,
            cumulative_bits_per_dim: uplink as f64 / per_dim,
            metric: aligned_distance(&v, reference),
        });
    }

    let state = PowerIterState {
        distance_to_truth: trajectory.last().unwrap().metric,
        iteration: iterations,
        eigvec: v,
    };
    Ok(PowerRun {
        trajectory,
        state,
        uplink_bits: uplink,
    })
}

/// Spiked-covariance data: `x = sqrt(spike) * g * u + noise`, with `u` a fixed
/// random unit direction, `g` and the noise standard normal. Shards are i.i.d.
pub fn synthetic_spiked(
    n_clients: usize,
    points_per_client: usize,
    d: usize,
    spike: f64,
    seed: u64,
) -> Vec<Vec<Vec<f64>>> {
    let u = initial_vector(d, seed ^ 0x5350_494b).expect("d >= 1");
    let amp = spike.sqrt();
    (0..n_clients as u64)
        .map(|client| {
            let mut r = rng::stream(seed, Domain::Data, &[client]);
            (0..points_per_client)
                .map(|_| {
                    let g: f64 = r.sample(StandardNormal);
                    u.iter()
                        .map(|&ui| amp * g * ui + r.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Data whose second-moment matrix is exactly `diag(spectrum)`.
    fn diagonal_data(spectrum: &[f64]) -> Vec<Vec<f64>> {
        let d = spectrum.len();
        (0..d)
            .map(|j| {
                let mut x = vec![0.0; d];
                x[j] = (d as f64 * spectrum[j]).sqrt();
                x
            })
            .collect()
    }

    #[test]
    fn geometric_convergence_at_eigenvalue_ratio() {
        let spectrum = [1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01];
        let shards = vec![diagonal_data(&spectrum)];
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        let run =
            distributed_power_iteration(&shards, &ProtocolConfig::exact(), 25, &e1, 3).unwrap();
        let ratios: Vec<f64> = run
            .trajectory
            .windows(2)
            .map(|w| w[1].metric / w[0].metric)
            .collect();
        // late iterations are dominated by the second eigenvalue
        for r in &ratios[15..] {
            assert!((r - 0.5).abs() < 2e-3, "ratio {r}");
        }
        assert!(run.state.distance_to_truth < 1e-5);
    }

    #[test]
    fn single_client_matches_centralized() {
        let shards = synthetic_spiked(1, 40, 16, 4.0, 9);
        let reference = reference_eigvec(&shards, 10_000, 1).unwrap();
        let run = distributed_power_iteration(&shards, &ProtocolConfig::exact(), 12, &reference, 2)
            .unwrap();
        let mut v = initial_vector(16, 2).unwrap();
        for (t, p) in run.trajectory.iter().enumerate() {
            assert!(
                (p.metric - aligned_distance(&v, &reference)).abs() < 1e-12,
                "iteration {t}"
            );
            let mut next = apply_covariance(&shards[0], &v);
            let n = norm(&next);
            next.iter_mut().for_each(|x| *x /= n);
            v = next;
        }
    }

    #[test]
    fn reference_is_fixed_point() {
        let shards = synthetic_spiked(3, 50, 20, 5.0, 4);
        let r = reference_eigvec(&shards, 10_000, 7).unwrap();
        let next = normalized(apply_pooled(&shards, &r)).unwrap();
        assert!(aligned_distance(&next, &r) < 1e-10);
        assert!((norm(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantized_iterates_are_unit_norm_and_costed() {
        let shards = synthetic_spiked(5, 30, 32, 4.0, 5);
        let reference = reference_eigvec(&shards, 10_000, 1).unwrap();
        for config in [
            ProtocolConfig::sk(4),
            ProtocolConfig::srk(4),
            ProtocolConfig::svk(8),
        ] {
            let run = distributed_power_iteration(&shards, &config, 6, &reference, 1).unwrap();
            assert!((norm(&run.state.eigvec) - 1.0).abs() < 1e-12);
            assert!(run.uplink_bits > 0);
            let last = run.trajectory.last().unwrap();
            assert_eq!(
                last.cumulative_bits_per_dim,
                run.uplink_bits as f64 / (5.0 * 32.0)
            );
        }
    }

    #[test]
    fn fine_quantization_tracks_exact() {
        let shards = synthetic_spiked(4, 30, 16, 4.0, 6);
        let reference = reference_eigvec(&shards, 10_000, 1).unwrap();
        let exact =
            distributed_power_iteration(&shards, &ProtocolConfig::exact(), 8, &reference, 1)
                .unwrap();
        let fine =
            distributed_power_iteration(&shards, &ProtocolConfig::sk(1 << 15), 8, &reference, 1)
                .unwrap();
        let gap = aligned_distance(&exact.state.eigvec, &fine.state.eigvec);
        assert!(gap < 1e-3, "gap {gap}");
    }

    #[test]
    fn zero_aggregate_aborts() {
        let shards = vec![vec![vec![0.0; 4]; 3]];
        let r = distributed_power_iteration(
            &shards,
            &ProtocolConfig::exact(),
            1,
            &[1.0, 0.0, 0.0, 0.0],
            0,
        );
        assert!(matches!(r, Err(Error::ZeroAggregate)));
    }
}
