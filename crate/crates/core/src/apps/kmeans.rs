use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{check_app_config, dist_sq, round_rotation, transmit, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::mean::ProtocolConfig;
use crate::rng::{self, Domain};

/// Bits charged per transmitted center for its point count.
pub const COUNT_BITS: u64 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansState {
    pub centers: Vec<Vec<f64>>,
    /// Nearest-center index per point, shard by shard.
    pub assignments: Vec<Vec<usize>>,
    /// Sum of squared distances from every point to its nearest center.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub trajectory: Vec<TrajectoryPoint>,
    pub state: KMeansState,
    pub uplink_bits: u64,
}

pub fn nearest(centers: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = dist_sq(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn objective(shards: &[Vec<Vec<f64>>], centers: &[Vec<f64>]) -> f64 {
    shards
        .iter()
        .flat_map(|s| s.iter())
        .map(|x| nearest(centers, x).1)
        .sum()
}

fn assignments(shards: &[Vec<Vec<f64>>], centers: &[Vec<f64>]) -> Vec<Vec<usize>> {
    shards
        .iter()
        .map(|s| s.iter().map(|x| nearest(centers, x).0).collect())
        .collect()
}

/// `c` distinct pooled points chosen by a seeded draw.
pub fn init_centers(shards: &[Vec<Vec<f64>>], c: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let pooled: Vec<&Vec<f64>> = shards.iter().flat_map(|s| s.iter()).collect();
    if c == 0 || c > pooled.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot pick {c} centers from {} points",
            pooled.len()
        )));
    }
    let mut r = rng::stream(seed, Domain::Data, &[u64::MAX]);
    Ok(index::sample(&mut r, pooled.len(), c)
        .into_iter()
        .map(|i| pooled[i].clone())
        .collect())
}

fn check_shards(shards: &[Vec<Vec<f64>>]) -> Result<usize> {
    let d = shards
        .iter()
        .flat_map(|s| s.first())
        .next()
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

struct ClientUpdate {
    counts: Vec<u64>,
    decoded: Vec<Option<Vec<f64>>>,
    bits: u64,
}

/// Runs `iterations` rounds of distributed Lloyd's algorithm.
///
/// Each round the server broadcasts the centers; every client assigns its
/// points, computes local means for the non-empty clusters and uploads each
/// (quantized) with its point count. The server takes the count-weighted
/// average; a cluster with no points anywhere keeps its center.
pub fn distributed_lloyd(
    shards: &[Vec<Vec<f64>>],
    c: usize,
    config: &ProtocolConfig,
    iterations: usize,
    seed: u64,
) -> Result<LloydRun> {
    check_app_config(config)?;
    let d = check_shards(shards)?;
    let mut centers = init_centers(shards, c, seed)?;
    let per_dim = (shards.len() * c * d) as f64;
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        cumulative_bits_per_dim: 0.0,
        metric: objective(shards, &centers),
    }];
    let mut uplink = 0u64;

    for it in 0..iterations {
        let rotation = round_rotation(config, d, it as u64)?;
        let updates: Vec<ClientUpdate> = shards
            .par_iter()
            .enumerate()
            .map(|(client, shard)| {
                let mut sums = vec![vec![0.0; d]; c];
                let mut counts = vec![0u64; c];
                for x in shard {
                    let (j, _) = nearest(&centers, x);
                    counts[j] += 1;
                    for (s, v) in sums[j].iter_mut().zip(x) {
                        *s += v;
                    }
                }
                let mut decoded = vec![None; c];
                let mut bits = 0;
                for j in 0..c {
                    if counts[j] == 0 {
                        continue;
                    }
                    let local: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
                    let mut r = rng::stream(
                        config.private_seed_base,
                        Domain::Quantize,
                        &[client as u64, it as u64, j as u64],
                    );
                    let (y, b) = transmit(&local, config, rotation.as_ref(), &mut r)?;
                    decoded[j] = Some(y);
                    bits += b + COUNT_BITS;
                }
                Ok(ClientUpdate {
                    counts,
                    decoded,
                    bits,
                })
            })
            .collect::<Result<_>>()?;

        for (j, center) in centers.iter_mut().enumerate() {
            let total: u64 = updates.iter().map(|u| u.counts[j]).sum();
            if total == 0 {
                continue;
            }
            let mut acc = vec![0.0; d];
            for u in &updates {
                if let Some(y) = &u.decoded[j] {
                    let w = u.counts[j] as f64;
                    for (a, v) in acc.iter_mut().zip(y) {
                        *a += w * v;
                    }
                }
            }
            acc.iter_mut().for_each(|a| *a /= total as f64);
            *center = acc;
        }
        uplink += updates.iter().map(|u| u.bits).sum::<u64>();
        trajectory.push(TrajectoryPoint {
            iteration: it + 1,
            cumulative_bits_per_dim: uplink as f64 / per_dim,
            metric: objective(shards, &centers),
        });
    }

    let state = KMeansState {
        assignments: assignments(shards, &centers),
        objective: trajectory.last().unwrap().metric,
        centers,
    };
    Ok(LloydRun {
        trajectory,
        state,
        uplink_bits: uplink,
    })
}

/// Image-like clustered data: `c` sparse non-negative prototypes in `[0, 1]^d`,
/// points are noisy copies with most coordinates exactly zero. Shards are
/// i.i.d. samples of the mixture.
pub fn synthetic_clusters(
    n_clients: usize,
    points_per_client: usize,
    d: usize,
    c: usize,
    seed: u64,
) -> Vec<Vec<Vec<f64>>> {
    let mut proto_rng = rng::stream(seed, Domain::Data, &[u64::MAX - 1]);
    let prototypes: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if proto_rng.gen_bool(0.2) {
                        proto_rng.gen_range(0.5..1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    (0..n_clients as u64)
        .map(|client| {
            let mut r = rng::stream(seed, Domain::Data, &[client]);
            (0..points_per_client)
                .map(|_| {
                    let p = &prototypes[r.gen_range(0..c)];
                    p.iter()
                        .map(|&v| {
                            if v == 0.0 {
                                0.0
                            } else {
                                let noise: f64 = r.sample(StandardNormal);
                                (v + 0.2 * noise).clamp(0.0, 1.0)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}
