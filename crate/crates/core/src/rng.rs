//! Deterministic random streams.
//!
//! Every random draw in a protocol run comes from a ChaCha stream whose key is
//! derived from a base seed and a tuple of counters (client, trial, ...). Streams
//! never depend on scheduling, so serial and parallel runs see identical draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams for different purposes disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Quantize = 0x5155_414e,
    Participation = 0x5041_5254,
    Rotation = 0x524f_5441,
    Data = 0x4441_5441,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of counters into a single 64-bit key.
pub fn derive_seed(base: u64, domain: Domain, counters: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ domain as u64);
    for &c in counters {
        h = splitmix64(h ^ splitmix64(c));
    }
    h
}

pub fn stream(base: u64, domain: Domain, counters: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, domain, counters))
}

/// Private rounding randomness for one client in one trial.
pub fn private_stream(base: u64, client_id: u64, trial: u64) -> StreamRng {
    stream(base, Domain::Quantize, &[client_id, trial])
}
