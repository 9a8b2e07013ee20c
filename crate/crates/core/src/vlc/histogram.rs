//! Enumerative coding of bin-count histograms.
//!
//! A histogram `(h_0, ..., h_{k-1})` with `sum h_r = d` is one of
//! `C(d + k - 1, k - 1)` weak compositions of `d` into `k` parts. Compositions
//! are ordered lexicographically with larger leading parts first, so for
//! `d = 2, k = 2` the order is `(2,0), (1,1), (0,2)`.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountHistogram {
    counts: Vec<u64>,
    d: u64,
}

impl CountHistogram {
    pub fn new(counts: Vec<u64>, d: u64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Empty("histogram"));
        }
        let sum: u64 = counts.iter().sum();
        if sum != d {
            return Err(Error::HistogramSum { sum, d });
        }
        Ok(Self { counts, d })
    }

    pub fn from_symbols(symbols: &[u32], k: u32) -> Result<Self> {
        let mut counts = vec![0u64; k as usize];
        for &s in symbols {
            *counts
                .get_mut(s as usize)
                .ok_or_else(|| Error::Malformed(format!("symbol {s} >= k = {k}")))? += 1;
        }
        Self::new(counts, symbols.len() as u64)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Empirical entropy of the bin distribution in bits per symbol.
    pub fn entropy_bits(&self) -> f64 {
        let d = self.d as f64;
        self.counts
            .iter()
            .filter(|&&h| h > 0)
            .map(|&h| {
                let p = h as f64 / d;
                -p * p.log2()
            })
            .sum()
    }
}

pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of histograms with `k` bins summing to `d`.
pub fn composition_count(d: u64, k: u64) -> BigUint {
    if k == 0 {
        return if d == 0 {
            BigUint::one()
        } else {
            BigUint::zero()
        };
    }
    binomial(d + k - 1, k - 1)
}

/// Bits in the serialized rank, `ceil(log2 C(d + k - 1, k - 1))`.
pub fn rank_width(d: u64, k: u64) -> u64 {
    let c = composition_count(d, k);
    if c.is_zero() {
        0
    } else {
        (c - 1u32).bits()
    }
}

// Compositions of `m` into `j + 1` parts whose first part exceeds `h`.
fn leading_above(m: u64, h: u64, j: u64) -> BigUint {
    if h >= m {
        BigUint::zero()
    } else {
        binomial(m - h - 1 + j, j)
    }
}

pub fn histogram_rank(h: &CountHistogram) -> BigUint {
    let k = h.counts.len();
    let mut rank = BigUint::zero();
    let mut m = h.d;
    for (i, &c) in h.counts.iter().enumerate().take(k - 1) {
        let j = (k - i - 1) as u64;
        rank += leading_above(m, c, j);
        m -= c;
    }
    rank
}

pub fn histogram_unrank(rank: &BigUint, d: u64, k: usize) -> Result<CountHistogram> {
    if k == 0 {
        return Err(Error::Empty("histogram"));
    }
    if *rank >= composition_count(d, k as u64) {
        return Err(Error::RankOutOfRange);
    }
    let mut rank = rank.clone();
    let mut counts = Vec::with_capacity(k);
    let mut m = d;
    for i in 0..k - 1 {
        let j = (k - i - 1) as u64;
        // smallest h with leading_above(m, h, j) <= rank; the count is decreasing in h
        let (mut lo, mut hi) = (0u64, m);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if leading_above(m, mid, j) <= rank {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        rank -= leading_above(m, lo, j);
        counts.push(lo);
        m -= lo;
    }
    counts.push(m);
    CountHistogram::new(counts, d)
}

pub fn write_rank(w: &mut BitWriter, rank: &BigUint, width: u64) {
    for i in (0..width).rev() {
        w.push_bit(rank.bit(i));
    }
}

pub fn read_rank(r: &mut BitReader<'_>, width: u64) -> Result<BigUint> {
    let mut rank = BigUint::zero();
    for i in (0..width).rev() {
        if r.read_bit()? {
            rank.set_bit(i, true);
        }
    }
    Ok(rank)
}
