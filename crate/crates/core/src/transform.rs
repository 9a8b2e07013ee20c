//! Walsh-Hadamard transform and the randomized rotation `R = H D / sqrt(d)`.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Unnormalized in-place Walsh-Hadamard transform (Sylvester ordering).
///
/// Applying it twice multiplies the input by its length.
pub fn fwht_inplace(values: &mut [f64]) -> Result<()> {
    let n = values.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for block in values.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// A seeded structured rotation, zero-padding inputs to a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSpec {
    seed: u64,
    d_original: usize,
    d_padded: usize,
    diagonal: Vec<f64>,
}

impl RotationSpec {
    pub fn new(seed: u64, d_original: usize) -> Result<Self> {
        if d_original == 0 {
            return Err(Error::Empty("rotation dimension"));
        }
        let d_padded = d_original.next_power_of_two();
        let mut rng = rng::stream(seed, Domain::Rotation, &[]);
        let diagonal = (0..d_padded)
            .map(|_| if rng.next_u64() >> 63 == 0 { 1.0 } else { -1.0 })
            .collect();
        Ok(Self {
            seed,
            d_original,
            d_padded,
            diagonal,
        })
    }

    /// Rotation with an explicit sign pattern; `diagonal.len()` must be a power of two.
    pub fn from_diagonal(d_original: usize, diagonal: Vec<f64>) -> Result<Self> {
        let d_padded = diagonal.len();
        if !d_padded.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(d_padded));
        }
        if d_original == 0 || d_original > d_padded || d_original.next_power_of_two() != d_padded {
            return Err(Error::InvalidConfig(format!(
                "d_original {d_original} does not pad to {d_padded}"
            )));
        }
        if diagonal.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidConfig(
                "diagonal entries must be +1 or -1".into(),
            ));
        }
        Ok(Self {
            seed: 0,
            d_original,
            d_padded,
            diagonal,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn d_original(&self) -> usize {
        self.d_original
    }

    pub fn d_padded(&self) -> usize {
        self.d_padded
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `Z = H D x / sqrt(d_padded)` with `x` zero-padded.
    pub fn rotate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_original {
            return Err(Error::DimensionMismatch {
                expected: self.d_original,
                got: x.len(),
            });
        }
        let mut z = vec![0.0; self.d_padded];
        for ((zj, &xj), &sj) in z.iter_mut().zip(x).zip(&self.diagonal) {
            *zj = xj * sj;
        }
        fwht_inplace(&mut z)?;
        let scale = 1.0 / (self.d_padded as f64).sqrt();
        z.iter_mut().for_each(|v| *v *= scale);
        Ok(z)
    }

    /// `x = D H z / sqrt(d_padded)`, truncated to the original dimension.
    pub fn inverse_rotate(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.d_padded {
            return Err(Error::DimensionMismatch {
                expected: self.d_padded,
                got: z.len(),
            });
        }
        let mut x = z.to_vec();
        fwht_inplace(&mut x)?;
        let scale = 1.0 / (self.d_padded as f64).sqrt();
        x.truncate(self.d_original);
        for (v, &s) in x.iter_mut().zip(&self.diagonal) {
            *v *= scale * s;
        }
        Ok(x)
    }
}
