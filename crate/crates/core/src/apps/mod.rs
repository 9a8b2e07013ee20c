//! Distributed Lloyd's k-means and distributed power iteration on top of the
//! codecs. Only the uplink (client to server) is costed; the broadcast of the
//! current model is free.

pub mod kmeans;
pub mod power;

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mean::{Protocol, ProtocolConfig};
use crate::quant;
use crate::transform::RotationSpec;

pub use kmeans::{distributed_lloyd, KMeansState, LloydRun};
pub use power::{distributed_power_iteration, reference_eigvec, PowerIterState, PowerRun};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    /// Uplink bits so far, per client per transmitted coordinate slot.
    pub cumulative_bits_per_dim: f64,
    pub metric: f64,
}

pub(crate) fn check_app_config(config: &ProtocolConfig) -> Result<()> {
    config.validate()?;
    if config.sampling_p != 1.0 {
        return Err(Error::InvalidConfig(
            "the application drivers run with full client participation".into(),
        ));
    }
    Ok(())
}

pub(crate) fn round_rotation(
    config: &ProtocolConfig,
    d: usize,
    iteration: u64,
) -> Result<Option<RotationSpec>> {
    match config.protocol {
        Protocol::Srk => crate::harness::rotation_for(config, d, iteration).map(Some),
        _ => Ok(None),
    }
}

/// Client encodes, server parses the bytes and decodes back into input space.
/// Returns the reconstruction and the message size in bits.
pub(crate) fn transmit<R: Rng + ?Sized>(
    x: &[f64],
    config: &ProtocolConfig,
    rotation: Option<&RotationSpec>,
    rng: &mut R,
) -> Result<(Vec<f64>, u64)> {
    let bytes = quant::encode(x, config, rotation, rng)?.into_bytes();
    let msg = quant::parse(&bytes, config)?;
    let y = quant::decode(&msg)?;
    let y = match rotation {
        Some(r) => r.inverse_rotate(&y)?,
        None => y,
    };
    Ok((y, bytes.len() as u64 * 8))
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// CSV with columns `iteration, cumulative_bits_per_dim, metric`.
pub fn write_trajectory<W: Write>(out: W, trajectory: &[TrajectoryPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "cumulative_bits_per_dim", "metric"])?;
    for p in trajectory {
        w.write_record([
            p.iteration.to_string(),
            crate::harness::fmt_float(p.cumulative_bits_per_dim),
            crate::harness::fmt_float(p.metric),
        ])?;
    }
    w.flush()?;
    Ok(())
}
