//! Simulated rounds of n clients and one server, repeated over trials.
//!
//! Every client message is serialized and the server decodes from the bytes;
//! communication cost is always the serialized length.

use std::io::Write;

use rayon::prelude::*;

use crate::data::{self, DataSource};
use crate::error::{Error, Result};
use crate::mean::{self, ClientVector, EstimationReport, MeanEstimate, Protocol, ProtocolConfig};
use crate::quant;
use crate::rng::{self, Domain};
use crate::sampling::{self, SamplingPlan};
use crate::transform::RotationSpec;

pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub estimate: MeanEstimate,
    /// Serialized bits sent by each client (0 when it did not participate).
    pub bits_per_client: Vec<u64>,
}

impl RoundOutcome {
    pub fn total_bits(&self) -> u64 {
        self.bits_per_client.iter().sum()
    }
}

/// Rotation used in `trial` under `config`.
pub fn rotation_for(config: &ProtocolConfig, d: usize, trial: u64) -> Result<RotationSpec> {
    let seed = if config.rotation_per_trial {
        rng::derive_seed(config.rotation_seed, Domain::Rotation, &[trial])
    } else {
        config.rotation_seed
    };
    RotationSpec::new(seed, d)
}

/// One estimation round: encode at every participating client, serialize,
/// decode at the server and aggregate.
pub fn run_round(
    vectors: &[ClientVector],
    config: &ProtocolConfig,
    trial: u64,
) -> Result<RoundOutcome> {
    config.validate()?;
    let first = vectors.first().ok_or(Error::Empty("client set"))?;
    let d = first.dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.dim(),
        });
    }
    let rotation = match config.protocol {
        Protocol::Srk => Some(rotation_for(config, d, trial)?),
        _ => None,
    };
    let plan = SamplingPlan::draw(
        config.sampling_p,
        vectors.len(),
        config.private_seed_base,
        trial,
    )?;

    let mut bits_per_client = vec![0u64; vectors.len()];
    let mut decoded = Vec::with_capacity(plan.participants());
    for (i, client) in vectors.iter().enumerate() {
        if !plan.participation[i] {
            continue;
        }
        let mut rng = rng::private_stream(config.private_seed_base, client.client_id, trial);
        let bytes =
            quant::encode(&client.values, config, rotation.as_ref(), &mut rng)?.into_bytes();
        bits_per_client[i] = bytes.len() as u64 * 8;

        // server side
        let msg = quant::parse(&bytes, config)?;
        if let (Some(rot), Some(seed)) = (rotation.as_ref(), msg.rotation_seed) {
            if rot.seed() != seed {
                return Err(Error::Malformed(
                    "client used a different rotation seed".into(),
                ));
            }
        }
        decoded.push((client.client_id, quant::decode(&msg)?));
    }
    let estimate = sampling::sampled_estimate(
        &decoded,
        vectors.len(),
        config.sampling_p,
        d,
        rotation.as_ref(),
        config.protocol,
    )?;
    Ok(RoundOutcome {
        estimate,
        bits_per_client,
    })
}

/// Analytic bound for a config, with client sampling folded in.
pub fn bound_for(config: &ProtocolConfig, vectors: &[ClientVector]) -> Result<(f64, Option<f64>)> {
    let p = config.sampling_p;
    let bound = sampling::sampled_bound(mean::analytic_bound(config, vectors)?, p, vectors);
    let unpadded = match config.protocol {
        Protocol::Srk => Some(sampling::sampled_bound(
            mean::analytic_bound_unpadded(config, vectors)?,
            p,
            vectors,
        )),
        _ => None,
    };
    Ok((bound, unpadded))
}

/// Runs `trials` rounds of one config and summarizes them.
pub fn evaluate(
    vectors: &[ClientVector],
    config: &ProtocolConfig,
    trials: usize,
) -> Result<EstimationReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let truth = mean::exact_mean(vectors)?;
    let rounds: Vec<(f64, RoundOutcome)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let out = run_round(vectors, config, t)?;
            let err = mean::squared_error(&out.estimate, &truth)?;
            Ok((err, out))
        })
        .collect::<Result<_>>()?;

    let n = vectors.len();
    let mut per_client_bits = vec![0u64; n];
    let mut err_sum = 0.0;
    let mut err_sq_sum = 0.0;
    let mut max_total = 0u64;
    for (err, out) in &rounds {
        err_sum += err;
        err_sq_sum += err * err;
        for (acc, b) in per_client_bits.iter_mut().zip(&out.bits_per_client) {
            *acc += b;
        }
        max_total = max_total.max(out.total_bits());
    }
    let t = trials as f64;
    let mse = err_sum / t;
    let var = if trials > 1 {
        ((err_sq_sum - t * mse * mse) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    let total_bits: u64 = per_client_bits.iter().sum();
    let (analytic_bound, analytic_bound_unpadded) = bound_for(config, vectors)?;
    Ok(EstimationReport {
        config: *config,
        n,
        d: truth.dim(),
        estimate: rounds.into_iter().last().unwrap().1.estimate,
        empirical_mse: mse,
        mse_std_error: (var / t).sqrt(),
        total_bits,
        per_client_bits,
        mean_total_bits: total_bits as f64 / t,
        max_total_bits: max_total,
        analytic_bound,
        analytic_bound_unpadded,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub n: usize,
    pub d: usize,
    pub configs: Vec<ProtocolConfig>,
    pub trials: usize,
    pub data_seed: u64,
    /// Scale inputs into the unit ball before running.
    pub normalize: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !matches!(self.source, DataSource::File(_)) && (self.n == 0 || self.d == 0) {
            return Err(Error::InvalidConfig("n and d must be at least 1".into()));
        }
        if self.configs.is_empty() {
            return Err(Error::InvalidConfig("no protocols configured".into()));
        }
        self.configs.iter().try_for_each(ProtocolConfig::validate)
    }

    pub fn vectors(&self) -> Result<Vec<ClientVector>> {
        let mut rows = data::generate(&self.source, self.n, self.d, self.data_seed)?;
        if self.normalize {
            data::clamp_to_unit_ball(&mut rows);
        }
        data::to_clients(rows)
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<EstimationReport>> {
    spec.validate()?;
    let vectors = spec.vectors()?;
    spec.configs
        .iter()
        .map(|c| evaluate(&vectors, c, spec.trials))
        .collect()
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "protocol",
    "d",
    "n",
    "k",
    "p",
    "trials",
    "empirical_mse",
    "bound",
    "mean_bits_per_dim",
    "total_bits",
    "mse_std_error",
];

/// Float formatting for reports: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes one CSV row per report. `total_bits` is the mean cost of one round.
pub fn write_reports<W: Write>(out: W, reports: &[EstimationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for r in reports {
        w.write_record([
            r.config.protocol.name().to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.config.k.to_string(),
            fmt_float(r.config.sampling_p),
            r.trials.to_string(),
            fmt_float(r.empirical_mse),
            fmt_float(r.analytic_bound),
            fmt_float(r.mean_bits_per_dim()),
            fmt_float(r.mean_total_bits),
            fmt_float(r.mse_std_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}
