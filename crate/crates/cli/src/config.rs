//! Run settings: spec file contents merged with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use dme_core::data::DataSource;
use dme_core::mean::{Protocol, ProtocolConfig, ScalarPrecision};
use dme_core::rng::{self, Domain};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_N: usize = 16;
pub const DEFAULT_D: usize = 128;

/// Flags shared by every subcommand. Each one has a spec-file key of the same
/// name (`points-per-client` becomes `points_per_client`).
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Protocol(s): exact, sb, sk, srk, svk. Comma-separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    pub protocol: Vec<Protocol>,
    /// Number of quantization levels. Comma-separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<u32>,
    /// Number of clients.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Client participation probability.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed; falls back to DME_SEED, then the spec file, then 1.
    #[arg(long, env = "DME_SEED")]
    pub seed: Option<u64>,
    /// gaussian, sphere, binary-worst-case (alias lemma4), unbalanced, or file:PATH.
    #[arg(long)]
    pub source: Option<String>,
    /// TOML spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output CSV path (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scale input vectors into the unit ball.
    #[arg(long)]
    pub normalize: Option<bool>,
    /// Header scalar precision: f64 or f32.
    #[arg(long)]
    pub precision: Option<String>,
    /// Rounds for kmeans and poweriter.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Number of centers for kmeans.
    #[arg(long)]
    pub centers: Option<usize>,
    /// Points held by each client in the synthetic app datasets.
    #[arg(long)]
    pub points_per_client: Option<usize>,
    /// Spike strength of the synthetic poweriter dataset.
    #[arg(long)]
    pub spike: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    protocol: Option<OneOrMany<String>>,
    k: Option<OneOrMany<u32>>,
    n: Option<usize>,
    d: Option<usize>,
    p: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    source: Option<String>,
    out: Option<PathBuf>,
    normalize: Option<bool>,
    precision: Option<String>,
    iterations: Option<usize>,
    centers: Option<usize>,
    points_per_client: Option<usize>,
    spike: Option<f64>,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub protocols: Vec<Protocol>,
    pub ks: Vec<u32>,
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub trials: usize,
    pub seed: u64,
    pub source: DataSource,
    pub out: Option<PathBuf>,
    pub normalize: bool,
    pub precision: ScalarPrecision,
    pub iterations: usize,
    pub centers: usize,
    pub points_per_client: usize,
    pub spike: f64,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn parse_precision(s: &str) -> Result<ScalarPrecision, CliError> {
    match s {
        "f64" => Ok(ScalarPrecision::F64),
        "f32" => Ok(ScalarPrecision::F32),
        other => Err(config_err(format!("unknown precision {other:?}"))),
    }
}

impl Settings {
    /// Merges flags over the spec file (if any) over defaults.
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let file = match &args.spec {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let protocols = if !args.protocol.is_empty() {
            args.protocol.clone()
        } else {
            file.protocol
                .map(OneOrMany::into_vec)
                .unwrap_or_else(|| vec!["sk".into()])
                .iter()
                .map(|s| s.parse().map_err(|e| config_err(format!("{e}"))))
                .collect::<Result<_, _>>()?
        };
        let ks = if !args.k.is_empty() {
            args.k.clone()
        } else {
            file.k.map(OneOrMany::into_vec).unwrap_or_else(|| vec![2])
        };
        let source = args
            .source
            .clone()
            .or(file.source)
            .unwrap_or_else(|| "gaussian".into());
        let precision = args.precision.clone().or(file.precision);
        let source: DataSource = source.parse().map_err(|e| config_err(format!("{e}")))?;
        // File datasets take their shape from the file unless given explicitly.
        let (n_default, d_default) = match source {
            DataSource::File(_) => (0, 0),
            _ => (DEFAULT_N, DEFAULT_D),
        };
        let s = Settings {
            protocols,
            ks,
            n: args.n.or(file.n).unwrap_or(n_default),
            d: args.d.or(file.d).unwrap_or(d_default),
            p: args.p.or(file.p).unwrap_or(1.0),
            trials: args
                .trials
                .or(file.trials)
                .unwrap_or(dme_core::harness::DEFAULT_TRIALS),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            source,
            out: args.out.clone().or(file.out),
            normalize: args.normalize.or(file.normalize).unwrap_or(false),
            precision: precision
                .as_deref()
                .map(parse_precision)
                .transpose()?
                .unwrap_or(ScalarPrecision::F64),
            iterations: args.iterations.or(file.iterations).unwrap_or(10),
            centers: args.centers.or(file.centers).unwrap_or(10),
            points_per_client: args
                .points_per_client
                .or(file.points_per_client)
                .unwrap_or(100),
            spike: args.spike.or(file.spike).unwrap_or(4.0),
        };
        if s.ks.is_empty() || s.protocols.is_empty() {
            return Err(config_err("at least one protocol and one k are required"));
        }
        Ok(s)
    }

    /// One protocol configuration per (protocol, k) pair. Protocols that do not
    /// use k (exact, sb) appear once.
    pub fn configs(&self) -> Result<Vec<ProtocolConfig>, CliError> {
        let rotation_seed = rng::derive_seed(self.seed, Domain::Rotation, &[]);
        let private_seed = rng::derive_seed(self.seed, Domain::Quantize, &[]);
        let mut out = Vec::new();
        for &protocol in &self.protocols {
            let ks: &[u32] = match protocol {
                Protocol::Exact | Protocol::Sb => &[2],
                _ => &self.ks,
            };
            for &k in ks {
                let c = ProtocolConfig::new(protocol, k)
                    .with_sampling(self.p)
                    .with_seeds(rotation_seed, private_seed)
                    .with_precision(self.precision);
                c.validate()?;
                out.push(c);
            }
        }
        Ok(out)
    }

    /// The single configuration for commands that take exactly one.
    pub fn single_config(&self) -> Result<ProtocolConfig, CliError> {
        let mut configs = self.configs()?;
        if configs.len() != 1 {
            return Err(config_err(format!(
                "this command takes one protocol and one k, got {} combinations",
                configs.len()
            )));
        }
        Ok(configs.remove(0))
    }
}
