//! Input sources: synthetic generators and the dataset file formats.
//!
//! Dataset files hold one client vector per row, either as CSV (no header,
//! comma-separated floats) or as a little-endian binary file:
//! `b"DMEV"`, `n: u32`, `d: u32`, then `n * d` f64 values in row order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean::ClientVector;
use crate::rng::{self, Domain};

const BINARY_MAGIC: &[u8; 4] = b"DMEV";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Rows read from a dataset file.
    File(PathBuf),
    /// i.i.d. standard normal coordinates.
    SyntheticGaussian,
    /// Uniform on the unit sphere.
    SyntheticSphere,
    /// Every client holds `(1/sqrt 2, -1/sqrt 2, 0, ..., 0)`.
    #[serde(rename = "binary-worst-case", alias = "lemma4")]
    BinaryWorstCase,
    /// Standard normal coordinates except the last, drawn from N(100, 1).
    UnbalancedLastDim,
}

impl std::str::FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "synthetic-gaussian" | "gaussian" => DataSource::SyntheticGaussian,
            "synthetic-sphere" | "sphere" => DataSource::SyntheticSphere,
            "binary-worst-case" | "lemma4" => DataSource::BinaryWorstCase,
            "unbalanced-last-dim" | "unbalanced" => DataSource::UnbalancedLastDim,
            other => match other.strip_prefix("file:") {
                Some(path) => DataSource::File(PathBuf::from(path)),
                None => {
                    return Err(Error::InvalidConfig(format!("unknown data source {s:?}")));
                }
            },
        })
    }
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Generates (or loads) `n` client vectors of dimension `d`.
///
/// For file sources `n` and `d` must match the file unless zero, in which case
/// the file's shape is used.
pub fn generate(source: &DataSource, n: usize, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if let DataSource::File(path) = source {
        let rows = read_dataset(path)?;
        let fd = rows[0].len();
        if (n != 0 && n != rows.len()) || (d != 0 && d != fd) {
            return Err(Error::InvalidConfig(format!(
                "dataset has shape {}x{fd}, expected {n}x{d}",
                rows.len()
            )));
        }
        return Ok(rows);
    }
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("n and d must be at least 1".into()));
    }
    let rows = (0..n as u64)
        .map(|i| {
            let mut r = rng::stream(seed, Domain::Data, &[i]);
            match source {
                DataSource::SyntheticGaussian => (0..d).map(|_| r.sample(StandardNormal)).collect(),
                DataSource::SyntheticSphere => {
                    unit((0..d).map(|_| r.sample(StandardNormal)).collect())
                }
                DataSource::BinaryWorstCase => {
                    let mut v = vec![0.0; d];
                    v[0] = std::f64::consts::FRAC_1_SQRT_2;
                    if d > 1 {
                        v[1] = -std::f64::consts::FRAC_1_SQRT_2;
                    }
                    v
                }
                DataSource::UnbalancedLastDim => {
                    let mut v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
                    v[d - 1] = r.sample(Normal::new(100.0, 1.0).unwrap());
                    v
                }
                DataSource::File(_) => unreachable!(),
            }
        })
        .collect();
    Ok(rows)
}

/// Scales rows with norm above one onto the unit sphere.
pub fn clamp_to_unit_ball(rows: &mut [Vec<f64>]) {
    for row in rows {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

pub fn to_clients(rows: Vec<Vec<f64>>) -> Result<Vec<ClientVector>> {
    crate::mean::clients_from_rows(rows)
}

pub fn read_dataset(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut file = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    let is_binary = file.read_exact(&mut magic).is_ok() && &magic == BINARY_MAGIC;
    drop(file);
    let rows = if is_binary {
        read_binary(path)?
    } else {
        read_csv(path)?
    };
    if rows.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let d = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    Ok(rows)
}

fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Malformed(format!("row {}: {f:?} is not a number", line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_binary(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 {
        return Err(Error::Truncated("dataset header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != n * d * 8 {
        return Err(Error::Malformed(format!(
            "binary dataset body has {} bytes, expected {}",
            body.len(),
            n * d * 8
        )));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>()
        .chunks(d.max(1))
        .map(<[f64]>::to_vec)
        .collect())
}

pub fn write_csv_dataset(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_binary_dataset(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let d = rows.first().map_or(0, Vec::len);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(rows.len() as u32).to_le_bytes())?;
    w.write_all(&(d as u32).to_le_bytes())?;
    for row in rows {
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
