use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{bessel_j, sinusoid, struve_h};
use crate::error::{Error, Result};
use crate::seed::{rng_for, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetFunction {
    BesselJ { order: f64 },
    StruveH { order: f64 },
    Sinusoid { amplitude: f64, frequency: f64, phase: f64 },
}

impl TargetFunction {
    pub fn eval(&self, x: f64) -> Result<f64> {
        match *self {
            TargetFunction::BesselJ { order } => bessel_j(order, x),
            TargetFunction::StruveH { order } => struve_h(order, x),
            TargetFunction::Sinusoid { amplitude, frequency, phase } => Ok(sinusoid(amplitude, frequency, phase, x)),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            TargetFunction::BesselJ { order } => format!("bessel_j{order}"),
            TargetFunction::StruveH { order } => format!("struve_h{order}"),
            TargetFunction::Sinusoid { .. } => "sinusoid".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    #[serde(flatten)]
    pub function: TargetFunction,
    pub x_min: f64,
    pub x_max: f64,
    pub num_points: usize,
}

impl TargetSpec {
    /// J_2 on [0, 20].
    pub fn bessel() -> Self {
        Self { function: TargetFunction::BesselJ { order: 2.0 }, x_min: 0.0, x_max: 20.0, num_points: 1000 }
    }

    /// sin(x) on [0, 4 pi].
    pub fn sinusoid() -> Self {
        Self {
            function: TargetFunction::Sinusoid { amplitude: 1.0, frequency: 1.0, phase: 0.0 },
            x_min: 0.0,
            x_max: 4.0 * std::f64::consts::PI,
            num_points: 1000,
        }
    }

    /// H_0 on [0, 20].
    pub fn struve() -> Self {
        Self { function: TargetFunction::StruveH { order: 0.0 }, x_min: 0.0, x_max: 20.0, num_points: 1000 }
    }

    pub fn validate(&self, seq_len: usize) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(Error::config(format!("target domain [{}, {}] is empty", self.x_min, self.x_max)));
        }
        if seq_len == 0 {
            return Err(Error::config("seq_len must be at least 1"));
        }
        if self.num_points < seq_len + 1 {
            return Err(Error::config(format!(
                "num_points {} must exceed seq_len {seq_len}",
                self.num_points
            )));
        }
        match self.function {
            TargetFunction::BesselJ { order } | TargetFunction::StruveH { order } if !(order >= 0.0) => {
                Err(Error::config(format!("function order {order} must be >= 0")))
            }
            _ => Ok(()),
        }
    }

    /// Uniform grid of `num_points` abscissae spanning `[x_min, x_max]`.
    pub fn grid_point(&self, index: usize) -> f64 {
        let step = (self.x_max - self.x_min) / (self.num_points - 1) as f64;
        self.x_min + step * index as f64
    }
}

/// Min-max map of raw function values onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn normalize(&self, v: f64) -> f64 {
        2.0 * (v - self.min) / (self.max - self.min) - 1.0
    }

    pub fn denormalize(&self, n: f64) -> f64 {
        0.5 * (n + 1.0) * (self.max - self.min) + self.min
    }

    /// `n = scale * v + offset`.
    pub fn scale(&self) -> f64 {
        2.0 / (self.max - self.min)
    }

    pub fn offset(&self) -> f64 {
        -1.0 - self.min * self.scale()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePair {
    pub inputs: Vec<f64>,
    pub target: f64,
    /// Grid index of the target sample.
    pub target_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub spec: TargetSpec,
    pub seq_len: usize,
    pub normalization: Normalization,
    /// Normalized function values on the grid.
    pub values: Vec<f64>,
    pub pairs: Vec<SequencePair>,
}

/// Evaluates the target on its grid, normalizes to `[-1, 1]`, and emits every
/// window `(f_i .. f_{i+seq_len-1}) -> f_{i+seq_len}`.
pub fn build_dataset(spec: &TargetSpec, seq_len: usize) -> Result<SequenceDataset> {
    spec.validate(seq_len)?;
    let raw = (0..spec.num_points).map(|i| spec.function.eval(spec.grid_point(i))).collect::<Result<Vec<f64>>>()?;
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max - min > 0.0) || !(max - min).is_finite() {
        return Err(Error::config(format!("target {} has degenerate range [{min}, {max}]", spec.function.label())));
    }
    let normalization = Normalization { min, max };
    let values: Vec<f64> = raw.iter().map(|&v| normalization.normalize(v)).collect();
    let pairs = values
        .windows(seq_len + 1)
        .enumerate()
        .map(|(i, w)| SequencePair { inputs: w[..seq_len].to_vec(), target: w[seq_len], target_index: i + seq_len })
        .collect();
    Ok(SequenceDataset { spec: *spec, seq_len, normalization, values, pairs })
}

impl SequenceDataset {
    /// Writes `x0..x{L-1},target,grid_index` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.seq_len).map(|i| format!("x{i}")).collect();
        header.push("target".into());
        header.push("grid_index".into());
        w.write_record(&header)?;
        for p in &self.pairs {
            let mut row: Vec<String> = p.inputs.iter().map(|v| v.to_string()).collect();
            row.push(p.target.to_string());
            row.push(p.target_index.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub num_clients: usize,
    pub per_client: usize,
    /// Fraction of each shard used for training.
    pub split: f64,
    pub seed: u64,
    pub sampling: Sampling,
    /// Client `k` draws only from the `k`-th contiguous slice of the window pool.
    pub disjoint_ranges: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub id: usize,
    pub train: Vec<SequencePair>,
    pub test: Vec<SequencePair>,
}

/// Number of training samples for a shard of `n` windows.
pub fn train_count(n: usize, split: f64) -> usize {
    (split * n as f64).round() as usize
}

/// Draws `per_client` windows per client from the global pool and splits each
/// shard into train/test.
pub fn partition(dataset: &SequenceDataset, cfg: &PartitionConfig) -> Result<Vec<ClientShard>> {
    if cfg.num_clients == 0 {
        return Err(Error::config("at least one client is required"));
    }
    if !(cfg.split > 0.0 && cfg.split < 1.0) {
        return Err(Error::config(format!("split {} must lie in (0, 1)", cfg.split)));
    }
    let n_train = train_count(cfg.per_client, cfg.split);
    if n_train == 0 || n_train >= cfg.per_client {
        return Err(Error::config(format!(
            "{} samples at split {} leave an empty train or test set",
            cfg.per_client, cfg.split
        )));
    }
    let pool = &dataset.pairs;
    let slice_len = if cfg.disjoint_ranges { pool.len() / cfg.num_clients } else { pool.len() };

    (0..cfg.num_clients)
        .map(|id| {
            let start = if cfg.disjoint_ranges { id * slice_len } else { 0 };
            let local = &pool[start..start + slice_len];
            if local.is_empty() {
                return Err(Error::config(format!("client {id} has an empty window pool")));
            }
            let mut rng = rng_for(cfg.seed, &[stream::PARTITION, id as u64]);
            let picks: Vec<usize> = match cfg.sampling {
                Sampling::WithReplacement => (0..cfg.per_client).map(|_| rng.gen_range(0..local.len())).collect(),
                Sampling::WithoutReplacement => {
                    if cfg.per_client > local.len() {
                        return Err(Error::config(format!(
                            "client {id} needs {} distinct windows, pool has {}",
                            cfg.per_client,
                            local.len()
                        )));
                    }
                    index::sample(&mut rng, local.len(), cfg.per_client).into_vec()
                }
            };
            let mut samples: Vec<SequencePair> = picks.into_iter().map(|i| local[i].clone()).collect();
            let test = samples.split_off(n_train);
            Ok(ClientShard { id, train: samples, test })
        })
        .collect()
}
