//! Target functions, sliding-window datasets and per-client shards.

mod dataset;
mod special;

pub use dataset::{
    build_dataset, partition, ClientShard, Normalization, PartitionConfig, Sampling, SequenceDataset,
    SequencePair, TargetFunction, TargetSpec,
};
pub use special::{bessel_j, struve_h};

/// `amplitude * sin(frequency * x + phase)`.
pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64, x: f64) -> f64 {
    amplitude * (frequency * x + phase).sin()
}
