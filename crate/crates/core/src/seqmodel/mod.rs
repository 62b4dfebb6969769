//! Sequence-to-one regression models: the six-VQC QLSTM and the classical LSTM.

mod lstm;
pub mod params;
mod qlstm;

pub use lstm::ClassicalLstmModel;
pub use params::{ParamSet, Tensor, PARAMS_FORMAT};
pub use qlstm::{CellState, QlstmDims, QlstmGradient, QlstmModel, VQC_NAMES};

use crate::error::{Error, Result};

/// What the federated layer needs from a model.
///
/// Sequences are row-major `[T][input_dim]` slices; the loss is the squared
/// error of the final-timestep prediction.
pub trait SequenceModel: Clone + Send + Sync {
    fn input_dim(&self) -> usize;

    fn forward_sequence(&self, seq: &[f64]) -> Result<f64>;

    /// `((y_T - target)^2, d loss / d params)`.
    fn loss_and_grad(&self, seq: &[f64], target: f64) -> Result<(f64, ParamSet)>;

    fn params(&self) -> ParamSet;

    fn load_params(&mut self, params: &ParamSet) -> Result<()>;

    fn num_params(&self) -> usize;

    fn loss(&self, seq: &[f64], target: f64) -> Result<f64> {
        let d = self.forward_sequence(seq)? - target;
        Ok(d * d)
    }
}

pub(crate) fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

pub(crate) fn split_sequence(seq: &[f64], input_dim: usize) -> Result<std::slice::ChunksExact<'_, f64>> {
    if seq.is_empty() || input_dim == 0 || !seq.len().is_multiple_of(input_dim) {
        return Err(Error::shape(format!(
            "sequence of length {} is not a non-empty [T][{input_dim}] matrix",
            seq.len()
        )));
    }
    Ok(seq.chunks_exact(input_dim))
}
