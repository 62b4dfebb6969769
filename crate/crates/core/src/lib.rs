//! Federated quantum LSTM simulator.
//!
//! A QLSTM whose gates are variational quantum circuits, simulated exactly on a
//! dense statevector and trained with parameter-shift gradients, is trained by
//! federated averaging across simulated clients on function-approximation
//! tasks. A classical LSTM baseline shares the same interface so both can be
//! compared on rounds-to-convergence and overall local computations.
//!
//! Module map, bottom-up:
//!
//! - [`statevector`]: few-qubit dense simulation and Pauli-Z readout.
//! - [`vqc`]: encoding + variational layers + readout, with exact gradients.
//! - [`seqmodel`]: the six-VQC QLSTM cell and the classical LSTM, with BPTT.
//! - [`optim`]: SGD, RMSprop and Adam.
//! - [`targets`]: Bessel, Struve and sinusoid targets, windowing, client shards.
//! - [`federated`]: client selection, local training, aggregation, rounds.
//! - [`harness`]: convergence detection, metrics, configs, runs and sweeps.

pub mod error;
pub mod federated;
pub mod harness;
pub mod optim;
pub mod seed;
pub mod seqmodel;
pub mod statevector;
pub mod targets;
pub mod vqc;

pub use error::{Error, ErrorKind, Result};
