//! Experiment configuration.
//!
//! Config files are TOML documents that mirror [`ExperimentConfig`] field for
//! field; omitted fields take the default-setup values. Example:
//!
//! ```toml
//! model_kind = "qlstm"          # or "classical_lstm"
//! num_clients = 5
//! participation = 5
//! per_client = 300
//! local_epochs = 1
//! batch_size = 4
//! max_rounds = 60
//! master_seed = 7
//!
//! [target]
//! kind = "bessel_j"             # "struve_h" (order) or "sinusoid" (amplitude, frequency, phase)
//! order = 2.0
//! x_min = 0.0
//! x_max = 20.0
//! num_points = 1000
//!
//! [optimizer]
//! optimizer = "rmsprop"         # "sgd", "rmsprop", "adam"
//! lr = 0.01
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::convergence::{ConvergenceCriterion, ThresholdMode};
use crate::error::{Error, Result, ResultExt};
use crate::federated::FederatedConfig;
use crate::optim::OptimizerConfig;
use crate::seqmodel::QlstmDims;
use crate::targets::{PartitionConfig, Sampling, TargetSpec};
use crate::vqc::Entangler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Qlstm,
    ClassicalLstm,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Qlstm => "qlstm",
            ModelKind::ClassicalLstm => "classical_lstm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form name carried into reports and sweep tables.
    pub label: Option<String>,
    pub target: TargetSpec,
    pub model_kind: ModelKind,
    pub num_clients: usize,
    pub participation: usize,
    pub num_qubits: usize,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub entangler: Entangler,
    pub classical_hidden_dim: usize,
    pub per_client: usize,
    pub split: f64,
    pub sampling: Sampling,
    pub disjoint_ranges: bool,
    pub seq_len: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub one_batch_per_epoch: bool,
    pub optimizer: OptimizerConfig,
    pub max_rounds: usize,
    pub window_width: usize,
    pub margin: f64,
    pub std_threshold: f64,
    pub threshold_mode: ThresholdMode,
    pub stop_on_convergence: bool,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// The default setup: 5 clients, 4-qubit QLSTM, 3000 samples per client
    /// split 67/33, RMSprop at lr 0.01, batch 4, window 5 with a 1% margin.
    fn default() -> Self {
        Self {
            label: None,
            target: TargetSpec::bessel(),
            model_kind: ModelKind::Qlstm,
            num_clients: 5,
            participation: 5,
            num_qubits: 4,
            num_layers: 2,
            hidden_dim: 3,
            entangler: Entangler::Ring,
            classical_hidden_dim: 4,
            per_client: 3000,
            split: 0.67,
            sampling: Sampling::WithReplacement,
            disjoint_ranges: false,
            seq_len: 4,
            local_epochs: 1,
            batch_size: 4,
            one_batch_per_epoch: false,
            optimizer: OptimizerConfig::default(),
            max_rounds: 100,
            window_width: 5,
            margin: 0.01,
            std_threshold: 0.01,
            threshold_mode: ThresholdMode::Relative,
            stop_on_convergence: true,
            master_seed: 0,
            output: None,
        }
    }
}

impl ExperimentConfig {
    /// Default setup scaled down for desk runs: 300 samples per client, 60 rounds.
    pub fn desk() -> Self {
        Self { per_client: 300, max_rounds: 60, ..Self::default() }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::config(format!("unknown preset {other:?} (expected default or desk)"))),
        }
    }

    pub fn with_target(mut self, target: TargetSpec) -> Self {
        self.target = target;
        self
    }

    pub fn with_model(mut self, kind: ModelKind) -> Self {
        self.model_kind = kind;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::from).context(|| path.display().to_string())?;
        Self::from_toml_str(&text).context(|| path.display().to_string())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            format!(
                "{}-{}-k{}-e{}",
                self.model_kind,
                self.target.function.label(),
                self.num_clients,
                self.local_epochs
            )
        })
    }

    pub fn qlstm_dims(&self) -> QlstmDims {
        QlstmDims {
            input_dim: 1,
            hidden_dim: self.hidden_dim,
            num_qubits: self.num_qubits,
            num_layers: self.num_layers,
            entangler: self.entangler,
        }
    }

    pub fn criterion(&self) -> Result<ConvergenceCriterion> {
        ConvergenceCriterion::new(self.window_width, self.margin, self.std_threshold, self.threshold_mode)
    }

    pub fn federated(&self) -> FederatedConfig {
        FederatedConfig {
            rounds: self.max_rounds,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
            participation: self.participation,
            one_batch_per_epoch: self.one_batch_per_epoch,
            seed: self.master_seed,
        }
    }

    pub fn partition(&self) -> PartitionConfig {
        PartitionConfig {
            num_clients: self.num_clients,
            per_client: self.per_client,
            split: self.split,
            seed: self.master_seed,
            sampling: self.sampling,
            disjoint_ranges: self.disjoint_ranges,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate(self.seq_len)?;
        if self.num_clients == 0 || self.participation == 0 || self.participation > self.num_clients {
            return Err(Error::config(format!(
                "participation {} must lie in 1..={} clients",
                self.participation, self.num_clients
            )));
        }
        if self.local_epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("local_epochs and batch_size must be at least 1"));
        }
        match self.model_kind {
            ModelKind::Qlstm => self.qlstm_dims().validate()?,
            ModelKind::ClassicalLstm if self.classical_hidden_dim == 0 => {
                return Err(Error::config("classical_hidden_dim must be at least 1"))
            }
            ModelKind::ClassicalLstm => {}
        }
        self.optimizer.validate()?;
        self.criterion()?;
        Ok(())
    }
}
