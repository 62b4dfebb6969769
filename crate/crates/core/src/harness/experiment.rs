//! Single-run orchestration and result files.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind};
use super::convergence::overall_computations;
use crate::error::{Error, Result, ResultExt};
use crate::federated::{run_training, ClientState, RoundRecord};
use crate::optim::OptimizerState;
use crate::seed::{rng_for, stream};
use crate::seqmodel::{ClassicalLstmModel, QlstmModel, SequenceModel};
use crate::targets::{build_dataset, partition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub config: ExperimentConfig,
    pub num_params: usize,
    pub rounds_to_convergence: Option<usize>,
    pub rounds_run: usize,
    /// Rounds until convergence (or all rounds run, if it never converged) times local epochs.
    pub overall_local_computations: usize,
    pub round_records: Vec<RoundRecord>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn converged(&self) -> bool {
        self.rounds_to_convergence.is_some()
    }

    /// Rounds to convergence, or the number of rounds run when it never fired.
    pub fn effective_rounds(&self) -> usize {
        self.rounds_to_convergence.unwrap_or(self.rounds_run)
    }

    pub fn test_losses(&self) -> Vec<f64> {
        self.round_records.iter().map(|r| r.global_test_loss).collect()
    }

    pub fn final_test_loss(&self) -> Option<f64> {
        self.round_records.last().map(|r| r.global_test_loss)
    }
}

/// Builds the dataset and clients for `config`, trains until the convergence
/// detector fires or `max_rounds` is exhausted, and writes result files when
/// `config.output` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut init_rng = rng_for(config.master_seed, &[stream::MODEL_INIT]);
    let report = match config.model_kind {
        ModelKind::Qlstm => run_with(config, QlstmModel::init(config.qlstm_dims(), &mut init_rng)?)?,
        ModelKind::ClassicalLstm => {
            run_with(config, ClassicalLstmModel::init(1, config.classical_hidden_dim, &mut init_rng)?)?
        }
    };
    if let Some(dir) = &config.output {
        write_outputs(&report, dir, false)?;
    }
    Ok(report)
}

fn run_with<M: SequenceModel>(config: &ExperimentConfig, template: M) -> Result<ExperimentReport> {
    let started = Instant::now();
    let dataset = build_dataset(&config.target, config.seq_len).context(|| "building dataset")?;
    let shards = partition(&dataset, &config.partition()).context(|| "partitioning clients")?;
    let mut clients = shards
        .into_iter()
        .map(|s| Ok(ClientState::from_shard(s, template.clone(), OptimizerState::new(config.optimizer)?)))
        .collect::<Result<Vec<_>>>()?;
    let criterion = config.criterion()?;
    let mut global = template.params();
    let stop_early = config.stop_on_convergence;
    let records = run_training(&mut clients, &template, &mut global, &config.federated(), |records| {
        stop_early && criterion.detect(&test_losses(records)).is_some()
    })?;

    let rounds_to_convergence = criterion.detect(&test_losses(&records));
    let rounds_run = records.len();
    Ok(ExperimentReport {
        label: config.display_label(),
        config: config.clone(),
        num_params: template.num_params(),
        rounds_to_convergence,
        rounds_run,
        overall_local_computations: overall_computations(
            rounds_to_convergence.unwrap_or(rounds_run),
            config.local_epochs,
        ),
        round_records: records,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

fn test_losses(records: &[RoundRecord]) -> Vec<f64> {
    records.iter().map(|r| r.global_test_loss).collect()
}

pub const ROUNDS_FILE: &str = "rounds.csv";
pub const REPORT_FILE: &str = "report.json";
pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Per-round CSV, preceded by `#` lines echoing the configuration.
pub fn rounds_csv(report: &ExperimentReport) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "# label: {}", report.label).unwrap();
    writeln!(out, "# config: {}", serde_json::to_string(&report.config)?).unwrap();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round", "selected", "per_client_train_loss", "global_train_loss", "global_test_loss"])?;
    for r in &report.round_records {
        w.write_record([
            r.round.to_string(),
            join(&r.selected),
            join(&r.per_client_train_loss),
            r.global_train_loss.to_string(),
            r.global_test_loss.to_string(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    out.push_str(std::str::from_utf8(&body).map_err(|e| Error::Format(e.to_string()))?);
    Ok(out)
}

/// Long-format `round,series,value` loss curves.
pub fn loss_curve_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("label,round,series,value\n");
    for r in &report.round_records {
        writeln!(out, "{},{},train,{}", report.label, r.round, r.global_train_loss).unwrap();
        writeln!(out, "{},{},test,{}", report.label, r.round, r.global_test_loss).unwrap();
    }
    out
}

pub fn write_outputs(report: &ExperimentReport, dir: &Path, emit_plot: bool) -> Result<()> {
    let io = |what: &str| format!("writing {what} in {}", dir.display());
    std::fs::create_dir_all(dir).map_err(Error::from).context(|| io("directory"))?;
    std::fs::write(dir.join(ROUNDS_FILE), rounds_csv(report)?).map_err(Error::from).context(|| io(ROUNDS_FILE))?;
    std::fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(report)?)
        .map_err(Error::from)
        .context(|| io(REPORT_FILE))?;
    if emit_plot {
        std::fs::write(dir.join(LOSS_CURVE_FILE), loss_curve_csv(report))
            .map_err(Error::from)
            .context(|| io(LOSS_CURVE_FILE))?;
    }
    Ok(())
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path).map_err(Error::from).context(|| path.display().to_string())?;
    serde_json::from_str(&text).map_err(Error::from).context(|| path.display().to_string())
}
