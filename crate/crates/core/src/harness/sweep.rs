//! Grid sweeps over experiment settings and seeds.
//!
//! Sweep files are TOML:
//!
//! ```toml
//! seeds = [1, 2, 3]
//!
//! [base]               # an ExperimentConfig document
//! per_client = 300
//! max_rounds = 60
//!
//! [[settings]]
//! label = "qlstm-e1"
//! overrides = { model_kind = "qlstm", local_epochs = 1 }
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind};
use super::experiment::{run_experiment, write_outputs, ExperimentReport};
use crate::error::{Error, Result, ResultExt};
use crate::optim::{OptimizerConfig, OptimizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetting {
    pub label: String,
    #[serde(default)]
    pub overrides: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub settings: Vec<SweepSetting>,
}

fn merge(into: &mut toml::Table, overrides: &toml::Table) {
    for (k, v) in overrides {
        match (into.get_mut(k), v) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => merge(dst, src),
            _ => {
                into.insert(k.clone(), v.clone());
            }
        }
    }
}

fn setting(label: impl Into<String>, overrides: toml::Table) -> SweepSetting {
    SweepSetting { label: label.into(), overrides }
}

fn table(pairs: &[(&str, toml::Value)]) -> toml::Table {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        if spec.seeds.is_empty() || spec.settings.is_empty() {
            return Err(Error::config("a sweep needs at least one seed and one setting"));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::from).context(|| path.display().to_string())?;
        Self::from_toml_str(&text).context(|| path.display().to_string())
    }

    /// Both model kinds at 1, 2 and 3 local epochs.
    pub fn epoch_sweep(base: ExperimentConfig, seeds: Vec<u64>) -> Self {
        let mut settings = Vec::new();
        for kind in [ModelKind::Qlstm, ModelKind::ClassicalLstm] {
            for e in 1..=3i64 {
                settings.push(setting(
                    format!("{kind}-e{e}"),
                    table(&[("model_kind", kind.to_string().into()), ("local_epochs", e.into())]),
                ));
            }
        }
        Self { base, seeds, settings }
    }

    /// 5 and 10 clients, each with the base and a doubled per-client dataset.
    pub fn client_sweep(base: ExperimentConfig, seeds: Vec<u64>) -> Self {
        let mut settings = Vec::new();
        for k in [5i64, 10] {
            for factor in [1i64, 2] {
                let n = base.per_client as i64 * factor;
                settings.push(setting(
                    format!("k{k}-n{n}"),
                    table(&[("num_clients", k.into()), ("participation", k.into()), ("per_client", n.into())]),
                ));
            }
        }
        Self { base, seeds, settings }
    }

    /// {sgd, rmsprop, adam} x {0.1, 0.01, 0.001}.
    pub fn optimizer_grid(base: ExperimentConfig, seeds: Vec<u64>) -> Self {
        let mut settings = Vec::new();
        for kind in [OptimizerKind::Sgd, OptimizerKind::Rmsprop, OptimizerKind::Adam] {
            for lr in [0.1, 0.01, 0.001] {
                let opt = OptimizerConfig { kind, lr, ..base.optimizer };
                let opt = toml::Table::try_from(opt).expect("optimizer config serializes");
                settings.push(setting(format!("{kind}-lr{lr}"), table(&[("optimizer", opt.into())])));
            }
        }
        Self { base, seeds, settings }
    }

    /// Expands to one config per (setting, seed), in setting-major order.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let base = toml::Table::try_from(&self.base).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(self.settings.len() * self.seeds.len());
        for s in &self.settings {
            let mut doc = base.clone();
            merge(&mut doc, &s.overrides);
            let mut config: ExperimentConfig = doc
                .try_into()
                .map_err(|e: toml::de::Error| Error::Format(e.to_string()))
                .context(|| format!("setting {}", s.label))?;
            config.label = Some(s.label.clone());
            config.output = None;
            for &seed in &self.seeds {
                out.push(config.clone().with_seed(seed));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub seed: u64,
    pub model_kind: String,
    pub target: String,
    pub num_clients: usize,
    pub per_client: usize,
    pub local_epochs: usize,
    pub optimizer: String,
    pub lr: f64,
    pub num_params: Option<usize>,
    pub converged: bool,
    pub rounds_to_convergence: Option<usize>,
    pub rounds_run: usize,
    pub overall_computations: Option<usize>,
    pub final_test_loss: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_report(report: &ExperimentReport) -> Self {
        let c = &report.config;
        Self {
            label: report.label.clone(),
            seed: c.master_seed,
            model_kind: c.model_kind.to_string(),
            target: c.target.function.label(),
            num_clients: c.num_clients,
            per_client: c.per_client,
            local_epochs: c.local_epochs,
            optimizer: c.optimizer.kind.to_string(),
            lr: c.optimizer.lr,
            num_params: Some(report.num_params),
            converged: report.converged(),
            rounds_to_convergence: report.rounds_to_convergence,
            rounds_run: report.rounds_run,
            overall_computations: Some(report.overall_local_computations),
            final_test_loss: report.final_test_loss(),
            error: None,
        }
    }

    fn failed(config: &ExperimentConfig, error: &Error) -> Self {
        Self {
            label: config.display_label(),
            seed: config.master_seed,
            model_kind: config.model_kind.to_string(),
            target: config.target.function.label(),
            num_clients: config.num_clients,
            per_client: config.per_client,
            local_epochs: config.local_epochs,
            optimizer: config.optimizer.kind.to_string(),
            lr: config.optimizer.lr,
            num_params: None,
            converged: false,
            rounds_to_convergence: None,
            rounds_run: 0,
            overall_computations: None,
            final_test_loss: None,
            error: Some(error.to_string()),
        }
    }

    /// Rounds to convergence, or rounds run when the detector never fired.
    pub fn effective_rounds(&self) -> usize {
        self.rounds_to_convergence.unwrap_or(self.rounds_run)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingSummary {
    pub label: String,
    pub runs: usize,
    pub converged: usize,
    pub median_rounds: f64,
    pub median_computations: f64,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
        Ok(Self { rows })
    }

    /// Per-label medians over seeds, in first-appearance order. Failed runs are skipped.
    pub fn summaries(&self) -> Vec<SettingSummary> {
        let mut labels: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !labels.contains(&r.label.as_str()) {
                labels.push(&r.label);
            }
        }
        labels
            .into_iter()
            .filter_map(|label| {
                let ok: Vec<&SweepRow> = self.rows.iter().filter(|r| r.label == label && r.error.is_none()).collect();
                let mut rounds: Vec<f64> = ok.iter().map(|r| r.effective_rounds() as f64).collect();
                let mut comps: Vec<f64> = ok.iter().filter_map(|r| r.overall_computations.map(|c| c as f64)).collect();
                Some(SettingSummary {
                    label: label.to_string(),
                    runs: ok.len(),
                    converged: ok.iter().filter(|r| r.converged).count(),
                    median_rounds: median(&mut rounds)?,
                    median_computations: median(&mut comps)?,
                })
            })
            .collect()
    }

    /// Human-readable comparison table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<28} {:>6} {:>15} {:>6} {:>9} {:>7} {:>7} {:>12}",
            "label", "seed", "model", "epochs", "converged", "rounds", "comps", "final_loss"
        )
        .unwrap();
        for r in &self.rows {
            let rounds = r.rounds_to_convergence.map_or_else(|| format!(">{}", r.rounds_run), |v| v.to_string());
            let comps = r.overall_computations.map_or("-".to_string(), |v| v.to_string());
            let loss = r.final_test_loss.map_or("-".to_string(), |v| format!("{v:.3e}"));
            writeln!(
                out,
                "{:<28} {:>6} {:>15} {:>6} {:>9} {:>7} {:>7} {:>12}",
                r.label, r.seed, r.model_kind, r.local_epochs, r.converged, rounds, comps, loss
            )
            .unwrap();
            if let Some(e) = &r.error {
                writeln!(out, "    error: {e}").unwrap();
            }
        }
        writeln!(out).unwrap();
        writeln!(out, "{:<28} {:>5} {:>9} {:>13} {:>13}", "setting", "runs", "converged", "median_rounds", "median_comps")
            .unwrap();
        for s in self.summaries() {
            writeln!(
                out,
                "{:<28} {:>5} {:>9} {:>13} {:>13}",
                s.label, s.runs, s.converged, s.median_rounds, s.median_computations
            )
            .unwrap();
        }
        out
    }
}

pub const SWEEP_FILE: &str = "sweep.csv";

/// Runs every (setting, seed) pair. Individual failures become error rows.
/// With `out_dir`, each run writes to `<out_dir>/<label>/seed<N>/` and the table
/// goes to `<out_dir>/sweep.csv`.
pub fn sweep(spec: &SweepSpec, out_dir: Option<&Path>) -> Result<(SweepTable, Vec<ExperimentReport>)> {
    let configs = spec.expand()?;
    let results: Vec<(SweepRow, Option<ExperimentReport>)> = configs
        .par_iter()
        .map(|config| {
            let outcome = run_experiment(config).and_then(|report| {
                if let Some(dir) = out_dir {
                    let run_dir: PathBuf = dir.join(&report.label).join(format!("seed{}", config.master_seed));
                    write_outputs(&report, &run_dir, true)?;
                }
                Ok(report)
            });
            match outcome {
                Ok(report) => (SweepRow::from_report(&report), Some(report)),
                Err(e) => (SweepRow::failed(config, &e), None),
            }
        })
        .collect();
    let (rows, reports): (Vec<SweepRow>, Vec<Option<ExperimentReport>>) = results.into_iter().unzip();
    let table = SweepTable { rows };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(SWEEP_FILE), table.to_csv()?)?;
    }
    Ok((table, reports.into_iter().flatten().collect()))
}
