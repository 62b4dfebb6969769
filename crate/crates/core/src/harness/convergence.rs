//! Sliding-window convergence detection and the local-computation metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Thresholds are multiples of the first recorded loss.
    #[default]
    Relative,
    Absolute,
}

/// Fires when both the mean and the (population) standard deviation of the
/// last `window_width` losses are at or below their thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub window_width: usize,
    pub margin: f64,
    pub std_threshold: f64,
    pub mode: ThresholdMode,
}

impl ConvergenceCriterion {
    pub fn new(window_width: usize, margin: f64, std_threshold: f64, mode: ThresholdMode) -> Result<Self> {
        if window_width < 2 {
            return Err(Error::config(format!("window width {window_width} must be at least 2")));
        }
        if !(margin >= 0.0 && std_threshold >= 0.0) {
            return Err(Error::config("convergence thresholds must be non-negative"));
        }
        Ok(Self { window_width, margin, std_threshold, mode })
    }

    /// 1-based index of the last round of the first qualifying window.
    pub fn detect(&self, losses: &[f64]) -> Option<usize> {
        let w = self.window_width;
        if w < 2 || losses.len() < w {
            return None;
        }
        let scale = match self.mode {
            ThresholdMode::Relative => losses[0],
            ThresholdMode::Absolute => 1.0,
        };
        let mean_limit = self.margin * scale;
        let std_limit = self.std_threshold * scale;
        losses.windows(w).position(|win| {
            let (mean, std) = mean_std(win);
            mean <= mean_limit && std <= std_limit
        })
        .map(|start| start + w)
    }
}

/// Relative-threshold detection with `L_ref` = the first loss.
pub fn detect_convergence(losses: &[f64], window_width: usize, margin: f64, std_threshold: f64) -> Option<usize> {
    ConvergenceCriterion { window_width, margin, std_threshold, mode: ThresholdMode::Relative }.detect(losses)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Communication rounds times local epochs per round.
pub fn overall_computations(rounds: usize, local_epochs: usize) -> usize {
    rounds * local_epochs
}
