//! First-order optimizers over named parameter tensors: SGD, RMSprop and Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqmodel::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Rmsprop,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "rmsprop" => Ok(Self::Rmsprop),
            "adam" => Ok(Self::Adam),
            other => Err(Error::config(format!("unknown optimizer {other:?}"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Rmsprop => "rmsprop",
            Self::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    #[serde(rename = "optimizer")]
    pub kind: OptimizerKind,
    pub lr: f64,
    pub rmsprop_alpha: f64,
    pub eps: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Rmsprop,
            lr: 0.01,
            rmsprop_alpha: 0.99,
            eps: 1e-8,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
        }
    }
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self { kind, lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed: it freezes training, which the protocol tests rely on.
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::config(format!("learning rate {} must be finite and >= 0", self.lr)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("optimizer eps must be positive"));
        }
        for (name, v) in [
            ("rmsprop_alpha", self.rmsprop_alpha),
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Per-client optimizer state. Moments are allocated on the first step and
/// shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, first: Vec::new(), second: Vec::new(), steps: 0 })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn ensure_moments(&mut self, params: &ParamSet) -> Result<()> {
        let shapes: Vec<usize> = params.tensors.iter().map(|t| t.data.len()).collect();
        let have = |m: &Vec<Vec<f64>>| m.iter().map(Vec::len).eq(shapes.iter().copied());
        let (need_first, need_second) = match self.config.kind {
            OptimizerKind::Sgd => (false, false),
            OptimizerKind::Rmsprop => (false, true),
            OptimizerKind::Adam => (true, true),
        };
        if self.steps == 0 {
            let zeros = || shapes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
            if need_first {
                self.first = zeros();
            }
            if need_second {
                self.second = zeros();
            }
        } else if (need_first && !have(&self.first)) || (need_second && !have(&self.second)) {
            return Err(Error::shape("optimizer moments do not match parameter shapes"));
        }
        Ok(())
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        params.check_same_layout(grads)?;
        for t in &grads.tensors {
            if let Some(i) = t.data.iter().position(|g| !g.is_finite()) {
                return Err(Error::numeric(format!("non-finite gradient in {}[{i}]", t.name)));
            }
        }
        self.ensure_moments(params)?;
        self.steps += 1;
        let c = self.config;
        let lr = c.lr;
        for (ti, (p, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
            match c.kind {
                OptimizerKind::Sgd => {
                    for (x, d) in p.data.iter_mut().zip(&g.data) {
                        *x -= lr * d;
                    }
                }
                OptimizerKind::Rmsprop => {
                    let v = &mut self.second[ti];
                    for ((x, d), s) in p.data.iter_mut().zip(&g.data).zip(v.iter_mut()) {
                        *s = c.rmsprop_alpha * *s + (1.0 - c.rmsprop_alpha) * d * d;
                        *x -= lr * d / (s.sqrt() + c.eps);
                    }
                }
                OptimizerKind::Adam => {
                    let t = self.steps as i32;
                    let bc1 = 1.0 - c.adam_beta1.powi(t);
                    let bc2 = 1.0 - c.adam_beta2.powi(t);
                    let m = &mut self.first[ti];
                    let v = &mut self.second[ti];
                    for (((x, d), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = c.adam_beta1 * *mi + (1.0 - c.adam_beta1) * d;
                        *vi = c.adam_beta2 * *vi + (1.0 - c.adam_beta2) * d * d;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *x -= lr * m_hat / (v_hat.sqrt() + c.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
