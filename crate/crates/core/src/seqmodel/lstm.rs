//! Classical LSTM baseline with the same sequence-to-one interface as the QLSTM.

use rand::Rng;

use super::params::{ParamSet, Tensor};
use super::{sigmoid, split_sequence, SequenceModel};
use crate::error::{Error, Result};

/// Textbook LSTM: one stacked gate matrix `W` of shape `[4H][D+H]` (gate order
/// forget, input, candidate, output) acting on `[x_t, h_{t-1}]`, one bias vector,
/// and an affine head `y = w . h_T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalLstmModel {
    input_dim: usize,
    hidden_dim: usize,
    pub w_gates: Vec<f64>,
    pub b_gates: Vec<f64>,
    pub out_weight: Vec<f64>,
    pub out_bias: f64,
}

struct Step {
    v: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl ClassicalLstmModel {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::config("LSTM input and hidden sizes must be positive"));
        }
        let h = hidden_dim;
        Ok(Self {
            input_dim,
            hidden_dim,
            w_gates: vec![0.0; 4 * h * (input_dim + h)],
            b_gates: vec![0.0; 4 * h],
            out_weight: vec![0.0; h],
            out_bias: 0.0,
        })
    }

    /// Every parameter ~ U(-1/sqrt(H), 1/sqrt(H)).
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(input_dim, hidden_dim)?;
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        for p in model
            .w_gates
            .iter_mut()
            .chain(model.b_gates.iter_mut())
            .chain(model.out_weight.iter_mut())
            .chain(std::iter::once(&mut model.out_bias))
        {
            *p = rng.gen_range(-bound..=bound);
        }
        Ok(model)
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// `4H(D+H) + 4H + H + 1`.
    pub fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
        let h = hidden_dim;
        4 * h * (input_dim + h) + 4 * h + h + 1
    }

    fn run(&self, seq: &[f64]) -> Result<(Vec<Step>, Vec<f64>, f64)> {
        let steps = split_sequence(seq, self.input_dim)?;
        let h_dim = self.hidden_dim;
        let cols = self.input_dim + h_dim;
        let mut h = vec![0.0; h_dim];
        let mut c = vec![0.0; h_dim];
        let mut cache = Vec::with_capacity(steps.len());
        for x_t in steps {
            let mut v = Vec::with_capacity(cols);
            v.extend_from_slice(x_t);
            v.extend_from_slice(&h);
            let pre: Vec<f64> = (0..4 * h_dim)
                .map(|r| {
                    let row = &self.w_gates[r * cols..(r + 1) * cols];
                    row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + self.b_gates[r]
                })
                .collect();
            let f: Vec<f64> = pre[..h_dim].iter().copied().map(sigmoid).collect();
            let i: Vec<f64> = pre[h_dim..2 * h_dim].iter().copied().map(sigmoid).collect();
            let g: Vec<f64> = pre[2 * h_dim..3 * h_dim].iter().map(|a| a.tanh()).collect();
            let o: Vec<f64> = pre[3 * h_dim..].iter().copied().map(sigmoid).collect();
            let c_prev = c.clone();
            for k in 0..h_dim {
                c[k] = f[k] * c_prev[k] + i[k] * g[k];
            }
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            for k in 0..h_dim {
                h[k] = o[k] * tanh_c[k];
            }
            cache.push(Step { v, f, i, g, o, c_prev, tanh_c });
        }
        let y = self.out_weight.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + self.out_bias;
        Ok((cache, h, y))
    }

    pub fn forward_sequence(&self, seq: &[f64]) -> Result<f64> {
        Ok(self.run(seq)?.2)
    }

    /// Final hidden state after running `seq`; exposed for bound checks.
    pub fn final_hidden(&self, seq: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(seq)?.1)
    }

    /// Loss `(y_T - target)^2` and its gradient, shaped like the model.
    pub fn backward_sequence(&self, seq: &[f64], target: f64) -> Result<(f64, ClassicalLstmModel)> {
        let (cache, h_last, y) = self.run(seq)?;
        let diff = y - target;
        let loss = diff * diff;
        if !loss.is_finite() {
            return Err(Error::numeric(format!("non-finite LSTM loss (y = {y}, target = {target})")));
        }
        let h_dim = self.hidden_dim;
        let cols = self.input_dim + h_dim;
        let mut grad = Self::zeros(self.input_dim, h_dim)?;
        let dy = 2.0 * diff;
        grad.out_bias = dy;
        for k in 0..h_dim {
            grad.out_weight[k] = dy * h_last[k];
        }
        let mut dh: Vec<f64> = self.out_weight.iter().map(|w| dy * w).collect();
        let mut dc = vec![0.0; h_dim];
        let mut d_pre = vec![0.0; 4 * h_dim];
        for step in cache.iter().rev() {
            for k in 0..h_dim {
                let tc = step.tanh_c[k];
                let d_o = dh[k] * tc;
                let dc_k = dc[k] + dh[k] * step.o[k] * (1.0 - tc * tc);
                d_pre[k] = dc_k * step.c_prev[k] * step.f[k] * (1.0 - step.f[k]);
                d_pre[h_dim + k] = dc_k * step.g[k] * step.i[k] * (1.0 - step.i[k]);
                d_pre[2 * h_dim + k] = dc_k * step.i[k] * (1.0 - step.g[k] * step.g[k]);
                d_pre[3 * h_dim + k] = d_o * step.o[k] * (1.0 - step.o[k]);
                dc[k] = dc_k * step.f[k];
            }
            let mut dv = vec![0.0; cols];
            for (r, &d) in d_pre.iter().enumerate() {
                grad.b_gates[r] += d;
                let row = r * cols;
                for j in 0..cols {
                    grad.w_gates[row + j] += d * step.v[j];
                    dv[j] += d * self.w_gates[row + j];
                }
            }
            dh.copy_from_slice(&dv[self.input_dim..]);
        }
        Ok((loss, grad))
    }

    fn pack(&self) -> ParamSet {
        let h = self.hidden_dim;
        ParamSet::new(vec![
            Tensor { name: "w_gates".into(), shape: vec![4 * h, self.input_dim + h], data: self.w_gates.clone() },
            Tensor { name: "b_gates".into(), shape: vec![4 * h], data: self.b_gates.clone() },
            Tensor { name: "out_weight".into(), shape: vec![h], data: self.out_weight.clone() },
            Tensor::scalar("out_bias", self.out_bias),
        ])
    }
}

impl SequenceModel for ClassicalLstmModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn forward_sequence(&self, seq: &[f64]) -> Result<f64> {
        ClassicalLstmModel::forward_sequence(self, seq)
    }

    fn loss_and_grad(&self, seq: &[f64], target: f64) -> Result<(f64, ParamSet)> {
        let (loss, grad) = self.backward_sequence(seq, target)?;
        Ok((loss, grad.pack()))
    }

    fn params(&self) -> ParamSet {
        self.pack()
    }

    fn load_params(&mut self, params: &ParamSet) -> Result<()> {
        let h = self.hidden_dim;
        let w = params.expect("w_gates", self.w_gates.len())?.to_vec();
        let b = params.expect("b_gates", 4 * h)?.to_vec();
        let ow = params.expect("out_weight", h)?.to_vec();
        let ob = params.expect("out_bias", 1)?[0];
        if params.tensors.len() != 4 {
            return Err(Error::shape(format!("LSTM expects 4 tensors, got {}", params.tensors.len())));
        }
        self.w_gates = w;
        self.b_gates = b;
        self.out_weight = ow;
        self.out_bias = ob;
        Ok(())
    }

    fn num_params(&self) -> usize {
        Self::param_count(self.input_dim, self.hidden_dim)
    }
}
