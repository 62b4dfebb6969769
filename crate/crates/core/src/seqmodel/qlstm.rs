//! QLSTM cell built from six VQCs plus an affine read-out.
//!
//! With `v_t = [x_t, h_{t-1}]` filling the register exactly:
//!
//! ```text
//! f_t  = sigmoid(VQC1(v_t))      i_t = sigmoid(VQC2(v_t))
//! C~_t = tanh(VQC3(v_t))         c_t = i_t * C~_t + f_t * c_{t-1}
//! o_t  = sigmoid(VQC4(v_t))      m_t = o_t * tanh(c_t)
//! h_t  = VQC5(m_t)[..hidden_dim]
//! y_t  = out_weight . VQC6(m_t) + out_bias
//! ```
//!
//! The cell state lives on all `num_qubits` wires; the hidden state is the first
//! `hidden_dim` readouts of VQC5.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamSet, Tensor};
use super::{sigmoid, split_sequence, SequenceModel};
use crate::error::{Error, Result};
use crate::vqc::{self, Entangler, VqcConfig, VqcParams};

pub const VQC_NAMES: [&str; 6] = ["vqc1", "vqc2", "vqc3", "vqc4", "vqc5", "vqc6"];

const FORGET: usize = 0;
const INPUT: usize = 1;
const CANDIDATE: usize = 2;
const OUTPUT: usize = 3;
const HIDDEN: usize = 4;
const READOUT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QlstmDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_qubits: usize,
    pub num_layers: usize,
    #[serde(default)]
    pub entangler: Entangler,
}

impl Default for QlstmDims {
    fn default() -> Self {
        Self { input_dim: 1, hidden_dim: 3, num_qubits: 4, num_layers: 2, entangler: Entangler::Ring }
    }
}

impl QlstmDims {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("QLSTM input_dim must be at least 1"));
        }
        if self.input_dim + self.hidden_dim != self.num_qubits {
            return Err(Error::config(format!(
                "input_dim ({}) + hidden_dim ({}) must equal num_qubits ({})",
                self.input_dim, self.hidden_dim, self.num_qubits
            )));
        }
        self.gate_config().validate()
    }

    /// Configuration of VQC1-4 and VQC6: full register in, full register out.
    pub fn gate_config(&self) -> VqcConfig {
        VqcConfig {
            num_qubits: self.num_qubits,
            num_layers: self.num_layers,
            input_dim: self.num_qubits,
            output_dim: self.num_qubits,
            entangler: self.entangler,
        }
    }

    /// Configuration of VQC5, which reads out only the hidden slice.
    pub fn hidden_config(&self) -> VqcConfig {
        VqcConfig { output_dim: self.hidden_dim, ..self.gate_config() }
    }

    pub fn cell_dim(&self) -> usize {
        self.num_qubits
    }

    /// `6 * num_layers * num_qubits * 3 + num_qubits + 1`.
    pub fn num_params(&self) -> usize {
        6 * self.gate_config().num_params() + self.num_qubits + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(dims: &QlstmDims) -> Self {
        Self { h: vec![0.0; dims.hidden_dim], c: vec![0.0; dims.cell_dim()] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QlstmModel {
    dims: QlstmDims,
    pub vqc: [VqcParams; 6],
    pub out_weight: Vec<f64>,
    pub out_bias: f64,
}

/// Gradient of the squared-error loss, shaped like [`QlstmModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct QlstmGradient {
    pub vqc: [VqcParams; 6],
    pub out_weight: Vec<f64>,
    pub out_bias: f64,
}

/// Intermediate values of one timestep, kept for backpropagation.
struct StepCache {
    v: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    cand: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    m: Vec<f64>,
}

impl QlstmModel {
    /// All-zero angles and read-out.
    pub fn zeros(dims: QlstmDims) -> Result<Self> {
        dims.validate()?;
        let cfg = dims.gate_config();
        Ok(Self {
            dims,
            vqc: std::array::from_fn(|_| VqcParams::zeros(&cfg)),
            out_weight: vec![0.0; dims.num_qubits],
            out_bias: 0.0,
        })
    }

    /// Small-angle initialization: angles ~ U(-pi/50, pi/50), read-out ~ U(-0.5, 0.5).
    pub fn init<R: Rng + ?Sized>(dims: QlstmDims, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        let cfg = dims.gate_config();
        for p in &mut model.vqc {
            *p = VqcParams::uniform(&cfg, PI / 50.0, rng);
        }
        for w in &mut model.out_weight {
            *w = rng.gen_range(-0.5..=0.5);
        }
        model.out_bias = rng.gen_range(-0.5..=0.5);
        Ok(model)
    }

    pub fn dims(&self) -> &QlstmDims {
        &self.dims
    }

    /// One cell update; returns the new state and the read-out `y_t`.
    pub fn step(&self, x_t: &[f64], state: &CellState) -> Result<(CellState, f64)> {
        self.check_step_shapes(x_t, state)?;
        let (next, cache) = self.advance(x_t, state)?;
        let y = self.readout(&cache.m)?.0;
        check_finite(&next)?;
        Ok((next, y))
    }

    fn check_step_shapes(&self, x_t: &[f64], state: &CellState) -> Result<()> {
        if x_t.len() != self.dims.input_dim
            || state.h.len() != self.dims.hidden_dim
            || state.c.len() != self.dims.cell_dim()
        {
            return Err(Error::shape(format!(
                "QLSTM step got x {} / h {} / c {}, expected {} / {} / {}",
                x_t.len(),
                state.h.len(),
                state.c.len(),
                self.dims.input_dim,
                self.dims.hidden_dim,
                self.dims.cell_dim()
            )));
        }
        Ok(())
    }

    fn advance(&self, x_t: &[f64], state: &CellState) -> Result<(CellState, StepCache)> {
        let gate_cfg = self.dims.gate_config();
        let mut v = Vec::with_capacity(self.dims.num_qubits);
        v.extend_from_slice(x_t);
        v.extend_from_slice(&state.h);

        let f: Vec<f64> = vqc::forward(&v, &self.vqc[FORGET], &gate_cfg)?.into_iter().map(sigmoid).collect();
        let i: Vec<f64> = vqc::forward(&v, &self.vqc[INPUT], &gate_cfg)?.into_iter().map(sigmoid).collect();
        let cand: Vec<f64> = vqc::forward(&v, &self.vqc[CANDIDATE], &gate_cfg)?.into_iter().map(f64::tanh).collect();
        let o: Vec<f64> = vqc::forward(&v, &self.vqc[OUTPUT], &gate_cfg)?.into_iter().map(sigmoid).collect();

        let c: Vec<f64> = (0..self.dims.cell_dim()).map(|k| i[k] * cand[k] + f[k] * state.c[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let m: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
        let h = vqc::forward(&m, &self.vqc[HIDDEN], &self.dims.hidden_config())?;

        let cache = StepCache { v, f, i, cand, o, c_prev: state.c.clone(), tanh_c, m };
        Ok((CellState { h, c }, cache))
    }

    /// `(y, VQC6 readouts)` for a given `m_t`.
    fn readout(&self, m: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z = vqc::forward(m, &self.vqc[READOUT], &self.dims.gate_config())?;
        let y = dot(&self.out_weight, &z) + self.out_bias;
        Ok((y, z))
    }

    fn run(&self, seq: &[f64]) -> Result<(Vec<StepCache>, f64, Vec<f64>)> {
        let steps = split_sequence(seq, self.dims.input_dim)?;
        let mut state = CellState::zeros(&self.dims);
        let mut caches = Vec::with_capacity(steps.len());
        for x_t in steps {
            let (next, cache) = self.advance(x_t, &state)?;
            check_finite(&next)?;
            state = next;
            caches.push(cache);
        }
        let (y, z) = self.readout(&caches.last().expect("non-empty sequence").m)?;
        Ok((caches, y, z))
    }

    /// Runs the cell over `seq` (row-major `[T][input_dim]`) from the zero state
    /// and returns the final read-out `y_T`.
    pub fn forward_sequence(&self, seq: &[f64]) -> Result<f64> {
        Ok(self.run(seq)?.1)
    }

    /// Gradient of `(y_T - target)^2` by backpropagation through time.
    /// Returns the loss together with the gradient.
    pub fn backward_sequence(&self, seq: &[f64], target: f64) -> Result<(f64, QlstmGradient)> {
        let (caches, y, z) = self.run(seq)?;
        let diff = y - target;
        let loss = diff * diff;
        if !loss.is_finite() {
            return Err(Error::numeric(format!("non-finite QLSTM loss (y = {y}, target = {target})")));
        }

        let gate_cfg = self.dims.gate_config();
        let hidden_cfg = self.dims.hidden_config();
        let n = self.dims.num_qubits;
        let mut grad = QlstmGradient {
            vqc: std::array::from_fn(|_| VqcParams::zeros(&gate_cfg)),
            out_weight: vec![0.0; n],
            out_bias: 0.0,
        };

        let dy = 2.0 * diff;
        if dy == 0.0 {
            return Ok((loss, grad));
        }
        grad.out_bias = dy;
        for (g, zk) in grad.out_weight.iter_mut().zip(&z) {
            *g = dy * zk;
        }

        let last = caches.len() - 1;
        let mut dh = vec![0.0; self.dims.hidden_dim];
        let mut dc = vec![0.0; n];
        for (t, cache) in caches.iter().enumerate().rev() {
            let mut dm = vec![0.0; n];
            if t == last {
                let upstream: Vec<f64> = self.out_weight.iter().map(|w| dy * w).collect();
                let g = vqc::vjp(&cache.m, &self.vqc[READOUT], &gate_cfg, &upstream)?;
                add_assign(grad.vqc[READOUT].as_mut_slice(), g.params.as_slice());
                add_assign(&mut dm, &g.input);
            }
            let g = vqc::vjp(&cache.m, &self.vqc[HIDDEN], &hidden_cfg, &dh)?;
            add_assign(grad.vqc[HIDDEN].as_mut_slice(), g.params.as_slice());
            add_assign(&mut dm, &g.input);

            let mut d_pre = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            let mut dc_prev = vec![0.0; n];
            for k in 0..n {
                let tc = cache.tanh_c[k];
                let do_k = dm[k] * tc;
                let dc_k = dc[k] + dm[k] * cache.o[k] * (1.0 - tc * tc);
                let di = dc_k * cache.cand[k];
                let dcand = dc_k * cache.i[k];
                let df = dc_k * cache.c_prev[k];
                dc_prev[k] = dc_k * cache.f[k];
                d_pre[FORGET][k] = df * cache.f[k] * (1.0 - cache.f[k]);
                d_pre[INPUT][k] = di * cache.i[k] * (1.0 - cache.i[k]);
                d_pre[CANDIDATE][k] = dcand * (1.0 - cache.cand[k] * cache.cand[k]);
                d_pre[OUTPUT][k] = do_k * cache.o[k] * (1.0 - cache.o[k]);
            }

            let mut dv = vec![0.0; n];
            for gate in [FORGET, INPUT, CANDIDATE, OUTPUT] {
                let g = vqc::vjp(&cache.v, &self.vqc[gate], &gate_cfg, &d_pre[gate])?;
                add_assign(grad.vqc[gate].as_mut_slice(), g.params.as_slice());
                add_assign(&mut dv, &g.input);
            }
            dh.copy_from_slice(&dv[self.dims.input_dim..]);
            dc = dc_prev;
        }
        Ok((loss, grad))
    }

    pub fn gradient_to_params(&self, grad: &QlstmGradient) -> ParamSet {
        self.pack(&grad.vqc, &grad.out_weight, grad.out_bias)
    }

    fn pack(&self, vqc: &[VqcParams; 6], out_weight: &[f64], out_bias: f64) -> ParamSet {
        let shape = vec![self.dims.num_layers, self.dims.num_qubits, 3];
        let mut tensors: Vec<Tensor> = VQC_NAMES
            .iter()
            .zip(vqc)
            .map(|(name, p)| Tensor { name: name.to_string(), shape: shape.clone(), data: p.as_slice().to_vec() })
            .collect();
        tensors.push(Tensor { name: "out_weight".into(), shape: vec![out_weight.len()], data: out_weight.to_vec() });
        tensors.push(Tensor::scalar("out_bias", out_bias));
        ParamSet::new(tensors)
    }
}

impl SequenceModel for QlstmModel {
    fn input_dim(&self) -> usize {
        self.dims.input_dim
    }

    fn forward_sequence(&self, seq: &[f64]) -> Result<f64> {
        QlstmModel::forward_sequence(self, seq)
    }

    fn loss_and_grad(&self, seq: &[f64], target: f64) -> Result<(f64, ParamSet)> {
        let (loss, grad) = self.backward_sequence(seq, target)?;
        Ok((loss, self.gradient_to_params(&grad)))
    }

    fn params(&self) -> ParamSet {
        self.pack(&self.vqc, &self.out_weight, self.out_bias)
    }

    fn load_params(&mut self, params: &ParamSet) -> Result<()> {
        let cfg = self.dims.gate_config();
        let mut vqc = self.vqc.clone();
        for (slot, name) in vqc.iter_mut().zip(VQC_NAMES) {
            *slot = VqcParams::from_angles(&cfg, params.expect(name, cfg.num_params())?.to_vec())?;
        }
        let out_weight = params.expect("out_weight", self.dims.num_qubits)?.to_vec();
        let out_bias = params.expect("out_bias", 1)?[0];
        if params.tensors.len() != 8 {
            return Err(Error::shape(format!("QLSTM expects 8 tensors, got {}", params.tensors.len())));
        }
        self.vqc = vqc;
        self.out_weight = out_weight;
        self.out_bias = out_bias;
        Ok(())
    }

    fn num_params(&self) -> usize {
        self.dims.num_params()
    }
}

fn check_finite(state: &CellState) -> Result<()> {
    if state.h.iter().chain(&state.c).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric("non-finite QLSTM cell state"))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_assign(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
