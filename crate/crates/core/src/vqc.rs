//! The hybrid variational quantum circuit used inside every QLSTM gate.
//!
//! Layout, for an input `x` of length `input_dim` on `num_qubits` wires:
//!
//! ```text
//! |0> -- RY(atan x_i) -- RZ(atan x_i^2) -- [ CNOT ring -- R(a,b,g) per qubit ] x num_layers -- <Z>
//! ```
//!
//! Wires at or above `input_dim` receive no encoding rotations. Each variational
//! layer first applies the entangler and then one general rotation per wire.
//! Measurement returns `<Z_0> .. <Z_{output_dim-1}>`.
//!
//! Gradients use the two-term parameter-shift rule. Every trainable angle and
//! every encoding angle drives exactly one RY or RZ rotation, so the rule is exact.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{Gate, StateVector, MAX_QUBITS};

/// Entangling pattern at the start of each variational layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entangler {
    /// CNOT(i -> i+1 mod n) for every i, closing the cycle.
    #[default]
    Ring,
    /// CNOT(i -> i+1) for i < n-1.
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqcConfig {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    #[serde(default)]
    pub entangler: Entangler,
}

impl VqcConfig {
    pub fn new(num_qubits: usize, num_layers: usize, input_dim: usize, output_dim: usize) -> Result<Self> {
        let config = Self { num_qubits, num_layers, input_dim, output_dim, entangler: Entangler::Ring };
        config.validate()?;
        Ok(config)
    }

    pub fn with_entangler(mut self, entangler: Entangler) -> Self {
        self.entangler = entangler;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_QUBITS).contains(&self.num_qubits) {
            return Err(Error::config(format!(
                "VQC qubit count {} outside 1..={MAX_QUBITS}",
                self.num_qubits
            )));
        }
        if self.input_dim > self.num_qubits || self.output_dim > self.num_qubits {
            return Err(Error::config(format!(
                "VQC input_dim {} / output_dim {} exceed {} qubits",
                self.input_dim, self.output_dim, self.num_qubits
            )));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.num_layers * self.num_qubits * 3
    }
}

/// Trainable rotation angles, laid out as `[layer][qubit][alpha, beta, gamma]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcParams {
    num_layers: usize,
    num_qubits: usize,
    angles: Vec<f64>,
}

impl VqcParams {
    pub fn zeros(config: &VqcConfig) -> Self {
        Self {
            num_layers: config.num_layers,
            num_qubits: config.num_qubits,
            angles: vec![0.0; config.num_params()],
        }
    }

    /// Angles drawn uniformly from `[-half_width, half_width]`.
    pub fn uniform<R: Rng + ?Sized>(config: &VqcConfig, half_width: f64, rng: &mut R) -> Self {
        let mut params = Self::zeros(config);
        for a in &mut params.angles {
            *a = rng.gen_range(-half_width..=half_width);
        }
        params
    }

    pub fn from_angles(config: &VqcConfig, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != config.num_params() {
            return Err(Error::shape(format!(
                "expected {} VQC angles, got {}",
                config.num_params(),
                angles.len()
            )));
        }
        Ok(Self { num_layers: config.num_layers, num_qubits: config.num_qubits, angles })
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn flat_index(&self, layer: usize, qubit: usize, axis: usize) -> usize {
        (layer * self.num_qubits + qubit) * 3 + axis
    }

    pub fn get(&self, layer: usize, qubit: usize, axis: usize) -> f64 {
        self.angles[self.flat_index(layer, qubit, axis)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.angles
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.angles
    }

    fn check(&self, config: &VqcConfig) -> Result<()> {
        if self.num_layers != config.num_layers || self.num_qubits != config.num_qubits {
            return Err(Error::shape(format!(
                "VQC params shaped [{}][{}][3] do not match config [{}][{}][3]",
                self.num_layers, self.num_qubits, config.num_layers, config.num_qubits
            )));
        }
        if let Some(i) = self.angles.iter().position(|a| !a.is_finite()) {
            return Err(Error::numeric(format!("VQC angle {i} is not finite")));
        }
        Ok(())
    }
}

fn check_input(x: &[f64], config: &VqcConfig) -> Result<()> {
    if x.len() != config.input_dim {
        return Err(Error::shape(format!(
            "VQC input has length {}, expected {}",
            x.len(),
            config.input_dim
        )));
    }
    Ok(())
}

/// Encoding angles for one input value: `(atan x, atan x^2)`.
pub fn encoding_angles(x: f64) -> (f64, f64) {
    (x.atan(), (x * x).atan())
}

/// Encoding gates for `x`: RY(atan x_i) then RZ(atan x_i^2) on wire `i`.
pub fn encode(x: &[f64], config: &VqcConfig) -> Result<Vec<Gate>> {
    config.validate()?;
    check_input(x, config)?;
    let mut gates = Vec::with_capacity(2 * x.len());
    for (i, &xi) in x.iter().enumerate() {
        let (ry, rz) = encoding_angles(xi);
        gates.push(Gate::Ry { target: i, theta: ry });
        gates.push(Gate::Rz { target: i, theta: rz });
    }
    Ok(gates)
}

/// The full gate list (encoding followed by the variational layers).
pub fn circuit(x: &[f64], params: &VqcParams, config: &VqcConfig) -> Result<Vec<Gate>> {
    params.check(config)?;
    let mut gates = encode(x, config)?;
    for layer in 0..config.num_layers {
        gates.extend(entangler_pairs(config).map(|(control, target)| Gate::Cnot { control, target }));
        for q in 0..config.num_qubits {
            gates.push(Gate::Rot {
                target: q,
                alpha: params.get(layer, q, 0),
                beta: params.get(layer, q, 1),
                gamma: params.get(layer, q, 2),
            });
        }
    }
    Ok(gates)
}

fn entangler_pairs(config: &VqcConfig) -> impl Iterator<Item = (usize, usize)> {
    let n = config.num_qubits;
    let count = match (n, config.entangler) {
        (1, _) => 0,
        (2, Entangler::Ring) => 2,
        (_, Entangler::Ring) => n,
        (_, Entangler::Chain) => n - 1,
    };
    (0..count).map(move |i| (i, (i + 1) % n))
}

/// Evaluates `<Z_k>` for `k < output_dim`.
pub fn forward(x: &[f64], params: &VqcParams, config: &VqcConfig) -> Result<Vec<f64>> {
    let program = Program::build(x, params, config)?;
    let mut state = StateVector::zero(config.num_qubits)?;
    program.run_from(0, &mut state);
    let mut out = vec![0.0; config.output_dim];
    state.expect_z_prefix(config.output_dim, &mut out);
    Ok(out)
}

/// Vector-Jacobian product of `forward` with respect to the trainable angles.
pub fn param_grad(x: &[f64], params: &VqcParams, config: &VqcConfig, upstream: &[f64]) -> Result<VqcParams> {
    Ok(vjp(x, params, config, upstream)?.params)
}

/// Vector-Jacobian product of `forward` with respect to the classical input,
/// chained through the arctan encoding.
pub fn input_grad(x: &[f64], params: &VqcParams, config: &VqcConfig, upstream: &[f64]) -> Result<Vec<f64>> {
    Ok(vjp(x, params, config, upstream)?.input)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqcGradient {
    pub params: VqcParams,
    pub input: Vec<f64>,
}

/// Both gradients of `upstream . forward(x, params)` from a single cached pass.
///
/// The state before every rotation is cached, so each shifted evaluation only
/// replays the suffix of the circuit after the shifted gate.
pub fn vjp(x: &[f64], params: &VqcParams, config: &VqcConfig, upstream: &[f64]) -> Result<VqcGradient> {
    if upstream.len() != config.output_dim {
        return Err(Error::shape(format!(
            "upstream gradient has length {}, expected {}",
            upstream.len(),
            config.output_dim
        )));
    }
    let program = Program::build(x, params, config)?;
    let mut grad = VqcGradient { params: VqcParams::zeros(config), input: vec![0.0; config.input_dim] };
    if upstream.iter().all(|&u| u == 0.0) {
        return Ok(grad);
    }

    let mut state = StateVector::zero(config.num_qubits)?;
    let dim = state.amplitudes().len();
    let mut prefixes = Vec::with_capacity(program.ops.len() * dim);
    for op in &program.ops {
        prefixes.extend_from_slice(state.amplitudes());
        op.apply(&mut state, 0.0);
    }

    let mut scratch = state;
    let mut shifted = |k: usize, shift: f64| {
        scratch.load(&prefixes[k * dim..(k + 1) * dim]);
        program.ops[k].apply(&mut scratch, shift);
        program.run_from(k + 1, &mut scratch);
        scratch.weighted_z(upstream)
    };

    for (k, op) in program.ops.iter().enumerate() {
        if op.slot == Slot::Fixed {
            continue;
        }
        let d = 0.5 * (shifted(k, FRAC_PI_2) - shifted(k, -FRAC_PI_2));
        match op.slot {
            Slot::Param(j) => grad.params.angles[j] += d,
            Slot::EncodeRy(i) => grad.input[i] += d / (1.0 + x[i] * x[i]),
            Slot::EncodeRz(i) => {
                let xi = x[i];
                grad.input[i] += d * 2.0 * xi / (1.0 + xi.powi(4));
            }
            Slot::Fixed => unreachable!(),
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Fixed,
    Param(usize),
    EncodeRy(usize),
    EncodeRz(usize),
}

#[derive(Debug, Clone, Copy)]
enum Prim {
    Ry(usize, f64),
    Rz(usize, f64),
    Cnot(usize, usize),
}

#[derive(Debug, Clone, Copy)]
struct Op {
    prim: Prim,
    slot: Slot,
}

impl Op {
    fn apply(&self, state: &mut StateVector, shift: f64) {
        match self.prim {
            Prim::Ry(q, theta) => state.ry(q, theta + shift),
            Prim::Rz(q, theta) => state.rz(q, theta + shift),
            Prim::Cnot(c, t) => state.cnot(c, t),
        }
    }
}

/// The circuit lowered to single-angle primitives, each tagged with the
/// quantity its angle comes from.
struct Program {
    ops: Vec<Op>,
}

impl Program {
    fn build(x: &[f64], params: &VqcParams, config: &VqcConfig) -> Result<Self> {
        config.validate()?;
        check_input(x, config)?;
        params.check(config)?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("VQC input {i} is not finite")));
        }
        let mut ops = Vec::with_capacity(2 * x.len() + config.num_layers * 4 * config.num_qubits);
        for (i, &xi) in x.iter().enumerate() {
            let (ry, rz) = encoding_angles(xi);
            ops.push(Op { prim: Prim::Ry(i, ry), slot: Slot::EncodeRy(i) });
            ops.push(Op { prim: Prim::Rz(i, rz), slot: Slot::EncodeRz(i) });
        }
        for layer in 0..config.num_layers {
            for (c, t) in entangler_pairs(config) {
                ops.push(Op { prim: Prim::Cnot(c, t), slot: Slot::Fixed });
            }
            for q in 0..config.num_qubits {
                let j = params.flat_index(layer, q, 0);
                let a = &params.angles;
                ops.push(Op { prim: Prim::Rz(q, a[j]), slot: Slot::Param(j) });
                ops.push(Op { prim: Prim::Ry(q, a[j + 1]), slot: Slot::Param(j + 1) });
                ops.push(Op { prim: Prim::Rz(q, a[j + 2]), slot: Slot::Param(j + 2) });
            }
        }
        Ok(Self { ops })
    }

    fn run_from(&self, start: usize, state: &mut StateVector) {
        for op in &self.ops[start..] {
            op.apply(state, 0.0);
        }
    }
}
