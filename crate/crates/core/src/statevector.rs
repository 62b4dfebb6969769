//! Dense statevector simulation for few-qubit registers.
//!
//! Qubit `q` corresponds to bit `q` of the basis-state index, so qubit 0 is the
//! least significant bit. Gates are applied in place, one stride pattern per
//! gate; no full 2^n x 2^n matrix is ever built.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;

/// A single gate of the circuit family used by the VQCs.
///
/// `Rot` is the general single-qubit unitary R(alpha, beta, gamma), defined as
/// RZ(gamma) * RY(beta) * RZ(alpha): RZ(alpha) acts first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Ry { target: usize, theta: f64 },
    Rz { target: usize, theta: f64 },
    Rot { target: usize, alpha: f64, beta: f64, gamma: f64 },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn target(&self) -> usize {
        match *self {
            Gate::Ry { target, .. }
            | Gate::Rz { target, .. }
            | Gate::Rot { target, .. }
            | Gate::Cnot { target, .. } => target,
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let target = self.target();
        if target >= num_qubits {
            return Err(Error::shape(format!(
                "gate target {target} out of range for {num_qubits} qubits"
            )));
        }
        if let Gate::Cnot { control, target } = *self {
            if control >= num_qubits {
                return Err(Error::shape(format!(
                    "CNOT control {control} out of range for {num_qubits} qubits"
                )));
            }
            if control == target {
                return Err(Error::shape(format!("CNOT control equals target ({control})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// The computational basis state |0...0>.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::config(format!(
                "qubit count {num_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amplitudes })
    }

    /// Builds a state from raw amplitudes. The caller is responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::shape(format!("{len} amplitudes is not a register size")));
        }
        Ok(Self { num_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Resets to |0...0> without reallocating.
    pub fn reset(&mut self) {
        self.amplitudes.fill(Complex64::new(0.0, 0.0));
        self.amplitudes[0] = Complex64::new(1.0, 0.0);
    }

    /// Overwrites the amplitudes with a same-sized buffer.
    pub(crate) fn load(&mut self, amplitudes: &[Complex64]) {
        self.amplitudes.copy_from_slice(amplitudes);
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for gate in gates {
            self.apply(gate)?;
        }
        Ok(())
    }

    /// Applies a gate whose indices the caller has already validated.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::Ry { target, theta } => self.ry(target, theta),
            Gate::Rz { target, theta } => self.rz(target, theta),
            Gate::Rot { target, alpha, beta, gamma } => {
                self.rz(target, alpha);
                self.ry(target, beta);
                self.rz(target, gamma);
            }
            Gate::Cnot { control, target } => self.cnot(control, target),
        }
    }

    pub(crate) fn ry(&mut self, target: usize, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        let stride = 1 << target;
        let dim = self.amplitudes.len();
        for block in (0..dim).step_by(2 * stride) {
            for i in block..block + stride {
                let a = self.amplitudes[i];
                let b = self.amplitudes[i + stride];
                self.amplitudes[i] = a * c - b * s;
                self.amplitudes[i + stride] = a * s + b * c;
            }
        }
    }

    pub(crate) fn rz(&mut self, target: usize, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        let lower = Complex64::new(c, -s);
        let upper = Complex64::new(c, s);
        let stride = 1 << target;
        let dim = self.amplitudes.len();
        for block in (0..dim).step_by(2 * stride) {
            for i in block..block + stride {
                self.amplitudes[i] *= lower;
                self.amplitudes[i + stride] *= upper;
            }
        }
    }

    pub(crate) fn cnot(&mut self, control: usize, target: usize) {
        let cmask = 1 << control;
        let tmask = 1 << target;
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    /// Pauli-Z expectation value of one qubit.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::shape(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        let mask = 1 << qubit;
        let value = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(b, a)| if b & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum::<f64>();
        Ok(value.clamp(-1.0, 1.0))
    }

    /// Pauli-Z expectations of qubits `0..count` in a single pass.
    pub(crate) fn expect_z_prefix(&self, count: usize, out: &mut [f64]) {
        debug_assert!(count <= self.num_qubits && out.len() >= count);
        out[..count].fill(0.0);
        for (b, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, slot) in out[..count].iter_mut().enumerate() {
                if b >> q & 1 == 0 {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        for v in &mut out[..count] {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    /// `sum_k weights[k] * <Z_k>` in a single pass.
    pub(crate) fn weighted_z(&self, weights: &[f64]) -> f64 {
        let mut total = 0.0;
        for (b, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            let mut signed = 0.0;
            for (q, w) in weights.iter().enumerate() {
                if b >> q & 1 == 0 {
                    signed += w;
                } else {
                    signed -= w;
                }
            }
            total += p * signed;
        }
        total
    }
}
