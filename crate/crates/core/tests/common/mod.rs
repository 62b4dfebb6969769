//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use fedqlstm::seqmodel::ParamSet;
use fedqlstm::statevector::Gate;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity(dim: usize) -> Matrix {
    (0..dim).map(|i| (0..dim).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    (0..n).map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn add(a: &Matrix, b: &Matrix) -> Matrix {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn ry(theta: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
}

fn rz(theta: f64) -> Matrix {
    let h = theta / 2.0;
    vec![vec![Complex64::from_polar(1.0, -h), c(0.0, 0.0)], vec![c(0.0, 0.0), Complex64::from_polar(1.0, h)]]
}

/// Full operator with `ops[q]` acting on qubit q; qubit 0 is the least significant bit.
fn embed(num_qubits: usize, ops: &[(usize, Matrix)]) -> Matrix {
    let mut out = vec![vec![c(1.0, 0.0)]];
    for q in (0..num_qubits).rev() {
        let local = ops.iter().find(|(t, _)| *t == q).map(|(_, m)| m.clone()).unwrap_or_else(|| identity(2));
        out = kron(&out, &local);
    }
    out
}

pub fn gate_matrix(num_qubits: usize, gate: &Gate) -> Matrix {
    match *gate {
        Gate::Ry { target, theta } => embed(num_qubits, &[(target, ry(theta))]),
        Gate::Rz { target, theta } => embed(num_qubits, &[(target, rz(theta))]),
        Gate::Rot { target, alpha, beta, gamma } => {
            embed(num_qubits, &[(target, matmul(&rz(gamma), &matmul(&ry(beta), &rz(alpha))))])
        }
        Gate::Cnot { control, target } => {
            let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
            let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
            let x = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
            add(&embed(num_qubits, &[(control, p0)]), &embed(num_qubits, &[(control, p1), (target, x)]))
        }
    }
}

/// Dense matrix-vector simulation of `gates` applied to `state`.
pub fn dense_run(num_qubits: usize, state: &[Complex64], gates: &[Gate]) -> Vec<Complex64> {
    let mut psi = state.to_vec();
    for g in gates {
        let m = gate_matrix(num_qubits, g);
        psi = m.iter().map(|row| row.iter().zip(&psi).map(|(a, b)| a * b).sum()).collect();
    }
    psi
}

pub fn dense_expect_z(state: &[Complex64], qubit: usize) -> f64 {
    state.iter().enumerate().map(|(i, a)| if i >> qubit & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() }).sum()
}

pub fn random_gate(rng: &mut impl Rng, num_qubits: usize) -> Gate {
    let target = rng.gen_range(0..num_qubits);
    let angle = |rng: &mut dyn rand::RngCore| rng.gen_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
    match rng.gen_range(0..if num_qubits > 1 { 4 } else { 3 }) {
        0 => Gate::Ry { target, theta: angle(rng) },
        1 => Gate::Rz { target, theta: angle(rng) },
        2 => Gate::Rot { target, alpha: angle(rng), beta: angle(rng), gamma: angle(rng) },
        _ => {
            let mut control = rng.gen_range(0..num_qubits);
            while control == target {
                control = rng.gen_range(0..num_qubits);
            }
            Gate::Cnot { control, target }
        }
    }
}

pub fn random_state(rng: &mut impl Rng, num_qubits: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> =
        (0..1 << num_qubits).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Same layout as `template`, values taken from `flat` in order.
pub fn unflatten(template: &ParamSet, flat: &[f64]) -> ParamSet {
    let mut out = template.clone();
    let mut it = flat.iter();
    for t in &mut out.tensors {
        for v in &mut t.data {
            *v = *it.next().expect("flat vector too short");
        }
    }
    assert!(it.next().is_none(), "flat vector too long");
    out
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Fixed-point scale of the series oracles: values are carried as integers times 2^-FRAC_BITS.
const FRAC_BITS: usize = 480;

/// `x = m / 2^s` with integer `m` and `s >= 0`, for finite non-negative `x`.
fn dyadic(x: f64) -> (BigInt, usize) {
    use num_traits::Float;
    let (mantissa, exponent, _) = x.integer_decode();
    if exponent >= 0 {
        (BigInt::from(mantissa) << exponent as usize, 0)
    } else {
        (BigInt::from(mantissa), (-exponent) as usize)
    }
}

fn from_fixed(v: &BigInt) -> f64 {
    v.to_f64().unwrap() * 2f64.powi(-(FRAC_BITS as i32))
}

/// Sums an alternating series with first term `first` (already scaled) and term
/// ratio `-m^2 / (2^shift * denom(k))`, keeping FRAC_BITS fractional bits.
fn fixed_series(first: BigInt, m: &BigInt, shift: usize, terms: u32, denom: impl Fn(u32) -> u64) -> BigInt {
    let m_sq = m * m;
    let mut term = first;
    let mut sum = BigInt::zero();
    for k in 0..terms {
        sum += &term;
        term = -((term * &m_sq) >> shift) / BigInt::from(denom(k));
    }
    sum
}

/// J_n(x) for integer n from its power series, summed with ~480 fractional bits.
pub fn bessel_j_exact(n: u32, x: f64, terms: u32) -> f64 {
    let (m, s) = dyadic(x);
    // (x/2)^n / n! = m^n / (2^((s+1)n) n!)
    let first = (num_traits::pow(m.clone(), n as usize) << FRAC_BITS >> ((s + 1) * n as usize)) / factorial(n);
    let n = n as u64;
    from_fixed(&fixed_series(first, &m, 2 * s + 2, terms, |k| (k as u64 + 1) * (k as u64 + 1 + n)))
}

/// H_n(x) for integer n. Each Gamma product is pi times a rational, so the sum is
/// carried in fixed point up to the final division by pi.
pub fn struve_h_exact(n: u32, x: f64, terms: u32) -> f64 {
    let (m, s) = dyadic(x);
    let double_factorial = (0..=n).fold(BigInt::one(), |acc, j| acc * BigInt::from(2 * j + 1));
    // 2 x^(n+1) / (2n+1)!!
    let first = (num_traits::pow(m.clone(), n as usize + 1) << (FRAC_BITS + 1) >> (s * (n as usize + 1))) / double_factorial;
    let n = n as u64;
    let sum = fixed_series(first, &m, 2 * s, terms, |k| (2 * k as u64 + 3) * (2 * k as u64 + 2 * n + 3));
    from_fixed(&sum) / std::f64::consts::PI
}

/// Exact mean of `values`, correctly rounded.
pub fn mean_exact(values: &[f64]) -> f64 {
    let sum: BigRational = values.iter().map(|v| exact(*v)).sum();
    let mean = sum / BigInt::from(values.len());
    let approx = mean.to_f64().unwrap();
    // Nearest of the neighbours, in case the conversion is only faithful.
    let err = |v: f64| (exact(v) - &mean).abs();
    [approx.next_down(), approx, approx.next_up()]
        .into_iter()
        .min_by(|a, b| err(*a).cmp(&err(*b)).then((a.to_bits() & 1).cmp(&(b.to_bits() & 1))))
        .unwrap()
}

/// Window scan written out directly: earliest window whose mean and population
/// std are both within limits, as the 1-based index of its last element.
pub fn brute_detect(losses: &[f64], width: usize, margin: f64, std_threshold: f64, relative: bool) -> Option<usize> {
    if losses.len() < width {
        return None;
    }
    let scale = if relative { losses[0] } else { 1.0 };
    for end in width..=losses.len() {
        let window = &losses[end - width..end];
        let mean = window.iter().sum::<f64>() / width as f64;
        let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / width as f64;
        if mean <= margin * scale && var.sqrt() <= std_threshold * scale {
            return Some(end);
        }
    }
    None
}

/// Decaying noisy loss curves that sometimes settle below the thresholds.
pub fn random_loss_curve(rng: &mut impl Rng) -> Vec<f64> {
    let len = rng.gen_range(0..60);
    let start = rng.gen_range(0.01..2.0);
    let rate = rng.gen_range(0.0..0.6);
    let noise = rng.gen_range(0.0..0.05);
    (0..len)
        .map(|t| {
            let base = start * (-rate * t as f64).exp();
            (base * (1.0 + noise * rng.gen_range(-1.0..1.0))).max(0.0)
        })
        .collect()
}

/// A short experiment that trains with `lr = 0` and never stops early.
pub fn frozen_config(kind: fedqlstm::harness::ModelKind, rounds: usize) -> fedqlstm::harness::ExperimentConfig {
    let mut cfg = fedqlstm::harness::ExperimentConfig::desk().with_model(kind);
    cfg.per_client = 60;
    cfg.max_rounds = rounds;
    cfg.stop_on_convergence = false;
    cfg.optimizer.lr = 0.0;
    cfg
}

/// Largest deviation of the global test loss from its first-round value.
pub fn frozen_drift(kind: fedqlstm::harness::ModelKind) -> f64 {
    let report = fedqlstm::harness::run_experiment(&frozen_config(kind, 5)).unwrap();
    let losses = report.test_losses();
    assert_eq!(losses.len(), 5);
    losses.iter().map(|l| (l - losses[0]).abs()).fold(0.0, f64::max)
}

/// The default experiment at desk size, cut to `rounds` rounds.
pub fn determinism_config(rounds: usize) -> fedqlstm::harness::ExperimentConfig {
    fedqlstm::harness::ExperimentConfig { max_rounds: rounds, ..fedqlstm::harness::ExperimentConfig::desk() }
}

/// rounds.csv of `config`, produced on a dedicated pool of `threads` workers.
pub fn rounds_csv_with_threads(config: &fedqlstm::harness::ExperimentConfig, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let report = fedqlstm::harness::run_experiment(config).unwrap();
        fedqlstm::harness::rounds_csv(&report).unwrap()
    })
}
