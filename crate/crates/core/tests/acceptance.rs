//! Acceptance suite. Prints one PASS/FAIL line per check and exits non-zero if
//! any check fails. Runs as a plain binary so the lines always reach the log.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use fedqlstm::harness::{run_experiment, ConvergenceCriterion, ExperimentConfig, ModelKind, ThresholdMode};
use fedqlstm::federated::aggregate;
use fedqlstm::seqmodel::{ClassicalLstmModel, ParamSet, QlstmDims, QlstmModel, SequenceModel, Tensor};
use fedqlstm::statevector::{Gate, StateVector};
use fedqlstm::targets::{bessel_j, struve_h, TargetSpec};
use fedqlstm::vqc::{self, Entangler, VqcConfig, VqcParams};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const STATEVECTOR_TOL: f64 = 1e-12;
const VQC_GRAD_TOL: f64 = 1e-4;
const QLSTM_GRAD_TOL: f64 = 1e-3;
const FD_STEP: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-6;
const SPECIAL_TOL: f64 = 1e-9;
const RECURRENCE_TOL: f64 = 1e-8;
const FROZEN_TOL: f64 = 1e-12;
const SUITE_SECONDS: f64 = 60.0;
const BASE_SEEDS: [u64; 3] = [1, 2, 3];
const ESCALATED_SEEDS: [u64; 7] = [1, 2, 3, 4, 5, 6, 7];

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: impl AsRef<str>) {
        if !pass {
            self.failures += 1;
        }
        println!("{} [{id}] {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    }
}

fn statevector_vs_dense() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.gen_range(1..=4);
        let gates: Vec<Gate> = (0..rng.gen_range(0..=30)).map(|_| common::random_gate(&mut rng, n)).collect();
        let start = if case % 2 == 0 {
            let mut z = vec![Complex64::new(0.0, 0.0); 1 << n];
            z[0] = Complex64::new(1.0, 0.0);
            z
        } else {
            common::random_state(&mut rng, n)
        };
        let mut sv = StateVector::from_amplitudes(start.clone()).unwrap();
        sv.apply_all(&gates).unwrap();
        let dense = common::dense_run(n, &start, &gates);
        for (a, b) in sv.amplitudes().iter().zip(&dense) {
            worst = worst.max((a - b).norm());
        }
    }
    worst
}

fn vqc_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(1..=4);
        let entangler = if rng.gen_bool(0.5) { Entangler::Ring } else { Entangler::Chain };
        let cfg = VqcConfig::new(n, rng.gen_range(1..=3), rng.gen_range(1..=n), rng.gen_range(1..=n))
            .unwrap()
            .with_entangler(entangler);
        let params = VqcParams::uniform(&cfg, PI, &mut rng);
        let x: Vec<f64> = (0..cfg.input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let up: Vec<f64> = (0..cfg.output_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dot = |out: Vec<f64>| out.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
        let grad = vqc::vjp(&x, &params, &cfg, &up).unwrap();
        let fd = common::central_diff(params.as_slice(), FD_STEP, |theta| {
            dot(vqc::forward(&x, &VqcParams::from_angles(&cfg, theta.to_vec()).unwrap(), &cfg).unwrap())
        });
        for (a, b) in grad.params.as_slice().iter().zip(&fd) {
            worst = worst.max(common::rel_err(*a, *b, REL_FLOOR));
        }
    }
    worst
}

fn model_gradient_error<M: SequenceModel>(model: &M, seq: &[f64], target: f64) -> f64 {
    let (_, grad) = model.loss_and_grad(seq, target).unwrap();
    let template = model.params();
    let fd = common::central_diff(&template.flatten(), FD_STEP, |theta| {
        let mut probe = model.clone();
        probe.load_params(&common::unflatten(&template, theta)).unwrap();
        probe.loss(seq, target).unwrap()
    });
    grad.flatten().iter().zip(&fd).map(|(a, b)| common::rel_err(*a, *b, REL_FLOOR)).fold(0.0, f64::max)
}

fn qlstm_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let dims = QlstmDims::default();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mut model = QlstmModel::zeros(dims).unwrap();
        for p in &mut model.vqc {
            *p = VqcParams::uniform(&dims.gate_config(), PI, &mut rng);
        }
        for w in &mut model.out_weight {
            *w = rng.gen_range(-1.0..1.0);
        }
        model.out_bias = rng.gen_range(-1.0..1.0);
        let seq: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst = worst.max(model_gradient_error(&model, &seq, rng.gen_range(-1.0..1.0)));
    }
    worst
}

fn special_function_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.gen_range(0..=3u32);
        let x = rng.gen_range(0.0..=20.0);
        let err = if i % 2 == 0 {
            (bessel_j(n as f64, x).unwrap() - common::bessel_j_exact(n, x, 100)).abs()
        } else {
            (struve_h(n as f64, x).unwrap() - common::struve_h_exact(n, x, 100)).abs()
        };
        worst = worst.max(err);
    }
    worst
}

fn recurrence_error() -> f64 {
    let mut worst = 0.0f64;
    for alpha in [1.0, 2.0, 3.0] {
        for i in 1..=2000 {
            let x = i as f64 * 0.01;
            let lhs = bessel_j(alpha - 1.0, x).unwrap() + bessel_j(alpha + 1.0, x).unwrap();
            let rhs = 2.0 * alpha / x * bessel_j(alpha, x).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

fn criterion_numerics(r: &mut Report) {
    let started = Instant::now();
    let sv = statevector_vs_dense();
    r.line("1.statevector", sv < STATEVECTOR_TOL, format!("200 random circuits vs dense Kronecker oracle: max deviation {sv:.2e} (< {STATEVECTOR_TOL:e})"));
    let vg = vqc_gradient_error();
    r.line("1.vqc-gradient", vg < VQC_GRAD_TOL, format!("20 random VQCs, parameter shift vs central differences: max rel err {vg:.2e} (< {VQC_GRAD_TOL:e})"));
    let qg = qlstm_gradient_error();
    r.line("1.qlstm-gradient", qg < QLSTM_GRAD_TOL, format!("10 random QLSTMs, BPTT vs central differences: max rel err {qg:.2e} (< {QLSTM_GRAD_TOL:e})"));
    let sf = special_function_error();
    r.line("1.special-functions", sf < SPECIAL_TOL, format!("100 points vs fixed-point series oracle: max abs err {sf:.2e} (< {SPECIAL_TOL:e})"));
    let rec = recurrence_error();
    r.line("1.bessel-recurrence", rec < RECURRENCE_TOL, format!("alpha in {{1,2,3}}, x in (0,20]: max residual {rec:.2e} (< {RECURRENCE_TOL:e})"));
    let secs = started.elapsed().as_secs_f64();
    r.line("1.runtime", secs < SUITE_SECONDS, format!("numerical-core suite took {secs:.1}s (< {SUITE_SECONDS}s)"));
}

fn flat(values: Vec<f64>) -> ParamSet {
    ParamSet::new(vec![Tensor::new("theta", vec![values.len()], values).unwrap()])
}

fn aggregate_checks() -> (bool, bool, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (mut exact, mut perm, mut copies) = (true, true, true);
    for _ in 0..500 {
        let k = rng.gen_range(1..=10);
        let mut sets: Vec<ParamSet> = (0..k)
            .map(|_| flat((0..8).map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-12..12))).collect()))
            .collect();
        let mean = aggregate(&sets).unwrap();
        for (j, got) in mean.flatten().iter().enumerate() {
            let column: Vec<f64> = sets.iter().map(|s| s.tensors[0].data[j]).collect();
            exact &= got.to_bits() == common::mean_exact(&column).to_bits();
        }
        sets.shuffle(&mut rng);
        perm &= aggregate(&sets).unwrap() == mean;
        copies &= aggregate(&vec![sets[0].clone(); k]).unwrap() == sets[0];
    }
    (exact, perm, copies)
}

fn criterion_protocol(r: &mut Report) {
    let started = Instant::now();
    let (exact, perm, copies) = aggregate_checks();
    r.line("2.aggregate-exact", exact, "aggregate equals the correctly rounded exact mean on 500 random client sets");
    r.line("2.aggregate-permutation", perm, "aggregate is bit-identical under client reordering");
    r.line("2.aggregate-copies", copies, "aggregate of k copies returns the original bit for bit");
    let drift = common::frozen_drift(ModelKind::Qlstm);
    r.line("2.lr-zero", drift < FROZEN_TOL, format!("lr = 0 over 5 rounds: max test-loss drift {drift:.2e} (< {FROZEN_TOL:e})"));
    let cfg = common::determinism_config(2);
    let a = common::rounds_csv_with_threads(&cfg, 1);
    let b = common::rounds_csv_with_threads(&cfg, 4);
    r.line("2.determinism", a == b && !a.is_empty(), format!("default config, seed {}, 2 rounds, run twice (1 and 4 worker threads): CSV bytes identical = {}", cfg.master_seed, a == b));
    let secs = started.elapsed().as_secs_f64();
    r.line("2.runtime", secs < SUITE_SECONDS, format!("protocol suite took {secs:.1}s (< {SUITE_SECONDS}s)"));
}

fn criterion_detector(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut agree = 0;
    let mut monotone = true;
    for _ in 0..1000 {
        let losses = common::random_loss_curve(&mut rng);
        let w = rng.gen_range(2..=8);
        let (m1, s1) = (rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.3));
        let (m2, s2) = (m1 + rng.gen_range(0.0..0.2), s1 + rng.gen_range(0.0..0.2));
        let at = |m: f64, s: f64| ConvergenceCriterion::new(w, m, s, ThresholdMode::Relative).unwrap().detect(&losses);
        agree += (at(m1, s1) == common::brute_detect(&losses, w, m1, s1, true)) as usize;
        let rank = |v: Option<usize>| v.unwrap_or(usize::MAX);
        let base = rank(at(m1, s1));
        monotone &= rank(at(m2, s1)) <= base && rank(at(m1, s2)) <= base;
    }
    r.line("3.brute-force", agree == 1000, format!("detector agrees with brute-force window scan on {agree}/1000 random sequences"));
    r.line("3.monotone", monotone, "raising either threshold never delays detection (1000 sequences)");
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Setting {
    BesselQlstmE1,
    BesselClassicalE1,
    BesselQlstmE2,
    SinusoidQlstm,
    SinusoidClassical,
    StruveQlstm,
    StruveClassical,
    BesselQlstmK10,
}

impl Setting {
    fn config(self, seed: u64) -> ExperimentConfig {
        use Setting::*;
        let desk = ExperimentConfig::desk().with_seed(seed);
        let cfg = match self {
            BesselQlstmE1 => desk,
            BesselClassicalE1 => desk.with_model(ModelKind::ClassicalLstm),
            BesselQlstmE2 => ExperimentConfig { local_epochs: 2, ..desk },
            SinusoidQlstm => desk.with_target(TargetSpec::sinusoid()),
            SinusoidClassical => desk.with_target(TargetSpec::sinusoid()).with_model(ModelKind::ClassicalLstm),
            StruveQlstm => desk.with_target(TargetSpec::struve()),
            StruveClassical => desk.with_target(TargetSpec::struve()).with_model(ModelKind::ClassicalLstm),
            BesselQlstmK10 => ExperimentConfig { num_clients: 10, participation: 10, ..desk },
        };
        ExperimentConfig { label: Some(format!("{self:?}")), ..cfg }
    }
}

#[derive(Clone, Copy)]
struct RunSummary {
    rounds: usize,
    converged: bool,
    computations: usize,
}

struct Runs {
    done: BTreeMap<(Setting, u64), RunSummary>,
}

impl Runs {
    fn ensure(&mut self, settings: &[Setting], seeds: &[u64]) {
        let todo: Vec<(Setting, u64)> = settings
            .iter()
            .flat_map(|s| seeds.iter().map(move |seed| (*s, *seed)))
            .filter(|k| !self.done.contains_key(k))
            .collect();
        let results: Vec<((Setting, u64), RunSummary)> = todo
            .into_par_iter()
            .map(|(s, seed)| {
                let report = run_experiment(&s.config(seed)).expect("desk experiment");
                let summary = RunSummary {
                    rounds: report.effective_rounds(),
                    converged: report.converged(),
                    computations: report.overall_local_computations,
                };
                ((s, seed), summary)
            })
            .collect();
        self.done.extend(results);
    }

    fn median<F: Fn(&RunSummary) -> usize>(&self, s: Setting, seeds: &[u64], metric: F) -> f64 {
        let mut v: Vec<f64> = seeds.iter().map(|seed| metric(&self.done[&(s, *seed)]) as f64).collect();
        fedqlstm::harness::median(&mut v).unwrap()
    }

    fn table(&self, s: Setting, seeds: &[u64]) -> String {
        seeds
            .iter()
            .map(|seed| {
                let r = self.done[&(s, *seed)];
                format!("s{seed}:{}{}", r.rounds, if r.converged { "" } else { "*" })
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// `lhs` is expected to be below (or, with `allow_equal`, not above) `rhs`.
struct Directional {
    id: &'static str,
    what: &'static str,
    lhs: Setting,
    rhs: Setting,
    computations: bool,
    allow_equal: bool,
}

fn criterion_directional(r: &mut Report) {
    use Setting::*;
    let checks = [
        Directional { id: "4.bessel-rounds", what: "Bessel J2 rounds, QLSTM E=1 < classical E=1", lhs: BesselQlstmE1, rhs: BesselClassicalE1, computations: false, allow_equal: false },
        Directional { id: "4.epoch-computations", what: "QLSTM overall computations, E=1 <= E=2", lhs: BesselQlstmE1, rhs: BesselQlstmE2, computations: true, allow_equal: true },
        Directional { id: "4.sinusoid-rounds", what: "sinusoid rounds, QLSTM E=1 < classical E=1", lhs: SinusoidQlstm, rhs: SinusoidClassical, computations: false, allow_equal: false },
        Directional { id: "4.struve-rounds", what: "Struve H0 rounds, QLSTM E=1 < classical E=1", lhs: StruveQlstm, rhs: StruveClassical, computations: false, allow_equal: false },
        Directional { id: "4.client-rounds", what: "QLSTM rounds, K=10 < K=5", lhs: BesselQlstmK10, rhs: BesselQlstmE1, computations: false, allow_equal: false },
    ];
    let started = Instant::now();
    let mut runs = Runs { done: BTreeMap::new() };
    let all: Vec<Setting> = checks.iter().flat_map(|c| [c.lhs, c.rhs]).collect();
    runs.ensure(&all, &BASE_SEEDS);
    println!("desk runs: rounds per seed (* = never converged, counted at the round limit)");
    for check in &checks {
        let holds = |runs: &Runs, seeds: &[u64]| {
            let metric = |s: &RunSummary| if check.computations { s.computations } else { s.rounds };
            let (a, b) = (runs.median(check.lhs, seeds, metric), runs.median(check.rhs, seeds, metric));
            (if check.allow_equal { a <= b } else { a < b }, a, b)
        };
        let mut seeds: &[u64] = &BASE_SEEDS;
        let (mut pass, mut a, mut b) = holds(&runs, seeds);
        if !pass {
            seeds = &ESCALATED_SEEDS;
            runs.ensure(&[check.lhs, check.rhs], seeds);
            (pass, a, b) = holds(&runs, seeds);
        }
        let unit = if check.computations { "computations" } else { "rounds" };
        println!("  {:?}: {}", check.lhs, runs.table(check.lhs, seeds));
        println!("  {:?}: {}", check.rhs, runs.table(check.rhs, seeds));
        r.line(check.id, pass, format!("{}: median {unit} {a} vs {b} over {} seeds", check.what, seeds.len()));
    }
    println!("desk runs took {:.0}s", started.elapsed().as_secs_f64());
}

fn criterion_param_count(r: &mut Report) {
    let q = QlstmModel::zeros(QlstmDims::default()).unwrap().num_params();
    let c = ClassicalLstmModel::zeros(1, 4).unwrap().num_params();
    r.line("5.param-count", q < c, format!("QLSTM default parameter count < classical LSTM count at hidden size 4: {q} vs {c}"));
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    criterion_numerics(&mut report);
    criterion_protocol(&mut report);
    criterion_detector(&mut report);
    criterion_param_count(&mut report);
    criterion_directional(&mut report);
    if report.failures == 0 {
        println!("acceptance: all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} check(s) failed", report.failures);
        ExitCode::FAILURE
    }
}
