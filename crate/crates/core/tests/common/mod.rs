//! Checks shared by the property tests and the acceptance suite. Each
//! returns the worst deviation it observed so callers choose the bound.
#![allow(dead_code)]

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use sqdr_core::circuits::{Family, PqcSpec};
use sqdr_core::data::Dataset;
use sqdr_core::experiment::{HeadKind, Model, QuantumMode, TrainConfig};
use sqdr_core::numerics::{sample_uniform, Rng};
use sqdr_core::par::Exec;
use sqdr_core::quantum::{
    evolve, evolve_density, param_shift, param_shift_density, Circuit, DensityMatrix, Gate, KrausChannel,
    ShiftEngine, StateVector,
};
use sqdr_core::snn::{ConvBlock, EncoderConfig, SpikeFn};

pub fn random_gate(rng: &mut Rng, n: usize) -> Gate {
    let q = rng.index(n);
    let mut ang = || TAU * rng.uniform() - std::f64::consts::PI;
    let angles = [ang(), ang(), ang(), ang()];
    let other = if n > 1 { (q + 1 + rng.index(n - 1)) % n } else { q };
    match rng.index(if n > 1 { 11 } else { 9 }) {
        0 => Gate::H(q),
        1 => Gate::X(q),
        2 => Gate::Y(q),
        3 => Gate::Z(q),
        4 => Gate::Rx(q, angles[0]),
        5 => Gate::Ry(q, angles[0]),
        6 => Gate::Rz(q, angles[0]),
        7 => Gate::Rot {
            qubit: q,
            alpha: angles[0],
            beta: angles[1],
            gamma: angles[2],
            sigma: angles[3],
        },
        8 => Gate::RotQ {
            qubit: q,
            omega: angles[0],
            theta: angles[1],
            phi: angles[2],
        },
        9 => Gate::Cz(q, other),
        _ => Gate::Cnot {
            control: q,
            target: other,
        },
    }
}

/// Largest entry of `U†U − I` over random gates.
pub fn unitarity_deviation(trials: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u = random_gate(&mut rng, 2).unitary();
        let d = u.len();
        for i in 0..d {
            for j in 0..d {
                let s: C64 = (0..d).map(|k| u[k][i].conj() * u[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
    }
    worst
}

/// `|‖ψ‖² − 1|` after `n_gates` random gates.
pub fn norm_drift(n_qubits: usize, n_gates: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut s = StateVector::new(n_qubits).unwrap();
    for _ in 0..n_gates {
        s.apply_gate(&random_gate(&mut rng, n_qubits)).unwrap();
    }
    (s.norm_sqr() - 1.0).abs()
}

/// Largest `‖Σ K†K − I‖` over the built-in channels on a grid of strengths.
pub fn kraus_deviation() -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..=50 {
        let p = k as f64 / 50.0;
        for ch in [
            KrausChannel::bit_flip(p).unwrap(),
            KrausChannel::depolarizing(p).unwrap(),
            KrausChannel::amplitude_damping(p).unwrap(),
        ] {
            worst = worst.max(ch.completeness_deviation());
        }
    }
    worst
}

pub fn random_circuit(rng: &mut Rng, n: usize, len: usize) -> Circuit {
    let mut c = Circuit::new(n);
    for _ in 0..len {
        c.push(random_gate(rng, n));
    }
    c
}

/// Largest gap between `ρ = |ψ⟩⟨ψ|` from the statevector engine and the
/// noiseless density engine, entry-wise and over `⟨Z_j⟩`.
pub fn engine_agreement(n_circuits: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_circuits {
        let n = 1 + rng.index(5);
        let c = random_circuit(&mut rng, n, 30);
        let mut sv = StateVector::new(n).unwrap();
        let mut rho = DensityMatrix::new(n).unwrap();
        for g in c.gates() {
            sv.apply_gate(&g).unwrap();
            rho.apply_gate(&g).unwrap();
        }
        let pure = DensityMatrix::from_pure(&sv).unwrap();
        let dim = 1usize << n;
        for r in 0..dim {
            for col in 0..dim {
                worst = worst.max((pure.entry(r, col) - rho.entry(r, col)).norm());
            }
        }
        for (a, b) in sv.expectations_z().iter().zip(rho.expectations_z()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// The three closed-form channel cases: deviations of the resulting
/// density matrices from their exact values.
pub fn channel_cases() -> Vec<(&'static str, f64)> {
    let dev = |rho: &DensityMatrix, want: [[f64; 2]; 2]| {
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((rho.entry(r, c) - C64::new(want[r][c], 0.0)).norm());
            }
        }
        worst
    };
    let mut out = Vec::new();
    let mut rho = DensityMatrix::new(1).unwrap();
    rho.apply_channel(&KrausChannel::bit_flip(1.0).unwrap(), 0).unwrap();
    out.push(("bit flip p=1 maps |0><0| to |1><1|", dev(&rho, [[0.0, 0.0], [0.0, 1.0]])));
    let mut rho = DensityMatrix::new(1).unwrap();
    rho.apply_gate(&Gate::Ry(0, 1.1)).unwrap();
    rho.apply_gate(&Gate::Rz(0, 0.4)).unwrap();
    rho.apply_channel(&KrausChannel::depolarizing(0.75).unwrap(), 0).unwrap();
    out.push(("depolarizing p=3/4 gives I/2", dev(&rho, [[0.5, 0.0], [0.0, 0.5]])));
    let mut rho = DensityMatrix::new(1).unwrap();
    rho.apply_gate(&Gate::H(0)).unwrap();
    rho.apply_channel(&KrausChannel::amplitude_damping(1.0).unwrap(), 0).unwrap();
    out.push(("amplitude damping g=1 gives |0><0|", dev(&rho, [[1.0, 0.0], [0.0, 0.0]])));
    out
}

pub struct DrCase {
    pub spec: PqcSpec,
    pub x: Vec<f64>,
    pub params: Vec<f64>,
}

pub fn random_dr(rng: &mut Rng, max_qubits: usize, max_blocks: usize) -> DrCase {
    let n = 1 + rng.index(max_qubits);
    let b = 1 + rng.index(max_blocks);
    let spec = PqcSpec::new(Family::Dr, n, b).unwrap();
    DrCase {
        x: sample_uniform(rng, -TAU, TAU, spec.n_features()).unwrap(),
        params: sample_uniform(rng, 0.0, TAU, spec.n_params()).unwrap(),
        spec,
    }
}

fn expectations(case: &DrCase, x: &[f64], p: &[f64], noise: Option<&KrausChannel>) -> Vec<f64> {
    evolve(&case.spec.build(x, p).unwrap(), noise).unwrap()
}

/// Worst gap between shift-rule derivatives (angles and features) and
/// central finite differences on random re-upload circuits.
pub fn gradient_vs_fd(n_circuits: usize, max_qubits: usize, noise: Option<&KrausChannel>, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..n_circuits {
        let case = random_dr(&mut rng, max_qubits, 3);
        let c = case.spec.build(&case.x, &case.params).unwrap();
        let (np, nf) = (case.params.len(), case.x.len());
        let jac = match noise {
            None => param_shift(&c, np, nf, ShiftEngine::Reverse, Exec::Parallel).unwrap(),
            Some(ch) => param_shift_density(&c, np, nf, Some(ch), Exec::Parallel).unwrap(),
        };
        let n = case.spec.n_qubits;
        for i in 0..np {
            let (mut up, mut down) = (case.params.clone(), case.params.clone());
            up[i] += h;
            down[i] -= h;
            let (eu, ed) = (expectations(&case, &case.x, &up, noise), expectations(&case, &case.x, &down, noise));
            for j in 0..n {
                worst = worst.max(((eu[j] - ed[j]) / (2.0 * h) - jac.d_param(i, j)).abs());
            }
        }
        for k in 0..nf {
            let (mut up, mut down) = (case.x.clone(), case.x.clone());
            up[k] += h;
            down[k] -= h;
            let (eu, ed) = (
                expectations(&case, &up, &case.params, noise),
                expectations(&case, &down, &case.params, noise),
            );
            for j in 0..n {
                worst = worst.max(((eu[j] - ed[j]) / (2.0 * h) - jac.d_feature(k, j)).abs());
            }
        }
    }
    worst
}

pub fn synthetic_dataset(n: usize, side: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    Dataset {
        height: side,
        width: side,
        pixels: (0..n * side * side).map(|_| (rng.uniform() * 256.0) as u8).collect(),
        labels: (0..n).map(|_| rng.index(10)).collect(),
    }
}

/// A small model whose spikes use the smooth surrogate, so the whole
/// pipeline is differentiable.
pub fn smooth_config(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        n_qubits: 2,
        n_blocks: 2,
        seed,
        head: HeadKind::Mlp,
        ..TrainConfig::default()
    };
    cfg.encoder = EncoderConfig {
        height: 8,
        width: 8,
        time_steps: 4,
        phase_period: 4,
        blocks: vec![ConvBlock {
            in_channels: 1,
            out_channels: 3,
            kernel: 3,
            stride: 1,
            padding: 1,
            batch_norm: true,
            pool: 2,
        }],
        adaptive_pool: 2,
        out_features: 6,
        threshold: 0.3,
        spike: SpikeFn::Smooth,
        ..EncoderConfig::standard(2)
    };
    cfg
}

/// Largest relative gap between backpropagated gradients of the batch loss
/// and central finite differences, over a sample of entries of every
/// trainable tensor.
pub fn pipeline_gradient_error(seed: u64) -> f64 {
    let cfg = smooth_config(seed);
    let data = synthetic_dataset(4, 8, seed);
    let idx: Vec<usize> = (0..4).collect();
    let mut model = Model::new(&cfg).unwrap();
    let loss = |m: &Model| {
        let mut m = m.clone();
        let g = m.batch_grads(&data, &idx, &[], QuantumMode::Pure, Exec::Sequential).unwrap();
        g.loss.iter().sum::<f64>() / g.loss.len() as f64
    };
    let g = model.clone().batch_grads(&data, &idx, &[], QuantumMode::Pure, Exec::Sequential).unwrap();
    let mut grads: Vec<Vec<f64>> = g.encoder.clone();
    grads.push(g.theta.clone());
    grads.push(g.head_w.clone());
    grads.push(g.head_b.clone());
    let mut rng = Rng::new(seed ^ 0xF00D);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let n_tensors = model.params_mut().len();
    for t in 0..n_tensors {
        let len = model.params_mut()[t].len();
        for _ in 0..len.min(6) {
            let i = rng.index(len);
            let orig = model.params_mut()[t][i];
            model.params_mut()[t][i] = orig + h;
            let up = loss(&model);
            model.params_mut()[t][i] = orig - h;
            let down = loss(&model);
            model.params_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[t][i];
            let scale = numeric.abs().max(analytic.abs()).max(1e-3);
            worst = worst.max((numeric - analytic).abs() / scale);
        }
    }
    worst
}

/// Trajectory average versus the exact density engine for one noisy circuit.
pub fn trajectory_gap(n_traj: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let case = random_dr(&mut rng, 3, 2);
    let c = case.spec.build(&case.x, &case.params).unwrap();
    let ch = KrausChannel::depolarizing(0.1).unwrap();
    let exact = evolve_density(&c, Some(&ch)).unwrap().expectations_z();
    let mut acc = vec![0.0; exact.len()];
    for _ in 0..n_traj {
        let t = sqdr_core::quantum::sample_trajectory(&c, &ch, &mut rng).unwrap();
        for (a, v) in acc.iter_mut().zip(evolve(&t, None).unwrap()) {
            *a += v / n_traj as f64;
        }
    }
    exact.iter().zip(&acc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
