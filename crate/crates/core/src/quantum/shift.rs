//! Parameter-shift gradients of `⟨Z_j⟩` with respect to every angle whose
//! source is a trainable parameter or an input feature.
//!
//! [`ShiftEngine::Literal`] evaluates `½[f(θ+π/2) − f(θ−π/2)]` with two full
//! circuit runs per angle. [`ShiftEngine::Reverse`] obtains the same
//! difference in one backward sweep: writing `R(θ±π/2) = R(θ)(I ∓ iP)/√2`,
//! the two shifted expectations differ by `2·Im⟨λ|G|φ⟩`, where `φ` is the
//! state entering the gate, `G` the gate with its generator `P` spliced in,
//! and `λ` the observable pulled back through the rest of the circuit.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::channel::KrausChannel;
use super::circuit::{AngleSource, Circuit};
use super::evolve::{evolve, evolve_statevector};
use super::gate::Gate;
use super::statevector::apply_gate_to;
use super::{dagger, kernel};
use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftEngine {
    Literal,
    #[default]
    Reverse,
}

/// Expectations and their derivatives. Row `i` of `params` holds
/// `∂⟨Z_j⟩/∂θ_i` for every wire `j`; `features` likewise for `x_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    pub n_qubits: usize,
    pub expectations: Vec<f64>,
    pub params: Vec<f64>,
    pub features: Vec<f64>,
}

impl Jacobian {
    fn zeros(n_qubits: usize, n_params: usize, n_features: usize) -> Self {
        Self {
            n_qubits,
            expectations: Vec::new(),
            params: vec![0.0; n_params * n_qubits],
            features: vec![0.0; n_features * n_qubits],
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.len() / self.n_qubits
    }

    pub fn n_features(&self) -> usize {
        self.features.len() / self.n_qubits
    }

    pub fn d_param(&self, i: usize, j: usize) -> f64 {
        self.params[i * self.n_qubits + j]
    }

    pub fn d_feature(&self, k: usize, j: usize) -> f64 {
        self.features[k * self.n_qubits + j]
    }

    /// Contracts with an upstream gradient over wires:
    /// `(Σ_j g_j ∂⟨Z_j⟩/∂θ, Σ_j g_j ∂⟨Z_j⟩/∂x)`.
    pub fn vjp(&self, upstream: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let contract = |rows: &[f64]| {
            rows.chunks(self.n_qubits)
                .map(|r| r.iter().zip(upstream).map(|(a, g)| a * g).sum())
                .collect()
        };
        (contract(&self.params), contract(&self.features))
    }

    fn slot_mut(&mut self, source: AngleSource) -> &mut [f64] {
        let n = self.n_qubits;
        match source {
            AngleSource::Param(i) => &mut self.params[i * n..(i + 1) * n],
            AngleSource::Feature(k) => &mut self.features[k * n..(k + 1) * n],
            AngleSource::Fixed => unreachable!(),
        }
    }
}

/// Every differentiable `(op index, slot, source)` in circuit order.
fn differentiable_slots(
    circuit: &Circuit,
    n_params: usize,
    n_features: usize,
) -> Result<Vec<(usize, usize, AngleSource)>> {
    let mut out = Vec::new();
    for (k, op) in circuit.ops().iter().enumerate() {
        for s in 0..op.gate.n_slots() {
            match op.sources[s] {
                AngleSource::Fixed => continue,
                AngleSource::Param(i) if i >= n_params => {
                    return Err(Error::shape(format!(
                        "parameter index {i} with {n_params} parameters"
                    )))
                }
                AngleSource::Feature(i) if i >= n_features => {
                    return Err(Error::shape(format!(
                        "feature index {i} with {n_features} features"
                    )))
                }
                src => out.push((k, s, src)),
            }
        }
    }
    Ok(out)
}

/// Noiseless gradients on the statevector engine.
pub fn param_shift(
    circuit: &Circuit,
    n_params: usize,
    n_features: usize,
    engine: ShiftEngine,
    exec: Exec,
) -> Result<Jacobian> {
    match engine {
        ShiftEngine::Literal => literal(circuit, n_params, n_features, None, exec),
        ShiftEngine::Reverse => {
            let n = circuit.n_qubits();
            let unit: Vec<Vec<f64>> = (0..n)
                .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let (expectations, grads) = reverse_sweep(circuit, n_params, n_features, &unit)?;
            let mut jac = Jacobian::zeros(n, n_params, n_features);
            jac.expectations = expectations;
            for (j, (gp, gx)) in grads.into_iter().enumerate() {
                for (i, v) in gp.into_iter().enumerate() {
                    jac.params[i * n + j] = v;
                }
                for (k, v) in gx.into_iter().enumerate() {
                    jac.features[k * n + j] = v;
                }
            }
            Ok(jac)
        }
    }
}

/// Gradients on the density engine by literal shifted evaluation.
pub fn param_shift_density(
    circuit: &Circuit,
    n_params: usize,
    n_features: usize,
    noise: Option<&KrausChannel>,
    exec: Exec,
) -> Result<Jacobian> {
    let noise = noise.map_or_else(|| KrausChannel::bit_flip(0.0), |c| Ok(c.clone()))?;
    literal(circuit, n_params, n_features, Some(&noise), exec)
}

/// Noiseless `(expectations, Σ_j g_j ∂⟨Z_j⟩/∂θ, Σ_j g_j ∂⟨Z_j⟩/∂x)` in a
/// single backward sweep.
pub fn vjp(
    circuit: &Circuit,
    n_params: usize,
    n_features: usize,
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if upstream.len() != circuit.n_qubits() {
        return Err(Error::Length {
            expected: circuit.n_qubits(),
            found: upstream.len(),
        });
    }
    let (exp, mut grads) = reverse_sweep(circuit, n_params, n_features, &[upstream.to_vec()])?;
    let (gp, gx) = grads.pop().expect("one observable");
    Ok((exp, gp, gx))
}

fn literal(
    circuit: &Circuit,
    n_params: usize,
    n_features: usize,
    noise: Option<&KrausChannel>,
    exec: Exec,
) -> Result<Jacobian> {
    let slots = differentiable_slots(circuit, n_params, n_features)?;
    let expectations = evolve(circuit, noise)?;
    let shifted = |k: usize, s: usize, delta: f64| {
        let mut c = circuit.clone();
        let op = &mut c.ops_mut()[k];
        op.gate = op.gate.with_slot(s, op.gate.slot(s) + delta);
        evolve(&c, noise)
    };
    let half = std::f64::consts::FRAC_PI_2;
    let diffs = exec.map(&slots, |&(k, s, _)| -> Result<Vec<f64>> {
        let plus = shifted(k, s, half)?;
        let minus = shifted(k, s, -half)?;
        Ok(plus.iter().zip(&minus).map(|(p, m)| 0.5 * (p - m)).collect())
    });
    let mut jac = Jacobian::zeros(circuit.n_qubits(), n_params, n_features);
    jac.expectations = expectations;
    for ((_, _, src), d) in slots.iter().zip(diffs) {
        for (acc, v) in jac.slot_mut(*src).iter_mut().zip(d?) {
            *acc += v;
        }
    }
    Ok(jac)
}

fn apply_adjoint(amps: &mut [C64], n: usize, gate: &Gate) {
    match *gate {
        Gate::Rx(q, t) => apply_gate_to(amps, n, &Gate::Rx(q, -t)),
        Gate::Ry(q, t) => apply_gate_to(amps, n, &Gate::Ry(q, -t)),
        Gate::Rz(q, t) => apply_gate_to(amps, n, &Gate::Rz(q, -t)),
        Gate::Rot { qubit, .. } | Gate::RotQ { qubit, .. } => {
            let m = dagger(&gate.matrix().expect("single-qubit gate"));
            kernel::apply_1q(amps, n, qubit, &m);
        }
        _ => apply_gate_to(amps, n, gate),
    }
}

type Grads = (Vec<f64>, Vec<f64>);

/// Backward sweep for observables `Σ_j w_j Z_j`, one per weight vector.
fn reverse_sweep(
    circuit: &Circuit,
    n_params: usize,
    n_features: usize,
    weights: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<Grads>)> {
    let slots = differentiable_slots(circuit, n_params, n_features)?;
    let n = circuit.n_qubits();
    let state = evolve_statevector(circuit)?;
    let expectations = state.expectations_z();
    let mut phi = state.amplitudes().to_vec();
    let mut lambdas: Vec<Vec<C64>> = weights
        .iter()
        .map(|w| {
            phi.iter()
                .enumerate()
                .map(|(i, a)| {
                    let z: f64 = w
                        .iter()
                        .enumerate()
                        .map(|(j, wj)| if i & (1 << (n - 1 - j)) == 0 { *wj } else { -wj })
                        .sum();
                    a * z
                })
                .collect()
        })
        .collect();
    let mut grads: Vec<Grads> = weights
        .iter()
        .map(|_| (vec![0.0; n_params], vec![0.0; n_features]))
        .collect();
    let mut scratch = vec![C64::new(0.0, 0.0); phi.len()];
    let mut pending = slots.iter().rev().peekable();
    for (k, op) in circuit.ops().iter().enumerate().rev() {
        apply_adjoint(&mut phi, n, &op.gate);
        while let Some(&&(kk, s, src)) = pending.peek() {
            if kk != k {
                break;
            }
            pending.next();
            scratch.copy_from_slice(&phi);
            let (q, _) = op.gate.qubits();
            kernel::apply_1q(&mut scratch, n, q, &op.gate.generator_product(s));
            for (lam, (gp, gx)) in lambdas.iter().zip(grads.iter_mut()) {
                let overlap: C64 = lam.iter().zip(&scratch).map(|(l, v)| l.conj() * v).sum();
                match src {
                    AngleSource::Param(i) => gp[i] += overlap.im,
                    AngleSource::Feature(i) => gx[i] += overlap.im,
                    AngleSource::Fixed => unreachable!(),
                }
            }
        }
        for lam in &mut lambdas {
            apply_adjoint(lam, n, &op.gate);
        }
    }
    Ok((expectations, grads))
}
