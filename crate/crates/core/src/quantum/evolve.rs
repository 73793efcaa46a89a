use super::channel::KrausChannel;
use super::circuit::{Circuit, Op};
use super::density::DensityMatrix;
use super::gate::Gate;
use super::statevector::StateVector;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// `(⟨Z_0⟩, …, ⟨Z_{n-1}⟩)` after running `circuit` from `|0…0⟩`. With a
/// channel, the density engine applies it after every gate on each wire the
/// gate touches.
pub fn evolve(circuit: &Circuit, noise: Option<&KrausChannel>) -> Result<Vec<f64>> {
    match noise {
        None => Ok(evolve_statevector(circuit)?.expectations_z()),
        Some(ch) => Ok(evolve_density(circuit, Some(ch))?.expectations_z()),
    }
}

pub fn evolve_statevector(circuit: &Circuit) -> Result<StateVector> {
    circuit.validate()?;
    let mut state = StateVector::new(circuit.n_qubits())?;
    for gate in circuit.gates() {
        state.apply_unchecked(gate);
    }
    Ok(state)
}

pub fn evolve_density(circuit: &Circuit, noise: Option<&KrausChannel>) -> Result<DensityMatrix> {
    circuit.validate()?;
    let mut rho = DensityMatrix::new(circuit.n_qubits())?;
    let superop = match noise {
        Some(ch) => {
            let dev = ch.completeness_deviation();
            if dev > 1e-12 {
                return Err(Error::ChannelValidation { deviation: dev });
            }
            Some(ch.superoperator())
        }
        None => None,
    };
    for gate in circuit.gates() {
        rho.apply_unchecked(gate);
        if let Some(s) = &superop {
            let (a, b) = gate.qubits();
            for q in std::iter::once(a).chain(b) {
                rho.apply_superop_unchecked(s, q);
            }
        }
    }
    Ok(rho)
}

/// One Pauli-error trajectory of a noisy circuit: after each gate and on each
/// wire it touches, an X, Y or Z is inserted with the channel's mixture
/// probabilities. Averaging [`evolve`] over trajectories converges to the
/// density-engine result. Only Pauli-mixture channels can be unravelled this
/// way.
pub fn sample_trajectory(
    circuit: &Circuit,
    channel: &KrausChannel,
    rng: &mut Rng,
) -> Result<Circuit> {
    let probs = channel.pauli_mixture().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "trajectory sampling needs a Pauli-mixture channel, got {:?}",
            channel.kind()
        ))
    })?;
    circuit.validate()?;
    let mut out = Circuit::new(circuit.n_qubits());
    for op in circuit.ops() {
        out.push_op(*op);
        let (a, b) = op.gate.qubits();
        for q in std::iter::once(a).chain(b) {
            let u = rng.uniform();
            let pauli = if u < probs[0] {
                None
            } else if u < probs[0] + probs[1] {
                Some(Gate::X(q))
            } else if u < probs[0] + probs[1] + probs[2] {
                Some(Gate::Y(q))
            } else {
                Some(Gate::Z(q))
            };
            if let Some(g) = pauli {
                out.push_op(Op::fixed(g));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_circuit_is_all_up() {
        assert_eq!(evolve(&Circuit::new(3), None).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn ry_third_pi() {
        let mut c = Circuit::new(1);
        c.push(Gate::Ry(0, PI / 3.0));
        let e = evolve(&c, None).unwrap()[0];
        assert!((e - 0.5).abs() < 1e-12);
        let ch = KrausChannel::depolarizing(0.02).unwrap();
        let e = evolve(&c, Some(&ch)).unwrap()[0];
        assert!((e - (1.0 - 4.0 * 0.02 / 3.0) * 0.5).abs() < 1e-12);
        assert!((e - 0.48667).abs() < 1e-5);
    }

    #[test]
    fn noisy_capacity_error() {
        let c = Circuit::new(13);
        let ch = KrausChannel::bit_flip(0.1).unwrap();
        assert!(matches!(evolve(&c, Some(&ch)), Err(Error::Capacity { .. })));
        assert!(evolve(&c, None).is_ok());
    }

    #[test]
    fn trajectory_rejects_damping() {
        let mut c = Circuit::new(1);
        c.push(Gate::H(0));
        let ch = KrausChannel::amplitude_damping(0.1).unwrap();
        assert!(sample_trajectory(&c, &ch, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn trajectories_average_to_density() {
        let mut c = Circuit::new(2);
        c.push(Gate::Ry(0, 0.7));
        c.push(Gate::Cnot {
            control: 0,
            target: 1,
        });
        c.push(Gate::Rx(1, 0.4));
        let ch = KrausChannel::depolarizing(0.2).unwrap();
        let exact = evolve(&c, Some(&ch)).unwrap();
        let mut rng = Rng::new(3);
        let draws = 20_000;
        let mut mean = vec![0.0; 2];
        for _ in 0..draws {
            let t = sample_trajectory(&c, &ch, &mut rng).unwrap();
            for (m, e) in mean.iter_mut().zip(evolve(&t, None).unwrap()) {
                *m += e / draws as f64;
            }
        }
        for (m, e) in mean.iter().zip(&exact) {
            assert!((m - e).abs() < 0.02, "{m} vs {e}");
        }
    }
}
