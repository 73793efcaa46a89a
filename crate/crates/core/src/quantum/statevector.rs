use num_complex::Complex64 as C64;

use super::circuit::check_targets;
use super::gate::Gate;
use super::kernel;
use crate::error::{Error, Result};

/// Largest register the statevector engine accepts.
pub const STATEVECTOR_CAP: usize = 26;

/// Pure state of an n-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > STATEVECTOR_CAP {
            return Err(Error::Capacity {
                n_qubits,
                cap: STATEVECTOR_CAP,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(Error::shape(format!(
                "{} amplitudes for {n_qubits} qubits",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InputRange(format!("state norm {norm} is not 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }


    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        check_targets(gate, self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        apply_gate_to(&mut self.amps, self.n_qubits, gate);
    }


    pub fn expectation_z(&self, j: usize) -> Result<f64> {
        if j >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: j,
                n_qubits: self.n_qubits,
            });
        }
        Ok(kernel::expectations_z(&self.amps, self.n_qubits)[j])
    }

    /// `(<Z_0>, ..., <Z_{n-1}>)`.
    pub fn expectations_z(&self) -> Vec<f64> {
        kernel::expectations_z(&self.amps, self.n_qubits)
    }
}

pub(crate) fn apply_gate_to(amps: &mut [C64], n: usize, gate: &Gate) {
    match *gate {
        Gate::Rz(q, t) => kernel::apply_diag_1q(
            amps,
            n,
            q,
            C64::from_polar(1.0, -t / 2.0),
            C64::from_polar(1.0, t / 2.0),
        ),
        Gate::Z(q) => kernel::apply_diag_1q(amps, n, q, C64::new(1.0, 0.0), C64::new(-1.0, 0.0)),
        Gate::Cz(a, b) => kernel::apply_cz(amps, n, a, b),
        Gate::Cnot { control, target } => kernel::apply_cnot(amps, n, control, target),
        _ => {
            let (q, _) = gate.qubits();
            let m = gate.matrix().expect("single-qubit gate");
            kernel::apply_1q(amps, n, q, &m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_rotq_leaves_state() {
        let mut s = StateVector::new(2).unwrap();
        s.apply_gate(&Gate::H(0)).unwrap();
        let before = s.clone();
        s.apply_gate(&Gate::RotQ {
            qubit: 1,
            omega: 0.0,
            theta: 0.0,
            phi: 0.0,
        })
        .unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn ry_pi_flips_to_one() {
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(&Gate::Ry(0, PI)).unwrap();
        assert!((s.expectation_z(0).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cz_phases_only_11() {
        let mut s = StateVector::new(2).unwrap();
        s.apply_gate(&Gate::H(0)).unwrap();
        s.apply_gate(&Gate::H(1)).unwrap();
        s.apply_gate(&Gate::Cz(0, 1)).unwrap();
        let a = s.amplitudes();
        assert!((a[0].re - 0.5).abs() < 1e-12);
        assert!((a[1].re - 0.5).abs() < 1e-12);
        assert!((a[2].re - 0.5).abs() < 1e-12);
        assert!((a[3].re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn superposition_has_zero_z() {
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(&Gate::H(0)).unwrap();
        assert!(s.expectation_z(0).unwrap().abs() < 1e-12);
        assert!((StateVector::new(1).unwrap().expectation_z(0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn index_and_target_errors() {
        let mut s = StateVector::new(2).unwrap();
        assert!(matches!(
            s.apply_gate(&Gate::H(2)),
            Err(Error::QubitIndex { index: 2, .. })
        ));
        assert!(matches!(
            s.apply_gate(&Gate::Cz(1, 1)),
            Err(Error::InvalidTargets(_))
        ));
        assert!(s.expectation_z(5).is_err());
    }

    #[test]
    fn cnot_maps_10_to_11() {
        let mut s = StateVector::new(2).unwrap();
        s.apply_gate(&Gate::X(0)).unwrap();
        s.apply_gate(&Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        assert!((s.amplitudes()[3].re - 1.0).abs() < 1e-15);
    }
}
