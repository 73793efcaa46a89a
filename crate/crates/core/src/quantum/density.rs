use num_complex::Complex64 as C64;

use super::channel::KrausChannel;
use super::circuit::check_targets;
use super::gate::Gate;
use super::statevector::{apply_gate_to, StateVector};
use super::{conj, kernel, DENSITY_CAP};
use crate::error::{Error, Result};

/// Mixed state stored as a vectorized `2^n × 2^n` matrix: entry `(r, c)` sits
/// at `r · 2^n + c`, so row wire `q` is register wire `q` and column wire `q`
/// is register wire `n + q` of a `2n`-wire vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    /// `|0...0⟩⟨0...0|`.
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits)?;
        let mut data = vec![C64::new(0.0, 0.0); 1 << (2 * n_qubits)];
        data[0] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, data })
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let n = state.n_qubits();
        check_capacity(n)?;
        let a = state.amplitudes();
        let data = a
            .iter()
            .flat_map(|r| a.iter().map(move |c| r * c.conj()))
            .collect();
        Ok(Self { n_qubits: n, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.dim()).map(<[C64]>::to_vec).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    /// `max |ρ - ρ†|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut dev: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                dev = dev.max((self.entry(r, c) - self.entry(c, r).conj()).norm());
            }
        }
        dev
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        check_targets(gate, self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        let n = self.n_qubits;
        let wide = 2 * n;
        match *gate {
            Gate::Cz(a, b) => {
                kernel::apply_cz(&mut self.data, wide, a, b);
                kernel::apply_cz(&mut self.data, wide, n + a, n + b);
            }
            Gate::Cnot { control, target } => {
                kernel::apply_cnot(&mut self.data, wide, control, target);
                kernel::apply_cnot(&mut self.data, wide, n + control, n + target);
            }
            Gate::Rz(q, t) => {
                apply_gate_to(&mut self.data, wide, &Gate::Rz(q, t));
                apply_gate_to(&mut self.data, wide, &Gate::Rz(n + q, -t));
            }
            _ => {
                let (q, _) = gate.qubits();
                let m = gate.matrix().expect("single-qubit gate");
                kernel::apply_1q(&mut self.data, wide, q, &m);
                kernel::apply_1q(&mut self.data, wide, n + q, &conj(&m));
            }
        }
    }

    pub fn apply_channel(&mut self, channel: &KrausChannel, target: usize) -> Result<()> {
        if target >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: target,
                n_qubits: self.n_qubits,
            });
        }
        let dev = channel.completeness_deviation();
        if dev > 1e-12 {
            return Err(Error::ChannelValidation { deviation: dev });
        }
        self.apply_superop_unchecked(&channel.superoperator(), target);
        Ok(())
    }

    pub(crate) fn apply_superop_unchecked(&mut self, s: &super::Mat4, target: usize) {
        let n = self.n_qubits;
        kernel::apply_2q(&mut self.data, 2 * n, target, n + target, s);
    }

    /// `Tr(Z_j ρ)`.
    pub fn expectation_z(&self, j: usize) -> Result<f64> {
        if j >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: j,
                n_qubits: self.n_qubits,
            });
        }
        Ok(self.expectations_z()[j])
    }

    pub fn expectations_z(&self) -> Vec<f64> {
        let n = self.n_qubits;
        let mut acc = vec![0.0; n];
        for i in 0..self.dim() {
            let p = self.entry(i, i).re;
            for (j, e) in acc.iter_mut().enumerate() {
                if i & (1 << (n - 1 - j)) == 0 {
                    *e += p;
                } else {
                    *e -= p;
                }
            }
        }
        acc
    }
}

fn check_capacity(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > DENSITY_CAP {
        return Err(Error::Capacity {
            n_qubits,
            cap: DENSITY_CAP,
        });
    }
    Ok(())
}
