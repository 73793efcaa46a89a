use num_complex::Complex64 as C64;

use super::gate::{IDENTITY, PAULI_X, PAULI_Y, PAULI_Z};
use super::{dagger, matmul, Mat2, Mat4};
use crate::error::{Error, Result};

const COMPLETENESS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelKind {
    BitFlip(f64),
    Depolarizing(f64),
    AmplitudeDamping(f64),
    Custom,
}

/// A single-qubit CPTP map `ρ ↦ Σ K ρ K†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    kind: ChannelKind,
    ops: Vec<Mat2>,
}

fn scaled(m: &Mat2, s: f64) -> Mat2 {
    m.map(|row| row.map(|v| v * s))
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InputRange(format!("probability {p} outside [0, 1]")))
    }
}

impl KrausChannel {
    /// `K0 = √(1-p) I`, `K1 = √p X`.
    pub fn bit_flip(p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(Self {
            kind: ChannelKind::BitFlip(p),
            ops: vec![scaled(&IDENTITY, (1.0 - p).sqrt()), scaled(&PAULI_X, p.sqrt())],
        })
    }

    /// `K0 = √(1-p) I`, `K1..3 = √(p/3) {X, Y, Z}`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        check_probability(p)?;
        let s = (p / 3.0).sqrt();
        Ok(Self {
            kind: ChannelKind::Depolarizing(p),
            ops: vec![
                scaled(&IDENTITY, (1.0 - p).sqrt()),
                scaled(&PAULI_X, s),
                scaled(&PAULI_Y, s),
                scaled(&PAULI_Z, s),
            ],
        })
    }

    /// `K0 = diag(1, √(1-γ))`, `K1 = √γ |0⟩⟨1|`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_probability(gamma)?;
        let zero = C64::new(0.0, 0.0);
        let k0 = [
            [C64::new(1.0, 0.0), zero],
            [zero, C64::new((1.0 - gamma).sqrt(), 0.0)],
        ];
        let k1 = [[zero, C64::new(gamma.sqrt(), 0.0)], [zero, zero]];
        Ok(Self {
            kind: ChannelKind::AmplitudeDamping(gamma),
            ops: vec![k0, k1],
        })
    }

    pub fn from_kraus(ops: Vec<Mat2>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::ChannelValidation { deviation: 1.0 });
        }
        let ch = Self {
            kind: ChannelKind::Custom,
            ops,
        };
        let deviation = ch.completeness_deviation();
        if !(deviation <= COMPLETENESS_TOL) {
            return Err(Error::ChannelValidation { deviation });
        }
        Ok(ch)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn kraus_ops(&self) -> &[Mat2] {
        &self.ops
    }

    /// `max |Σ K†K - I|`.
    pub fn completeness_deviation(&self) -> f64 {
        let mut sum = [[C64::new(0.0, 0.0); 2]; 2];
        for k in &self.ops {
            let kk = matmul(&dagger(k), k);
            for r in 0..2 {
                for c in 0..2 {
                    sum[r][c] += kk[r][c];
                }
            }
        }
        let mut dev: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let target = if r == c { 1.0 } else { 0.0 };
                dev = dev.max((sum[r][c] - target).norm());
            }
        }
        dev
    }

    /// `Σ K ⊗ K*`, acting on (row bit, column bit) of a vectorized density
    /// matrix with the row bit as the high index.
    pub fn superoperator(&self) -> Mat4 {
        let mut s = [[C64::new(0.0, 0.0); 4]; 4];
        for k in &self.ops {
            for (r, row) in s.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v += k[r >> 1][c >> 1] * k[r & 1][c & 1].conj();
                }
            }
        }
        s
    }

    /// Probabilities of (I, X, Y, Z) when the channel is a Pauli mixture.
    pub fn pauli_mixture(&self) -> Option<[f64; 4]> {
        match self.kind {
            ChannelKind::BitFlip(p) => Some([1.0 - p, p, 0.0, 0.0]),
            ChannelKind::Depolarizing(p) => Some([1.0 - p, p / 3.0, p / 3.0, p / 3.0]),
            _ => None,
        }
    }
}
