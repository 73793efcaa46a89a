use num_complex::Complex64 as C64;

use super::Mat2;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub(crate) const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub(crate) const PAULI_Y: Mat2 = [[ZERO, C64::new(0.0, -1.0)], [I, ZERO]];
pub(crate) const PAULI_Z: Mat2 = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];
pub(crate) const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];

/// A gate from the circuit families used here. Qubit indices are wire
/// numbers; wire 0 is the most significant bit of a basis-state index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    /// `e^{iα} RZ(β) RY(γ) RZ(σ)`.
    Rot {
        qubit: usize,
        alpha: f64,
        beta: f64,
        gamma: f64,
        sigma: f64,
    },
    /// `RZ(ω) RY(θ) RZ(φ)`; RZ(φ) acts first.
    RotQ {
        qubit: usize,
        omega: f64,
        theta: f64,
        phi: f64,
    },
    Cz(usize, usize),
    Cnot { control: usize, target: usize },
}

pub fn rx(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

pub fn ry(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
}

pub fn rz(theta: f64) -> Mat2 {
    [
        [C64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, C64::from_polar(1.0, theta / 2.0)],
    ]
}

pub fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn scale(m: &Mat2, s: C64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

fn hadamard() -> Mat2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]]
}

impl Gate {
    /// Wires the gate acts on, first target first.
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q)
            | Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::Rx(q, _)
            | Gate::Ry(q, _)
            | Gate::Rz(q, _)
            | Gate::Rot { qubit: q, .. }
            | Gate::RotQ { qubit: q, .. } => (q, None),
            Gate::Cz(a, b) => (a, Some(b)),
            Gate::Cnot { control, target } => (control, Some(target)),
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.qubits().1.is_some()
    }

    /// 2x2 matrix of a single-qubit gate.
    pub fn matrix(&self) -> Option<Mat2> {
        Some(match *self {
            Gate::H(_) => hadamard(),
            Gate::X(_) => PAULI_X,
            Gate::Y(_) => PAULI_Y,
            Gate::Z(_) => PAULI_Z,
            Gate::Rx(_, t) => rx(t),
            Gate::Ry(_, t) => ry(t),
            Gate::Rz(_, t) => rz(t),
            Gate::Rot {
                alpha,
                beta,
                gamma,
                sigma,
                ..
            } => scale(
                &matmul(&rz(beta), &matmul(&ry(gamma), &rz(sigma))),
                C64::from_polar(1.0, alpha),
            ),
            Gate::RotQ {
                omega, theta, phi, ..
            } => matmul(&rz(omega), &matmul(&ry(theta), &rz(phi))),
            Gate::Cz(..) | Gate::Cnot { .. } => return None,
        })
    }

    /// Dense unitary: 2x2 for one wire, 4x4 for two (first wire = high bit).
    pub fn unitary(&self) -> Vec<Vec<C64>> {
        if let Some(m) = self.matrix() {
            return m.iter().map(|r| r.to_vec()).collect();
        }
        let mut u = vec![vec![ZERO; 4]; 4];
        match self {
            Gate::Cz(..) => {
                for (k, row) in u.iter_mut().enumerate() {
                    row[k] = if k == 3 { -ONE } else { ONE };
                }
            }
            Gate::Cnot { .. } => {
                u[0][0] = ONE;
                u[1][1] = ONE;
                u[2][3] = ONE;
                u[3][2] = ONE;
            }
            _ => unreachable!(),
        }
        u
    }

    /// Number of Pauli-rotation angles the gate carries.
    pub fn n_slots(&self) -> usize {
        match self {
            Gate::Rx(..) | Gate::Ry(..) | Gate::Rz(..) => 1,
            Gate::Rot { .. } | Gate::RotQ { .. } => 3,
            _ => 0,
        }
    }

    /// Angle in rotation slot `slot`. For `Rot` the slots are (β, γ, σ);
    /// the global phase α is not a rotation angle.
    pub fn slot(&self, slot: usize) -> f64 {
        match (*self, slot) {
            (Gate::Rx(_, t) | Gate::Ry(_, t) | Gate::Rz(_, t), 0) => t,
            (Gate::Rot { beta, .. }, 0) => beta,
            (Gate::Rot { gamma, .. }, 1) => gamma,
            (Gate::Rot { sigma, .. }, 2) => sigma,
            (Gate::RotQ { omega, .. }, 0) => omega,
            (Gate::RotQ { theta, .. }, 1) => theta,
            (Gate::RotQ { phi, .. }, 2) => phi,
            _ => panic!("gate {self:?} has no rotation slot {slot}"),
        }
    }

    pub fn with_slot(mut self, slot: usize, value: f64) -> Self {
        match (&mut self, slot) {
            (Gate::Rx(_, t) | Gate::Ry(_, t) | Gate::Rz(_, t), 0) => *t = value,
            (Gate::Rot { beta, .. }, 0) => *beta = value,
            (Gate::Rot { gamma, .. }, 1) => *gamma = value,
            (Gate::Rot { sigma, .. }, 2) => *sigma = value,
            (Gate::RotQ { omega, .. }, 0) => *omega = value,
            (Gate::RotQ { theta, .. }, 1) => *theta = value,
            (Gate::RotQ { phi, .. }, 2) => *phi = value,
            _ => panic!("gate {self:?} has no rotation slot {slot}"),
        }
        self
    }

    /// The gate matrix with the rotation generator of `slot` spliced in right
    /// after that rotation factor, e.g. `RZ(ω)·Z·RY(θ)·RZ(φ)` for slot 0 of
    /// `RotQ`. Since `R(θ ± π/2) = R(θ)(I ∓ iP)/√2`, the two shifted gates are
    /// `(U ∓ i·this)/√2`.
    pub fn generator_product(&self, slot: usize) -> Mat2 {
        match (*self, slot) {
            (Gate::Rx(_, t), 0) => matmul(&rx(t), &PAULI_X),
            (Gate::Ry(_, t), 0) => matmul(&ry(t), &PAULI_Y),
            (Gate::Rz(_, t), 0) => matmul(&rz(t), &PAULI_Z),
            (Gate::RotQ { omega, theta, phi, .. }, s) => {
                euler_with_generator(C64::new(1.0, 0.0), omega, theta, phi, s)
            }
            (
                Gate::Rot {
                    alpha,
                    beta,
                    gamma,
                    sigma,
                    ..
                },
                s,
            ) => euler_with_generator(C64::from_polar(1.0, alpha), beta, gamma, sigma, s),
            _ => panic!("gate {self:?} has no rotation slot {slot}"),
        }
    }
}

fn euler_with_generator(phase: C64, a: f64, b: f64, c: f64, slot: usize) -> Mat2 {
    let (za, yb, zc) = (rz(a), ry(b), rz(c));
    let m = match slot {
        0 => matmul(&matmul(&za, &PAULI_Z), &matmul(&yb, &zc)),
        1 => matmul(&za, &matmul(&matmul(&yb, &PAULI_Y), &zc)),
        2 => matmul(&za, &matmul(&yb, &matmul(&zc, &PAULI_Z))),
        _ => panic!("Euler rotation has no slot {slot}"),
    };
    scale(&m, phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (0..2).all(|r| (0..2).all(|c| (a[r][c] - b[r][c]).norm() < tol))
    }

    #[test]
    fn rotq_matches_closed_form() {
        let (w, t, p) = (0.3, 1.1, -0.7);
        let m = Gate::RotQ {
            qubit: 0,
            omega: w,
            theta: t,
            phi: p,
        }
        .matrix()
        .unwrap();
        let (s, c) = (t / 2.0).sin_cos();
        let expected = [
            [
                C64::from_polar(c, -(p + w) / 2.0),
                -C64::from_polar(s, (p - w) / 2.0),
            ],
            [
                C64::from_polar(s, -(p - w) / 2.0),
                C64::from_polar(c, (p + w) / 2.0),
            ],
        ];
        assert!(close(&m, &expected, 1e-14));
    }

    #[test]
    fn rot_full_matches_closed_form() {
        let (a, b, g, s) = (0.4, -1.3, 0.9, 2.2);
        let m = Gate::Rot {
            qubit: 0,
            alpha: a,
            beta: b,
            gamma: g,
            sigma: s,
        }
        .matrix()
        .unwrap();
        let (sn, cs) = (g / 2.0).sin_cos();
        let expected = [
            [
                C64::from_polar(cs, a - b / 2.0 - s / 2.0),
                -C64::from_polar(sn, a - b / 2.0 + s / 2.0),
            ],
            [
                C64::from_polar(sn, a + b / 2.0 - s / 2.0),
                C64::from_polar(cs, a + b / 2.0 + s / 2.0),
            ],
        ];
        assert!(close(&m, &expected, 1e-14));
    }

    #[test]
    fn shifted_gate_is_combination_with_generator() {
        let g = Gate::RotQ {
            qubit: 0,
            omega: 0.2,
            theta: 1.4,
            phi: -0.5,
        };
        let u = g.matrix().unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for slot in 0..3 {
            let gp = g.generator_product(slot);
            for sign in [1.0, -1.0] {
                let shifted = g.with_slot(slot, g.slot(slot) + sign * PI / 2.0);
                let m = shifted.matrix().unwrap();
                let mut expected = [[C64::new(0.0, 0.0); 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        expected[i][j] = (u[i][j] - C64::new(0.0, sign) * gp[i][j]) * r;
                    }
                }
                assert!(close(&m, &expected, 1e-14), "slot {slot} sign {sign}");
            }
        }
    }
}
