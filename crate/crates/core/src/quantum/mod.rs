//! Exact statevector and density-matrix simulation, Kraus noise and
//! parameter-shift differentiation.

use num_complex::Complex64 as C64;

mod channel;
mod circuit;
mod density;
mod evolve;
mod gate;
pub mod kernel;
mod shift;
mod statevector;

pub use channel::{ChannelKind, KrausChannel};
pub use circuit::{AngleSource, Circuit, Op};
pub use density::DensityMatrix;
pub use evolve::{evolve, evolve_density, evolve_statevector, sample_trajectory};
pub use gate::{matmul, rx, ry, rz, Gate};
pub use shift::{param_shift, param_shift_density, vjp, Jacobian, ShiftEngine};
pub use statevector::{StateVector, STATEVECTOR_CAP};

pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];

/// Largest register the density-matrix engine accepts (2^24 entries).
pub const DENSITY_CAP: usize = 12;

pub(crate) fn dagger(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

pub(crate) fn conj(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[0][1].conj()],
        [m[1][0].conj(), m[1][1].conj()],
    ]
}
