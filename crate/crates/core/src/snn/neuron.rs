use std::f64::consts::{FRAC_PI_2, PI};

/// Arctan surrogate slope.
pub const ALPHA: f64 = 2.0;

/// `α / (2(1 + (π/2·α·x)²))`, the derivative used in place of the Heaviside
/// step during backpropagation.
pub fn surrogate_grad(x: f64, alpha: f64) -> f64 {
    let u = FRAC_PI_2 * alpha * x;
    alpha / (2.0 * (1.0 + u * u))
}

/// `arctan(π/2·α·x)/π + ½`, whose derivative is [`surrogate_grad`].
pub fn smooth_spike(x: f64, alpha: f64) -> f64 {
    (FRAC_PI_2 * alpha * x).atan() / PI + 0.5
}

pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Membrane potentials of a layer of integrate-and-fire neurons.
#[derive(Clone, Debug, PartialEq)]
pub struct IfState {
    pub v: Vec<f64>,
    pub threshold: f64,
}

impl IfState {
    pub fn new(len: usize, threshold: f64) -> Self {
        Self {
            v: vec![0.0; len],
            threshold,
        }
    }
}

/// Integrates `input`, fires where the potential reaches threshold and resets
/// fired neurons to zero.
pub fn if_step(input: &[f64], state: &mut IfState) -> Vec<f64> {
    input
        .iter()
        .zip(state.v.iter_mut())
        .map(|(i, v)| {
            *v += i;
            let s = heaviside(*v - state.threshold);
            if s == 1.0 {
                *v = 0.0;
            }
            s
        })
        .collect()
}
