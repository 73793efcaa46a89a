//! Linear read-out after the circuit and the softmax cross-entropy loss.

use crate::error::{Error, Result};
use crate::numerics::{sample_uniform, Rng};

pub const N_CLASSES: usize = 10;

/// `logits = W z + b`, `W` stored row-major `n_classes × n_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpWeights {
    pub n_in: usize,
    pub n_classes: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl MlpWeights {
    pub fn zeros(n_in: usize, n_classes: usize) -> Self {
        Self {
            n_in,
            n_classes,
            w: vec![0.0; n_in * n_classes],
            b: vec![0.0; n_classes],
        }
    }

    /// Fan-in scaled uniform initialization.
    pub fn init(n_in: usize, n_classes: usize, rng: &mut Rng) -> Result<Self> {
        let bound = 1.0 / (n_in as f64).sqrt();
        Ok(Self {
            n_in,
            n_classes,
            w: sample_uniform(rng, -bound, bound, n_in * n_classes)?,
            b: sample_uniform(rng, -bound, bound, n_classes)?,
        })
    }
}

pub fn mlp_forward(z: &[f64], weights: &MlpWeights) -> Result<Vec<f64>> {
    if z.len() != weights.n_in {
        return Err(Error::Length {
            expected: weights.n_in,
            found: z.len(),
        });
    }
    Ok(weights
        .w
        .chunks(weights.n_in)
        .zip(&weights.b)
        .map(|(row, b)| b + row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>())
        .collect())
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

fn check_label(label: usize, n_classes: usize) -> Result<()> {
    if label < n_classes {
        Ok(())
    } else {
        Err(Error::Label { label, n_classes })
    }
}

/// Per-sample cross-entropy losses and their mean, for `logits` laid out
/// `batch × n_classes`.
pub fn softmax_ce(logits: &[f64], labels: &[usize], n_classes: usize) -> Result<(f64, Vec<f64>)> {
    if labels.is_empty() || logits.len() != labels.len() * n_classes {
        return Err(Error::shape(format!(
            "{} logits for {} labels of {n_classes} classes",
            logits.len(),
            labels.len()
        )));
    }
    let per_sample = logits
        .chunks(n_classes)
        .zip(labels)
        .map(|(l, &y)| {
            check_label(y, n_classes)?;
            Ok(-log_softmax(l)[y])
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok((mean, per_sample))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadGrads {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    /// `∂L/∂z` per sample, `batch × n_in`.
    pub z: Vec<f64>,
}

/// Gradients of the mean cross-entropy over the batch.
pub fn head_backward(logits: &[f64], labels: &[usize], z: &[f64], weights: &MlpWeights) -> Result<HeadGrads> {
    let (c, n_in) = (weights.n_classes, weights.n_in);
    let batch = labels.len();
    if batch == 0 || logits.len() != batch * c || z.len() != batch * n_in {
        return Err(Error::shape("head backward shapes disagree".to_string()));
    }
    let mut g = HeadGrads {
        w: vec![0.0; c * n_in],
        b: vec![0.0; c],
        z: vec![0.0; batch * n_in],
    };
    let scale = 1.0 / batch as f64;
    for (s, (l, &y)) in logits.chunks(c).zip(labels).enumerate() {
        check_label(y, c)?;
        let zs = &z[s * n_in..(s + 1) * n_in];
        let gz = &mut g.z[s * n_in..(s + 1) * n_in];
        for (k, lp) in log_softmax(l).into_iter().enumerate() {
            let r = (lp.exp() - if k == y { 1.0 } else { 0.0 }) * scale;
            g.b[k] += r;
            let row = &weights.w[k * n_in..(k + 1) * n_in];
            for ((gw, gzv), (&zv, &wv)) in g.w[k * n_in..(k + 1) * n_in].iter_mut().zip(gz.iter_mut()).zip(zs.iter().zip(row)) {
                *gw += r * zv;
                *gzv += r * wv;
            }
        }
    }
    Ok(g)
}

/// Index of the largest logit, first on ties.
pub fn argmax(logits: &[f64]) -> usize {
    logits
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_identity_weights() {
        let w = MlpWeights::zeros(4, 10);
        assert_eq!(mlp_forward(&[1.0, 2.0, 3.0, 4.0], &w).unwrap(), vec![0.0; 10]);
        let mut id = MlpWeights::zeros(10, 10);
        for k in 0..10 {
            id.w[k * 10 + k] = 1.0;
        }
        let mut e3 = vec![0.0; 10];
        e3[3] = 1.0;
        assert_eq!(mlp_forward(&e3, &id).unwrap(), e3);
        assert!(mlp_forward(&e3[..4], &id).is_err());
    }

    #[test]
    fn loss_values() {
        let (l, _) = softmax_ce(&[0.0; 10], &[4], 10).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-12);
        let mut big = vec![0.0; 10];
        big[0] = 20.0;
        assert!(softmax_ce(&big, &[0], 10).unwrap().0 < 1e-4);
        let shifted: Vec<f64> = big.iter().map(|v| v + 123.4).collect();
        let a = softmax_ce(&big, &[3], 10).unwrap().0;
        let b = softmax_ce(&shifted, &[3], 10).unwrap().0;
        assert!((a - b).abs() < 1e-12);
        assert!(matches!(softmax_ce(&[0.0; 10], &[10], 10), Err(Error::Label { .. })));
    }

    #[test]
    fn residuals_sum_to_zero_and_saturate() {
        let w = MlpWeights::init(3, 10, &mut Rng::new(2)).unwrap();
        let z = [0.3, -0.2, 0.9, 0.1, 0.5, -0.7];
        let logits: Vec<f64> = z.chunks(3).flat_map(|zs| mlp_forward(zs, &w).unwrap()).collect();
        let g = head_backward(&logits, &[1, 7], &z, &w).unwrap();
        assert!(g.b.iter().sum::<f64>().abs() < 1e-12);
        let mut sat = vec![0.0; 10];
        sat[2] = 60.0;
        let g = head_backward(&sat, &[2], &[0.0, 0.0, 0.0], &w).unwrap();
        assert!(g.b.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut w = MlpWeights::init(3, 10, &mut Rng::new(4)).unwrap();
        let z = vec![0.3, -0.2, 0.9, 0.1, 0.5, -0.7];
        let labels = [1, 7];
        let loss = |w: &MlpWeights, z: &[f64]| {
            let logits: Vec<f64> = z.chunks(3).flat_map(|zs| mlp_forward(zs, w).unwrap()).collect();
            softmax_ce(&logits, &labels, 10).unwrap().0
        };
        let logits: Vec<f64> = z.chunks(3).flat_map(|zs| mlp_forward(zs, &w).unwrap()).collect();
        let g = head_backward(&logits, &labels, &z, &w).unwrap();
        let h = 1e-6;
        for k in 0..w.w.len() {
            let o = w.w[k];
            w.w[k] = o + h;
            let up = loss(&w, &z);
            w.w[k] = o - h;
            let down = loss(&w, &z);
            w.w[k] = o;
            assert!(((up - down) / (2.0 * h) - g.w[k]).abs() < 1e-8);
        }
        for k in 0..z.len() {
            let mut zp = z.clone();
            zp[k] += h;
            let up = loss(&w, &zp);
            zp[k] -= 2.0 * h;
            let down = loss(&w, &zp);
            assert!(((up - down) / (2.0 * h) - g.z[k]).abs() < 1e-8);
        }
    }
}
