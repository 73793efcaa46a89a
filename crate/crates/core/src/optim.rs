//! First-order optimizers over a list of parameter tensors, and the
//! cosine-with-warm-restarts schedule.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    AdamW,
    Sgd,
    Sgdr,
    AdaGrad,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Adam,
        OptimizerKind::AdamW,
        OptimizerKind::Sgd,
        OptimizerKind::Sgdr,
        OptimizerKind::AdaGrad,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdamW => "adamw",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Sgdr => "sgdr",
            OptimizerKind::AdaGrad => "adagrad",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown optimizer `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// SGDR first period, in scheduler steps.
    pub t0: u64,
    pub t_mult: u64,
    pub lr_min: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 1e-3,
            weight_decay: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t0: 10,
            t_mult: 2,
            lr_min: 0.0,
        }
    }
}

/// Learning rate after `t` steps of cosine annealing with warm restarts:
/// periods of `t0, t0·t_mult, …`.
pub fn sgdr_lr(t: u64, lr_max: f64, lr_min: f64, t0: u64, t_mult: u64) -> f64 {
    let (mut t_cur, mut t_i) = (t, t0.max(1));
    while t_cur >= t_i {
        t_cur -= t_i;
        t_i = t_i.saturating_mul(t_mult.max(1));
    }
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (PI * t_cur as f64 / t_i as f64).cos())
}

/// Optimizer state, serializable for checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub config: OptimConfig,
    pub step: u64,
    /// SGDR schedule position (advanced once per epoch).
    pub epoch: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimConfig) -> Self {
        Self {
            config,
            step: 0,
            epoch: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn lr(&self) -> f64 {
        let c = &self.config;
        match c.kind {
            OptimizerKind::Sgdr => sgdr_lr(self.epoch, c.lr, c.lr_min, c.t0, c.t_mult),
            _ => c.lr,
        }
    }

    pub fn end_epoch(&mut self) {
        self.epoch += 1;
    }

    fn ensure_state(&mut self, params: &[&mut [f64]]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || self.m.iter().zip(params).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::shape("optimizer state does not match parameter shapes".to_string()));
        }
        Ok(())
    }

    /// One update of every tensor in `params` by the matching `grads`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::shape("gradients do not match parameter shapes".to_string()));
        }
        self.ensure_state(params)?;
        self.step += 1;
        let c = self.config;
        let lr = self.lr();
        let t = self.step as i32;
        let (bc1, bc2) = (1.0 - c.beta1.powi(t), 1.0 - c.beta2.powi(t));
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                match c.kind {
                    OptimizerKind::Adam | OptimizerKind::AdamW => {
                        let mut gi = g[i];
                        if c.kind == OptimizerKind::Adam {
                            gi += c.weight_decay * p[i];
                        } else {
                            p[i] *= 1.0 - lr * c.weight_decay;
                        }
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                        p[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + c.eps);
                    }
                    OptimizerKind::Sgd | OptimizerKind::Sgdr => {
                        p[i] -= lr * (g[i] + c.weight_decay * p[i]);
                    }
                    OptimizerKind::AdaGrad => {
                        let gi = g[i] + c.weight_decay * p[i];
                        v[i] += gi * gi;
                        p[i] -= lr * gi / (v[i].sqrt() + c.eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: OptimizerKind, wd: f64) -> OptimConfig {
        OptimConfig {
            kind,
            weight_decay: wd,
            ..OptimConfig::default()
        }
    }

    fn one_step(kind: OptimizerKind, wd: f64, lr: f64, p0: f64, g: f64) -> f64 {
        let mut opt = Optimizer::new(OptimConfig { lr, ..cfg(kind, wd) });
        let mut p = [p0];
        opt.step(&mut [&mut p[..]], &[&[g][..]]).unwrap();
        p[0]
    }

    #[test]
    fn adam_first_step() {
        let p = one_step(OptimizerKind::Adam, 0.0, 1e-3, 0.0, 1.0);
        assert!((p + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
        assert!((p + 9.9999e-4).abs() < 1e-8);
        assert_eq!(one_step(OptimizerKind::Adam, 0.0, 1e-3, 0.4, 0.0), 0.4);
    }

    #[test]
    fn adamw_decoupled_decay() {
        assert!((one_step(OptimizerKind::AdamW, 1e-3, 1e-3, 1.0, 0.0) - (1.0 - 1e-6)).abs() < 1e-15);
        let mut opt = Optimizer::new(cfg(OptimizerKind::AdamW, 1e-3));
        let mut p = [2.0];
        for _ in 0..5 {
            opt.step(&mut [&mut p[..]], &[&[0.0][..]]).unwrap();
        }
        assert!((p[0] - 2.0 * (1.0 - 1e-6f64).powi(5)).abs() < 1e-14);
    }

    #[test]
    fn sgd_and_adagrad() {
        assert!((one_step(OptimizerKind::Sgd, 0.0, 1e-3, 1.0, 0.5) - 0.9995).abs() < 1e-15);
        let p = one_step(OptimizerKind::AdaGrad, 0.0, 1e-2, 0.0, -3.0);
        assert!((p - 1e-2 * 3.0 / (3.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(one_step(OptimizerKind::AdaGrad, 0.0, 1e-2, 0.7, 0.0), 0.7);
        assert_eq!(one_step(OptimizerKind::Sgd, 0.0, 1e-2, 0.7, 0.0), 0.7);
    }

    #[test]
    fn sgdr_shape() {
        let (hi, lo) = (0.1, 0.01);
        assert_eq!(sgdr_lr(0, hi, lo, 10, 2), hi);
        assert!((sgdr_lr(5, hi, lo, 10, 2) - (hi + lo) / 2.0).abs() < 1e-15);
        assert_eq!(sgdr_lr(10, hi, lo, 10, 2), hi);
        assert!((sgdr_lr(29, hi, lo, 10, 2) - lo).abs() < 1e-3);
        assert_eq!(sgdr_lr(30, hi, lo, 10, 2), hi);
    }

    #[test]
    fn shape_errors() {
        let mut opt = Optimizer::new(OptimConfig::default());
        let mut p = [0.0, 1.0];
        assert!(opt.step(&mut [&mut p[..]], &[&[0.0][..]]).is_err());
        opt.step(&mut [&mut p[..]], &[&[0.0, 0.0][..]]).unwrap();
        let mut q = [0.0];
        assert!(opt.step(&mut [&mut q[..]], &[&[0.0][..]]).is_err());
    }
}
