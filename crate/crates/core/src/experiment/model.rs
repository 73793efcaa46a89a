use crate::circuits::{init_params, PqcSpec};
use crate::data::{hflip, Dataset};
use crate::error::{Error, Result};
use crate::head::{argmax, head_backward, mlp_forward, softmax_ce, MlpWeights, N_CLASSES};
use crate::numerics::{sample_variance, Rng};
use crate::par::Exec;
use crate::quantum::{evolve, param_shift, param_shift_density, sample_trajectory, vjp, Circuit, KrausChannel, ShiftEngine};
use crate::snn::{phase_encode, Encoder};

use super::config::{HeadKind, NoiseEngine, TrainConfig};

const ENCODER_STREAM: u64 = 1;
const THETA_STREAM: u64 = 2;
const HEAD_STREAM: u64 = 3;

/// How circuit expectations are computed.
#[derive(Clone, Copy, Debug)]
pub enum QuantumMode<'a> {
    Pure,
    Density(&'a KrausChannel),
    /// `count` Pauli trajectories per sample, seeded from `seed` and the
    /// sample index.
    Trajectory {
        channel: &'a KrausChannel,
        seed: u64,
        count: usize,
    },
}

/// Spiking encoder, circuit angles and head.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub encoder: Encoder,
    pub pqc: PqcSpec,
    pub theta: Vec<f64>,
    pub head: MlpWeights,
    pub head_kind: HeadKind,
    pub gradient: ShiftEngine,
}

/// Identity map from `n` expectations onto the first classes.
fn identity_head(n: usize) -> MlpWeights {
    let mut w = MlpWeights::zeros(n, N_CLASSES);
    for k in 0..n.min(N_CLASSES) {
        w.w[k * n + k] = 1.0;
    }
    w
}

pub struct BatchGrads {
    pub loss: Vec<f64>,
    pub encoder: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

impl BatchGrads {
    pub fn pqc_variance(&self) -> f64 {
        sample_variance(&self.theta)
    }
}

impl Model {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let pqc = cfg.pqc_spec()?;
        let encoder = Encoder::new(cfg.encoder_config(), &mut Rng::substream(cfg.seed, ENCODER_STREAM))?;
        let theta = init_params(cfg.init, &mut Rng::substream(cfg.seed, THETA_STREAM), pqc.n_params())?;
        let head = match cfg.head {
            HeadKind::Mlp => MlpWeights::init(cfg.n_qubits, N_CLASSES, &mut Rng::substream(cfg.seed, HEAD_STREAM))?,
            HeadKind::Identity => identity_head(cfg.n_qubits),
        };
        Ok(Self {
            encoder,
            pqc,
            theta,
            head,
            head_kind: cfg.head,
            gradient: cfg.gradient,
        })
    }

    /// Trainable tensors in optimizer order: encoder, circuit angles, and
    /// the head when it is trained.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.params_mut();
        out.push(&mut self.theta);
        if self.head_kind == HeadKind::Mlp {
            out.push(&mut self.head.w);
            out.push(&mut self.head.b);
        }
        out
    }

    /// Every stored tensor by name, in checkpoint order.
    pub fn named_tensors(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out = self.encoder.named_tensors();
        out.push(("pqc.theta".into(), &self.theta));
        out.push(("head.weight".into(), &self.head.w));
        out.push(("head.bias".into(), &self.head.b));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = self.encoder.named_tensors_mut();
        out.push(("pqc.theta".into(), &mut self.theta));
        out.push(("head.weight".into(), &mut self.head.w));
        out.push(("head.bias".into(), &mut self.head.b));
        out
    }

    fn n(&self) -> usize {
        self.pqc.n_qubits
    }

    /// One circuit per sample, with trajectory errors inserted when asked.
    fn circuits(&self, features: &[f64], batch: usize, mode: QuantumMode, exec: Exec) -> Result<Vec<Vec<Circuit>>> {
        let nf = self.pqc.n_features();
        exec.map_range(batch, |s| {
            let c = self.pqc.build(&features[s * nf..(s + 1) * nf], &self.theta)?;
            match mode {
                QuantumMode::Trajectory { channel, seed, count } => {
                    let mut rng = Rng::substream(seed, s as u64);
                    (0..count).map(|_| sample_trajectory(&c, channel, &mut rng)).collect()
                }
                _ => Ok(vec![c]),
            }
        })
        .into_iter()
        .collect()
    }

    fn expectations(&self, circuits: &[Vec<Circuit>], mode: QuantumMode, exec: Exec) -> Result<Vec<f64>> {
        let n = self.n();
        let noise = match mode {
            QuantumMode::Density(ch) => Some(ch),
            _ => None,
        };
        let per: Vec<Result<Vec<f64>>> = exec.map(circuits, |cs| {
            let mut acc = vec![0.0; n];
            for c in cs {
                for (a, v) in acc.iter_mut().zip(evolve(c, noise)?) {
                    *a += v;
                }
            }
            let k = cs.len() as f64;
            Ok(acc.into_iter().map(|a| a / k).collect())
        });
        Ok(per.into_iter().collect::<Result<Vec<_>>>()?.concat())
    }

    fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        Ok(z.chunks(n)
            .map(|zs| mlp_forward(zs, &self.head))
            .collect::<Result<Vec<_>>>()?
            .concat())
    }

    /// Phase-coded encoder input for `indices`, with images flipped where
    /// `flips` says so.
    pub fn encode_inputs(&self, data: &Dataset, indices: &[usize], flips: &[bool], exec: Exec) -> Result<Vec<f64>> {
        let cfg = self.encoder.config();
        if data.height != cfg.height || data.width != cfg.width {
            return Err(Error::shape(format!(
                "images are {}x{}, encoder expects {}x{}",
                data.height, data.width, cfg.height, cfg.width
            )));
        }
        let per: Vec<Result<Vec<f64>>> = exec.map_range(indices.len(), |k| {
            let mut img = data.image(indices[k]);
            if flips.get(k).copied().unwrap_or(false) {
                hflip(&mut img, data.width);
            }
            phase_encode(&img, cfg.time_steps, cfg.phase_period)
        });
        Ok(per.into_iter().collect::<Result<Vec<_>>>()?.concat())
    }

    /// Forward and backward pass of the mean cross-entropy over one batch.
    pub fn batch_grads(
        &mut self,
        data: &Dataset,
        indices: &[usize],
        flips: &[bool],
        mode: QuantumMode,
        exec: Exec,
    ) -> Result<BatchGrads> {
        let batch = indices.len();
        let (n, np, nf) = (self.n(), self.pqc.n_params(), self.pqc.n_features());
        let input = self.encode_inputs(data, indices, flips, exec)?;
        let (features, cache) = self.encoder.forward_train(&input, batch, exec)?;
        drop(input);
        let circuits = self.circuits(&features, batch, mode, exec)?;
        let z = self.expectations(&circuits, mode, exec)?;
        let logits = self.logits(&z)?;
        let labels: Vec<usize> = indices.iter().map(|&i| data.labels[i]).collect();
        let (_, loss) = softmax_ce(&logits, &labels, N_CLASSES)?;
        let hg = head_backward(&logits, &labels, &z, &self.head)?;
        let per: Vec<Result<(Vec<f64>, Vec<f64>)>> = exec.map_range(batch, |s| {
            let g = &hg.z[s * n..(s + 1) * n];
            let cs = &circuits[s];
            let k = cs.len() as f64;
            let (mut gp, mut gx) = (vec![0.0; np], vec![0.0; nf]);
            for c in cs {
                let (p, x) = match mode {
                    QuantumMode::Density(ch) => param_shift_density(c, np, nf, Some(ch), Exec::Sequential)?.vjp(g),
                    _ if self.gradient == ShiftEngine::Literal => {
                        param_shift(c, np, nf, ShiftEngine::Literal, Exec::Sequential)?.vjp(g)
                    }
                    _ => {
                        let (_, p, x) = vjp(c, np, nf, g)?;
                        (p, x)
                    }
                };
                gp.iter_mut().zip(p).for_each(|(a, v)| *a += v / k);
                gx.iter_mut().zip(x).for_each(|(a, v)| *a += v / k);
            }
            Ok((gp, gx))
        });
        let mut theta = vec![0.0; np];
        let mut gx_all = Vec::with_capacity(batch * nf);
        for r in per {
            let (gp, gx) = r?;
            theta.iter_mut().zip(gp).for_each(|(a, v)| *a += v);
            gx_all.extend(gx);
        }
        let enc = self.encoder.backward(&cache, &gx_all, exec)?;
        Ok(BatchGrads {
            loss,
            encoder: enc.slices().into_iter().map(<[f64]>::to_vec).collect(),
            theta,
            head_w: hg.w,
            head_b: hg.b,
        })
    }

    /// Eval-mode predictions and per-sample losses for `indices`.
    pub fn predict(
        &self,
        data: &Dataset,
        indices: &[usize],
        mode: QuantumMode,
        exec: Exec,
    ) -> Result<(Vec<usize>, Vec<f64>)> {
        let batch = indices.len();
        let input = self.encode_inputs(data, indices, &[], exec)?;
        let features = self.encoder.forward_eval(&input, batch, exec)?;
        let circuits = self.circuits(&features, batch, mode, exec)?;
        let z = self.expectations(&circuits, mode, exec)?;
        let logits = self.logits(&z)?;
        let labels: Vec<usize> = indices.iter().map(|&i| data.labels[i]).collect();
        let (_, loss) = softmax_ce(&logits, &labels, N_CLASSES)?;
        Ok((logits.chunks(N_CLASSES).map(argmax).collect(), loss))
    }
}

/// Quantum mode for training or evaluation under `cfg`'s noise settings.
pub fn mode_for<'a>(
    cfg: &TrainConfig,
    channel: Option<&'a KrausChannel>,
    training: bool,
    seed: u64,
) -> QuantumMode<'a> {
    let Some(channel) = channel else {
        return QuantumMode::Pure;
    };
    let (engine, count) = if training {
        (cfg.noise.train, 1)
    } else {
        (cfg.noise.eval, cfg.noise.eval_trajectories)
    };
    match engine {
        NoiseEngine::Density => QuantumMode::Density(channel),
        NoiseEngine::Trajectory => QuantumMode::Trajectory { channel, seed, count },
    }
}
