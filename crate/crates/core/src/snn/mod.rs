//! Phase-coded spiking convolutional encoder trained by backpropagation
//! through time with an arctan surrogate gradient.

mod layers;
mod neuron;
mod phase;

pub use layers::{
    adaptive_avg_backward, adaptive_avg_forward, linear_backward, linear_forward, maxpool_backward,
    maxpool_forward, ConvShape,
};
pub use neuron::{heaviside, if_step, smooth_spike, surrogate_grad, IfState, ALPHA};
pub use phase::{phase_encode, phase_weight};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sample_uniform, Rng};
use crate::par::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub batch_norm: bool,
    /// Max-pool window; 1 disables pooling.
    pub pool: usize,
}

/// Forward nonlinearity of the neurons. `Smooth` replaces the step with its
/// surrogate antiderivative so the network becomes differentiable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeFn {
    #[default]
    Heaviside,
    Smooth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub height: usize,
    pub width: usize,
    pub time_steps: usize,
    pub phase_period: usize,
    pub blocks: Vec<ConvBlock>,
    /// Side of the adaptive average pool output per channel.
    pub adaptive_pool: usize,
    pub out_features: usize,
    pub threshold: f64,
    pub alpha: f64,
    pub spike: SpikeFn,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::standard(9)
    }
}

impl EncoderConfig {
    /// Two conv(3×3) → BN → IF → max-pool(2) blocks with 8 channels on
    /// 28×28 inputs, a global average pool and a projection to `3n`.
    pub fn standard(n_qubits: usize) -> Self {
        let block = |in_channels| ConvBlock {
            in_channels,
            out_channels: 8,
            kernel: 3,
            stride: 1,
            padding: 1,
            batch_norm: true,
            pool: 2,
        };
        Self {
            height: 28,
            width: 28,
            time_steps: 10,
            phase_period: 8,
            blocks: vec![block(1), block(8)],
            adaptive_pool: 1,
            out_features: 3 * n_qubits,
            threshold: 1.0,
            alpha: ALPHA,
            spike: SpikeFn::Heaviside,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }

    pub fn input_channels(&self) -> usize {
        self.blocks.first().map_or(1, |b| b.in_channels)
    }

    /// Per-sample input length `T · C · H · W`.
    pub fn input_len(&self) -> usize {
        self.time_steps * self.input_channels() * self.height * self.width
    }

    fn geometry(&self) -> Result<Vec<BlockGeom>> {
        let (mut h, mut w, mut c) = (self.height, self.width, self.input_channels());
        let mut out = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            if b.in_channels != c {
                return Err(Error::shape(format!(
                    "block {i} expects {} channels, previous layer has {c}",
                    b.in_channels
                )));
            }
            if b.kernel == 0 || b.stride == 0 || b.pool == 0 || h + 2 * b.padding < b.kernel || w + 2 * b.padding < b.kernel {
                return Err(Error::shape(format!("block {i} does not fit a {h}x{w} input")));
            }
            let conv = ConvShape {
                in_channels: b.in_channels,
                out_channels: b.out_channels,
                height: h,
                width: w,
                kernel: b.kernel,
                stride: b.stride,
                padding: b.padding,
            };
            let (ph, pw) = (conv.out_height() / b.pool, conv.out_width() / b.pool);
            if ph == 0 || pw == 0 {
                return Err(Error::shape(format!("block {i} pools its output to nothing")));
            }
            out.push(BlockGeom {
                conv,
                pool: b.pool,
                pooled_h: ph,
                pooled_w: pw,
            });
            (h, w, c) = (ph, pw, b.out_channels);
        }
        if self.adaptive_pool == 0 || self.adaptive_pool > h.min(w) {
            return Err(Error::shape(format!(
                "adaptive pool {} does not fit a {h}x{w} map",
                self.adaptive_pool
            )));
        }
        Ok(out)
    }

    fn last_map(&self) -> (usize, usize, usize) {
        let g = self.geometry().expect("validated geometry");
        g.last().map_or((self.input_channels(), self.height, self.width), |b| {
            (b.conv.out_channels, b.pooled_h, b.pooled_w)
        })
    }

    /// Width of the pooled vector fed to the projection.
    pub fn pooled_width(&self) -> usize {
        self.last_map().0 * self.adaptive_pool * self.adaptive_pool
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_steps == 0 || self.out_features == 0 {
            return Err(Error::InvalidArgument("encoder needs T >= 1 and a nonzero output".into()));
        }
        if !(1..=16).contains(&self.phase_period) {
            return Err(Error::InvalidArgument(format!("phase period {} outside 1..=16", self.phase_period)));
        }
        self.geometry().map(|_| ())
    }
}

#[derive(Clone, Copy, Debug)]
struct BlockGeom {
    conv: ConvShape,
    pool: usize,
    pooled_h: usize,
    pooled_w: usize,
}

impl BlockGeom {
    fn frame_out(&self) -> usize {
        self.conv.out_len()
    }

    fn frame_pooled(&self) -> usize {
        self.conv.out_channels * self.pooled_h * self.pooled_w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    fn new(c: usize) -> Self {
        Self {
            gamma: vec![1.0; c],
            beta: vec![0.0; c],
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    pub conv: Vec<Vec<f64>>,
    pub bn: Vec<Option<BatchNorm>>,
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

struct BlockCache {
    input: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    v: Vec<f64>,
    argmax: Vec<u32>,
}

/// Activations kept by a training forward pass for [`Encoder::backward`].
pub struct EncoderCache {
    batch: usize,
    blocks: Vec<BlockCache>,
    rate: Vec<f64>,
    pooled: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderGrads {
    pub conv: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

impl EncoderGrads {
    /// Same order as [`Encoder::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for ((c, g), b) in self.conv.iter().zip(&self.gamma).zip(&self.beta) {
            out.push(c);
            if !g.is_empty() {
                out.push(g);
                out.push(b);
            }
        }
        out.push(&self.proj_w);
        out.push(&self.proj_b);
        out
    }
}

fn fan_in_uniform(rng: &mut Rng, fan_in: usize, n: usize) -> Result<Vec<f64>> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    sample_uniform(rng, -bound, bound, n)
}

/// Sums per-item partial vectors in item order.
fn ordered_sum(parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    parts.into_iter().fold(vec![0.0; len], |mut acc, p| {
        acc.iter_mut().zip(p).for_each(|(a, v)| *a += v);
        acc
    })
}

impl Encoder {
    pub fn new(config: EncoderConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let geom = config.geometry()?;
        let mut conv = Vec::new();
        let mut bn = Vec::new();
        for (g, b) in geom.iter().zip(&config.blocks) {
            let fan_in = g.conv.in_channels * g.conv.kernel * g.conv.kernel;
            conv.push(fan_in_uniform(rng, fan_in, g.conv.weight_len())?);
            bn.push(b.batch_norm.then(|| BatchNorm::new(b.out_channels)));
        }
        let width = config.pooled_width();
        let proj_w = fan_in_uniform(rng, width, width * config.out_features)?;
        let proj_b = fan_in_uniform(rng, width, config.out_features)?;
        Ok(Self {
            config,
            conv,
            bn,
            proj_w,
            proj_b,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn out_features(&self) -> usize {
        self.config.out_features
    }

    /// Trainable tensors: per block the conv kernel then BN scale and shift,
    /// followed by the projection weight and bias.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for (c, bn) in self.conv.iter_mut().zip(self.bn.iter_mut()) {
            out.push(c);
            if let Some(bn) = bn {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out.push(&mut self.proj_w);
        out.push(&mut self.proj_b);
        out
    }

    /// Every stored tensor, running statistics included, by name.
    pub fn named_tensors(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out = Vec::new();
        for (l, (c, bn)) in self.conv.iter().zip(&self.bn).enumerate() {
            out.push((format!("encoder.conv{l}.weight"), c));
            if let Some(bn) = bn {
                out.push((format!("encoder.bn{l}.gamma"), &bn.gamma));
                out.push((format!("encoder.bn{l}.beta"), &bn.beta));
                out.push((format!("encoder.bn{l}.running_mean"), &bn.running_mean));
                out.push((format!("encoder.bn{l}.running_var"), &bn.running_var));
            }
        }
        out.push(("encoder.proj.weight".into(), &self.proj_w));
        out.push(("encoder.proj.bias".into(), &self.proj_b));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = Vec::new();
        for (l, (c, bn)) in self.conv.iter_mut().zip(self.bn.iter_mut()).enumerate() {
            out.push((format!("encoder.conv{l}.weight"), c));
            if let Some(bn) = bn {
                out.push((format!("encoder.bn{l}.gamma"), &mut bn.gamma));
                out.push((format!("encoder.bn{l}.beta"), &mut bn.beta));
                out.push((format!("encoder.bn{l}.running_mean"), &mut bn.running_mean));
                out.push((format!("encoder.bn{l}.running_var"), &mut bn.running_var));
            }
        }
        out.push(("encoder.proj.weight".into(), &mut self.proj_w));
        out.push(("encoder.proj.bias".into(), &mut self.proj_b));
        out
    }

    fn spike(&self, v: f64) -> f64 {
        let x = v - self.config.threshold;
        match self.config.spike {
            SpikeFn::Heaviside => heaviside(x),
            SpikeFn::Smooth => smooth_spike(x, self.config.alpha),
        }
    }

    /// Training-mode pass: batch statistics, running statistics updated.
    /// `input` holds `batch` samples of `T · C · H · W` values.
    pub fn forward_train(&mut self, input: &[f64], batch: usize, exec: Exec) -> Result<(Vec<f64>, EncoderCache)> {
        let (features, cache, stats) = self.run(input, batch, true, exec)?;
        let m = self.config.bn_momentum;
        for (bn, (mean, var)) in self.bn.iter_mut().zip(stats) {
            if let Some(bn) = bn {
                for c in 0..mean.len() {
                    bn.running_mean[c] = (1.0 - m) * bn.running_mean[c] + m * mean[c];
                    bn.running_var[c] = (1.0 - m) * bn.running_var[c] + m * var[c];
                }
            }
        }
        Ok((features, cache.expect("training cache")))
    }

    /// Inference pass with running statistics.
    pub fn forward_eval(&self, input: &[f64], batch: usize, exec: Exec) -> Result<Vec<f64>> {
        Ok(self.run(input, batch, false, exec)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn run(
        &self,
        input: &[f64],
        batch: usize,
        train: bool,
        exec: Exec,
    ) -> Result<(Vec<f64>, Option<EncoderCache>, Vec<(Vec<f64>, Vec<f64>)>)> {
        let cfg = &self.config;
        if batch == 0 || input.len() != batch * cfg.input_len() {
            return Err(Error::shape(format!(
                "encoder input of {} values for batch {batch} of {} each",
                input.len(),
                cfg.input_len()
            )));
        }
        let geom = cfg.geometry()?;
        let t_steps = cfg.time_steps;
        let frames = batch * t_steps;
        let mut x = input.to_vec();
        let mut caches = Vec::new();
        let mut stats = Vec::new();
        for (l, g) in geom.iter().enumerate() {
            let (fin, fout) = (g.conv.in_len(), g.frame_out());
            let c = g.conv.out_channels;
            let hw = fout / c;
            let w = &self.conv[l];
            let mut y = vec![0.0; frames * fout];
            exec.for_each_chunk_mut(&mut y, fout, |f, out| g.conv.forward(&x[f * fin..(f + 1) * fin], w, out));

            let mut inv_std = Vec::new();
            let mut xhat = Vec::new();
            if let Some(bn) = &self.bn[l] {
                let (mean, var) = if train {
                    let n = (frames * hw) as f64;
                    let sums = exec.map_range(frames, |f| {
                        (0..c).map(|ch| y[f * fout + ch * hw..][..hw].iter().sum::<f64>()).collect()
                    });
                    let mean: Vec<f64> = ordered_sum(sums, c).into_iter().map(|s| s / n).collect();
                    let sq = exec.map_range(frames, |f| {
                        (0..c)
                            .map(|ch| y[f * fout + ch * hw..][..hw].iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>())
                            .collect()
                    });
                    let ss = ordered_sum(sq, c);
                    let biased: Vec<f64> = ss.iter().map(|s| s / n).collect();
                    let unbiased: Vec<f64> = ss.iter().map(|s| s / (n - 1.0).max(1.0)).collect();
                    stats.push((mean.clone(), unbiased));
                    (mean, biased)
                } else {
                    (bn.running_mean.clone(), bn.running_var.clone())
                };
                inv_std = var.iter().map(|v| 1.0 / (v + cfg.bn_eps).sqrt()).collect();
                if train {
                    xhat = vec![0.0; y.len()];
                }
                let (mean, inv) = (&mean, &inv_std);
                exec.for_each_chunk_mut(&mut y, fout, |_, frame| {
                    for (ch, plane) in frame.chunks_mut(hw).enumerate() {
                        for v in plane {
                            *v = (*v - mean[ch]) * inv[ch];
                        }
                    }
                });
                if train {
                    xhat.copy_from_slice(&y);
                }
                exec.for_each_chunk_mut(&mut y, fout, |_, frame| {
                    for (ch, plane) in frame.chunks_mut(hw).enumerate() {
                        for v in plane {
                            *v = bn.gamma[ch] * *v + bn.beta[ch];
                        }
                    }
                });
            } else {
                stats.push((Vec::new(), Vec::new()));
            }

            // Integrate-and-fire over time, per sample; `y` becomes the
            // pre-reset membrane potential.
            exec.for_each_chunk_mut(&mut y, t_steps * fout, |_, sample| {
                let mut h = vec![0.0; fout];
                for frame in sample.chunks_mut(fout) {
                    for (v, hv) in frame.iter_mut().zip(h.iter_mut()) {
                        *v += *hv;
                        *hv = *v * (1.0 - self.spike(*v));
                    }
                }
            });
            let v = y;
            let mut spikes: Vec<f64> = v.iter().map(|&p| self.spike(p)).collect();

            let mut argmax = Vec::new();
            if g.pool > 1 {
                let fp = g.frame_pooled();
                let pooled = exec.map_range(frames, |f| {
                    let mut out = vec![0.0; fp];
                    let mut idx = vec![0u32; fp];
                    maxpool_forward(&spikes[f * fout..][..fout], c, g.conv.out_height(), g.conv.out_width(), g.pool, &mut out, &mut idx);
                    (out, idx)
                });
                let (mut out, mut idx) = (Vec::with_capacity(frames * fp), Vec::with_capacity(frames * fp));
                for (o, i) in pooled {
                    out.extend(o);
                    idx.extend(i);
                }
                spikes = out;
                argmax = idx;
            }
            let block_input = std::mem::replace(&mut x, spikes);
            if train {
                caches.push(BlockCache {
                    input: block_input,
                    xhat,
                    inv_std,
                    v,
                    argmax,
                });
            }
        }

        let (c, h, w) = cfg.last_map();
        let frame = c * h * w;
        let s = cfg.adaptive_pool;
        let width = cfg.pooled_width();
        let inv_t = 1.0 / t_steps as f64;
        let rate: Vec<f64> = (0..batch)
            .flat_map(|b| {
                let sample = &x[b * t_steps * frame..(b + 1) * t_steps * frame];
                (0..frame).map(move |i| (0..t_steps).map(|t| sample[t * frame + i]).sum::<f64>() * inv_t)
            })
            .collect();
        let mut pooled = vec![0.0; batch * width];
        for (b, out) in pooled.chunks_mut(width).enumerate() {
            adaptive_avg_forward(&rate[b * frame..(b + 1) * frame], c, h, w, s, out);
        }
        let nf = cfg.out_features;
        let mut features = vec![0.0; batch * nf];
        for (b, out) in features.chunks_mut(nf).enumerate() {
            linear_forward(&pooled[b * width..(b + 1) * width], &self.proj_w, &self.proj_b, out);
        }
        let cache = train.then_some(EncoderCache {
            batch,
            blocks: caches,
            rate,
            pooled,
        });
        Ok((features, cache, stats))
    }

    /// Backpropagation through time from `∂L/∂features` (`batch × out`).
    pub fn backward(&self, cache: &EncoderCache, grad_features: &[f64], exec: Exec) -> Result<EncoderGrads> {
        let cfg = &self.config;
        let batch = cache.batch;
        let nf = cfg.out_features;
        if grad_features.len() != batch * nf || cache.blocks.len() != cfg.blocks.len() {
            return Err(Error::State("encoder cache does not match this gradient".into()));
        }
        let geom = cfg.geometry()?;
        let t_steps = cfg.time_steps;
        let frames = batch * t_steps;
        let width = cfg.pooled_width();

        let mut proj_w = vec![0.0; self.proj_w.len()];
        let mut proj_b = vec![0.0; nf];
        let mut g_pooled = vec![0.0; batch * width];
        for b in 0..batch {
            let gx = linear_backward(
                &cache.pooled[b * width..(b + 1) * width],
                &self.proj_w,
                &grad_features[b * nf..(b + 1) * nf],
                &mut proj_w,
                &mut proj_b,
            );
            g_pooled[b * width..(b + 1) * width].copy_from_slice(&gx);
        }
        let (c, h, w) = cfg.last_map();
        let frame = c * h * w;
        let mut g_rate = vec![0.0; batch * frame];
        for b in 0..batch {
            adaptive_avg_backward(
                &g_pooled[b * width..(b + 1) * width],
                c,
                h,
                w,
                cfg.adaptive_pool,
                &mut g_rate[b * frame..(b + 1) * frame],
            );
        }
        debug_assert_eq!(cache.rate.len(), g_rate.len());
        let inv_t = 1.0 / t_steps as f64;
        let mut g_out: Vec<f64> = (0..batch)
            .flat_map(|b| {
                let gr = &g_rate[b * frame..(b + 1) * frame];
                (0..t_steps).flat_map(move |_| gr.iter().map(move |g| g * inv_t))
            })
            .collect();

        let n_blocks = geom.len();
        let mut conv_g = vec![Vec::new(); n_blocks];
        let mut gamma_g = vec![Vec::new(); n_blocks];
        let mut beta_g = vec![Vec::new(); n_blocks];
        for l in (0..n_blocks).rev() {
            let g = &geom[l];
            let bc = &cache.blocks[l];
            let fout = g.frame_out();
            let ch = g.conv.out_channels;
            let hw = fout / ch;

            let mut gy = if g.pool > 1 {
                let fp = g.frame_pooled();
                let mut gs = vec![0.0; frames * fout];
                exec.for_each_chunk_mut(&mut gs, fout, |f, gin| {
                    maxpool_backward(&g_out[f * fp..][..fp], &bc.argmax[f * fp..][..fp], gin)
                });
                gs
            } else {
                std::mem::take(&mut g_out)
            };

            // Through the neurons, last step first.
            let (th, alpha) = (cfg.threshold, cfg.alpha);
            exec.for_each_chunk_mut(&mut gy, t_steps * fout, |b, sample| {
                let v = &bc.v[b * t_steps * fout..(b + 1) * t_steps * fout];
                let mut gh = vec![0.0; fout];
                for t in (0..t_steps).rev() {
                    let gs = &mut sample[t * fout..(t + 1) * fout];
                    let vt = &v[t * fout..(t + 1) * fout];
                    for ((g, &p), ghv) in gs.iter_mut().zip(vt).zip(gh.iter_mut()) {
                        let s = self.spike(p);
                        let gspike = *g - *ghv * p;
                        let gv = *ghv * (1.0 - s) + gspike * surrogate_grad(p - th, alpha);
                        *g = gv;
                        *ghv = gv;
                    }
                }
            });

            if let Some(bn) = &self.bn[l] {
                let parts = exec.map_range(frames, |f| {
                    let mut acc = vec![0.0; 2 * ch];
                    for k in 0..ch {
                        let gp = &gy[f * fout + k * hw..][..hw];
                        let xp = &bc.xhat[f * fout + k * hw..][..hw];
                        acc[k] = gp.iter().zip(xp).map(|(a, b)| a * b).sum();
                        acc[ch + k] = gp.iter().sum();
                    }
                    acc
                });
                let sums = ordered_sum(parts, 2 * ch);
                let (dgamma, dbeta) = sums.split_at(ch);
                let n = (frames * hw) as f64;
                exec.for_each_chunk_mut(&mut gy, fout, |f, frame| {
                    for (k, plane) in frame.chunks_mut(hw).enumerate() {
                        let scale = bn.gamma[k] * bc.inv_std[k] / n;
                        let xp = &bc.xhat[f * fout + k * hw..][..hw];
                        for (gv, &xh) in plane.iter_mut().zip(xp) {
                            *gv = scale * (n * *gv - dbeta[k] - xh * dgamma[k]);
                        }
                    }
                });
                gamma_g[l] = dgamma.to_vec();
                beta_g[l] = dbeta.to_vec();
            }

            let fin = g.conv.in_len();
            let wlen = g.conv.weight_len();
            let parts = exec.map_range(frames, |f| {
                let mut gw = vec![0.0; wlen];
                g.conv.backward_weight(&bc.input[f * fin..][..fin], &gy[f * fout..][..fout], &mut gw);
                gw
            });
            conv_g[l] = ordered_sum(parts, wlen);
            if l > 0 {
                let mut gin = vec![0.0; frames * fin];
                let w = &self.conv[l];
                exec.for_each_chunk_mut(&mut gin, fin, |f, gi| g.conv.backward_input(&gy[f * fout..][..fout], w, gi));
                g_out = gin;
            }
        }
        Ok(EncoderGrads {
            conv: conv_g,
            gamma: gamma_g,
            beta: beta_g,
            proj_w,
            proj_b,
        })
    }
}
