//! Per-sample kernels on channel-major `C × H × W` buffers.

/// Geometry of a 2-D convolution without bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn in_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn out_len(&self) -> usize {
        self.out_channels * self.out_height() * self.out_width()
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    /// Output positions `o` with `0 <= o*stride + k - padding < len`.
    fn valid(&self, out_len: usize, in_len: usize, k: usize) -> std::ops::Range<usize> {
        let (s, p) = (self.stride, self.padding);
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        let hi = if in_len + p > k {
            out_len.min((in_len + p - k - 1) / s + 1)
        } else {
            0
        };
        lo..hi.max(lo)
    }

    /// Calls `f(o, i, ky, kx, oy, iy, ox_range, ix0)` for every valid tap row.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize, usize, usize, usize, std::ops::Range<usize>, isize)) {
        let (ho, wo) = (self.out_height(), self.out_width());
        for o in 0..self.out_channels {
            for i in 0..self.in_channels {
                for ky in 0..self.kernel {
                    for oy in self.valid(ho, self.height, ky) {
                        let iy = oy * self.stride + ky - self.padding;
                        for kx in 0..self.kernel {
                            let xr = self.valid(wo, self.width, kx);
                            let ix0 = kx as isize - self.padding as isize;
                            f(o, i, ky, kx, oy, iy, xr, ix0);
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, input: &[f64], weight: &[f64], out: &mut [f64]) {
        let (ho, wo, k, s) = (self.out_height(), self.out_width(), self.kernel, self.stride);
        let (h, w, cin) = (self.height, self.width, self.in_channels);
        out.fill(0.0);
        self.for_each_tap(|o, i, ky, kx, oy, iy, xr, ix0| {
            let wv = weight[((o * cin + i) * k + ky) * k + kx];
            if wv == 0.0 {
                return;
            }
            let orow = &mut out[(o * ho + oy) * wo..][..wo];
            let irow = &input[(i * h + iy) * w..][..w];
            for ox in xr {
                orow[ox] += wv * irow[(ox * s).wrapping_add_signed(ix0)];
            }
        });
    }

    /// Accumulates `∂L/∂input` into `grad_in`.
    pub fn backward_input(&self, grad_out: &[f64], weight: &[f64], grad_in: &mut [f64]) {
        let (ho, wo, k, s) = (self.out_height(), self.out_width(), self.kernel, self.stride);
        let (h, w, cin) = (self.height, self.width, self.in_channels);
        self.for_each_tap(|o, i, ky, kx, oy, iy, xr, ix0| {
            let wv = weight[((o * cin + i) * k + ky) * k + kx];
            let grow = &grad_out[(o * ho + oy) * wo..][..wo];
            let irow = &mut grad_in[(i * h + iy) * w..][..w];
            for ox in xr {
                irow[(ox * s).wrapping_add_signed(ix0)] += wv * grow[ox];
            }
        });
    }

    /// Accumulates `∂L/∂weight` into `grad_w`.
    pub fn backward_weight(&self, input: &[f64], grad_out: &[f64], grad_w: &mut [f64]) {
        let (ho, wo, k, s) = (self.out_height(), self.out_width(), self.kernel, self.stride);
        let (h, w, cin) = (self.height, self.width, self.in_channels);
        self.for_each_tap(|o, i, ky, kx, oy, iy, xr, ix0| {
            let grow = &grad_out[(o * ho + oy) * wo..][..wo];
            let irow = &input[(i * h + iy) * w..][..w];
            let mut acc = 0.0;
            for ox in xr {
                acc += grow[ox] * irow[(ox * s).wrapping_add_signed(ix0)];
            }
            grad_w[((o * cin + i) * k + ky) * k + kx] += acc;
        });
    }
}

/// Non-overlapping `k × k` max pooling (floor mode). `argmax` receives the
/// flat input index of the first maximum of each window.
pub fn maxpool_forward(
    input: &[f64],
    channels: usize,
    height: usize,
    width: usize,
    k: usize,
    out: &mut [f64],
    argmax: &mut [u32],
) {
    let (ho, wo) = (height / k, width / k);
    for c in 0..channels {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut at = 0;
                for dy in 0..k {
                    let row = (c * height + oy * k + dy) * width + ox * k;
                    for (dx, &v) in input[row..row + k].iter().enumerate() {
                        if v > best {
                            best = v;
                            at = row + dx;
                        }
                    }
                }
                let o = (c * ho + oy) * wo + ox;
                out[o] = best;
                argmax[o] = at as u32;
            }
        }
    }
}

pub fn maxpool_backward(grad_out: &[f64], argmax: &[u32], grad_in: &mut [f64]) {
    for (g, &i) in grad_out.iter().zip(argmax) {
        grad_in[i as usize] += g;
    }
}

/// Bounds of output bin `i` of `s` over an axis of length `len`.
fn bin(i: usize, s: usize, len: usize) -> (usize, usize) {
    (i * len / s, ((i + 1) * len).div_ceil(s))
}

/// Adaptive average pooling to `s × s` per channel.
pub fn adaptive_avg_forward(input: &[f64], channels: usize, height: usize, width: usize, s: usize, out: &mut [f64]) {
    for c in 0..channels {
        for by in 0..s {
            let (y0, y1) = bin(by, s, height);
            for bx in 0..s {
                let (x0, x1) = bin(bx, s, width);
                let mut acc = 0.0;
                for y in y0..y1 {
                    acc += input[(c * height + y) * width + x0..(c * height + y) * width + x1]
                        .iter()
                        .sum::<f64>();
                }
                out[(c * s + by) * s + bx] = acc / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
    }
}

pub fn adaptive_avg_backward(
    grad_out: &[f64],
    channels: usize,
    height: usize,
    width: usize,
    s: usize,
    grad_in: &mut [f64],
) {
    for c in 0..channels {
        for by in 0..s {
            let (y0, y1) = bin(by, s, height);
            for bx in 0..s {
                let (x0, x1) = bin(bx, s, width);
                let g = grad_out[(c * s + by) * s + bx] / ((y1 - y0) * (x1 - x0)) as f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        grad_in[(c * height + y) * width + x] += g;
                    }
                }
            }
        }
    }
}

/// `out = W·x + b` with `W` stored row-major `out × in`.
pub fn linear_forward(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, (y, bias)) in out.iter_mut().zip(b).enumerate() {
        *y = bias + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    }
}

/// Accumulates weight and bias gradients, returns `∂L/∂x`.
pub fn linear_backward(x: &[f64], w: &[f64], grad_out: &[f64], grad_w: &mut [f64], grad_b: &mut [f64]) -> Vec<f64> {
    let n_in = x.len();
    let mut grad_x = vec![0.0; n_in];
    for (o, &g) in grad_out.iter().enumerate() {
        grad_b[o] += g;
        let row = &w[o * n_in..(o + 1) * n_in];
        for ((gw, gx), (&xv, &wv)) in grad_w[o * n_in..(o + 1) * n_in]
            .iter_mut()
            .zip(grad_x.iter_mut())
            .zip(x.iter().zip(row))
        {
            *gw += g * xv;
            *gx += g * wv;
        }
    }
    grad_x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(s: &ConvShape, input: &[f64], w: &[f64]) -> Vec<f64> {
        let (ho, wo) = (s.out_height(), s.out_width());
        let mut out = vec![0.0; s.out_len()];
        for o in 0..s.out_channels {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for i in 0..s.in_channels {
                        for ky in 0..s.kernel {
                            for kx in 0..s.kernel {
                                let iy = (oy * s.stride + ky) as isize - s.padding as isize;
                                let ix = (ox * s.stride + kx) as isize - s.padding as isize;
                                if iy < 0 || ix < 0 || iy >= s.height as isize || ix >= s.width as isize {
                                    continue;
                                }
                                acc += w[((o * s.in_channels + i) * s.kernel + ky) * s.kernel + kx]
                                    * input[(i * s.height + iy as usize) * s.width + ix as usize];
                            }
                        }
                    }
                    out[(o * ho + oy) * wo + ox] = acc;
                }
            }
        }
        out
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::numerics::Rng::new(seed);
        (0..n).map(|_| rng.uniform() - 0.5).collect()
    }

    #[test]
    fn conv_matches_naive_and_adjoint() {
        for (stride, padding, k) in [(1, 1, 3), (2, 1, 3), (1, 0, 2), (2, 2, 3)] {
            let s = ConvShape {
                in_channels: 2,
                out_channels: 3,
                height: 7,
                width: 6,
                kernel: k,
                stride,
                padding,
            };
            let x = pseudo(s.in_len(), 1);
            let w = pseudo(s.weight_len(), 2);
            let mut out = vec![0.0; s.out_len()];
            s.forward(&x, &w, &mut out);
            let naive = naive_conv(&s, &x, &w);
            for (a, b) in out.iter().zip(&naive) {
                assert!((a - b).abs() < 1e-12);
            }
            // <g, conv(x)> = <conv^T(g), x> and likewise for weights.
            let g = pseudo(s.out_len(), 3);
            let lhs: f64 = g.iter().zip(&out).map(|(a, b)| a * b).sum();
            let mut gx = vec![0.0; s.in_len()];
            s.backward_input(&g, &w, &mut gx);
            let rhs: f64 = gx.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10);
            let mut gw = vec![0.0; s.weight_len()];
            s.backward_weight(&x, &g, &mut gw);
            let rhs: f64 = gw.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn maxpool_routes_to_first_max() {
        let x = [0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut out = [0.0; 2];
        let mut idx = [0; 2];
        maxpool_forward(&x, 1, 2, 4, 2, &mut out, &mut idx);
        assert_eq!(out, [1.0, 1.0]);
        assert_eq!(idx, [1, 2]);
        let mut g = [0.0; 8];
        maxpool_backward(&[3.0, 4.0], &idx, &mut g);
        assert_eq!(g[1], 3.0);
        assert_eq!(g[2], 4.0);
    }

    #[test]
    fn adaptive_pool_bins_and_adjoint() {
        let x = pseudo(2 * 7 * 7, 9);
        let mut out = vec![0.0; 2 * 3 * 3];
        adaptive_avg_forward(&x, 2, 7, 7, 3, &mut out);
        // bins over 7 with 3 outputs: [0,3), [2,5), [4,7)
        let manual: f64 = (0..3).flat_map(|y| (2..5).map(move |xx| (y, xx))).map(|(y, xx)| x[y * 7 + xx]).sum::<f64>() / 9.0;
        assert!((out[1] - manual).abs() < 1e-12);
        let g = pseudo(out.len(), 4);
        let lhs: f64 = g.iter().zip(&out).map(|(a, b)| a * b).sum();
        let mut gx = vec![0.0; x.len()];
        adaptive_avg_backward(&g, 2, 7, 7, 3, &mut gx);
        let rhs: f64 = gx.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let mut global = vec![0.0; 2];
        adaptive_avg_forward(&x, 2, 7, 7, 1, &mut global);
        assert!((global[0] - x[..49].iter().sum::<f64>() / 49.0).abs() < 1e-12);
    }
}
