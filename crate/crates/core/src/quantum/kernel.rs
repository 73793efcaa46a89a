//! Amplitude-level kernels on a `2^n` complex vector. Wire `q` maps to bit
//! `n - 1 - q` of the basis index.

use num_complex::Complex64 as C64;

use super::{Mat2, Mat4};

#[inline]
fn bit(n: usize, q: usize) -> usize {
    1usize << (n - 1 - q)
}

pub fn apply_1q(amps: &mut [C64], n: usize, q: usize, m: &Mat2) {
    let stride = bit(n, q);
    let [[m00, m01], [m10, m11]] = *m;
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = m00 * x + m01 * y;
            *b = m10 * x + m11 * y;
        }
    }
}

pub fn apply_diag_1q(amps: &mut [C64], n: usize, q: usize, d0: C64, d1: C64) {
    let stride = bit(n, q);
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        lo.iter_mut().for_each(|a| *a *= d0);
        hi.iter_mut().for_each(|b| *b *= d1);
    }
}

pub fn apply_cz(amps: &mut [C64], n: usize, a: usize, b: usize) {
    let mask = bit(n, a) | bit(n, b);
    for (i, amp) in amps.iter_mut().enumerate() {
        if i & mask == mask {
            *amp = -*amp;
        }
    }
}

pub fn apply_cnot(amps: &mut [C64], n: usize, control: usize, target: usize) {
    let (cm, tm) = (bit(n, control), bit(n, target));
    for i in 0..amps.len() {
        if i & cm != 0 && i & tm == 0 {
            amps.swap(i, i | tm);
        }
    }
}

/// General two-wire operator; `a` is the high bit of the 4x4 index.
pub fn apply_2q(amps: &mut [C64], n: usize, a: usize, b: usize, m: &Mat4) {
    let (am, bm) = (bit(n, a), bit(n, b));
    for i in 0..amps.len() {
        if i & am != 0 || i & bm != 0 {
            continue;
        }
        let idx = [i, i | bm, i | am, i | am | bm];
        let v = idx.map(|k| amps[k]);
        for (r, &k) in idx.iter().enumerate() {
            amps[k] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
        }
    }
}

/// `<Z_j>` for every wire of a normalized statevector, in one pass.
pub fn expectations_z(amps: &[C64], n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    for (i, a) in amps.iter().enumerate() {
        let p = a.norm_sqr();
        for (j, e) in acc.iter_mut().enumerate() {
            if i & bit(n, j) == 0 {
                *e += p;
            } else {
                *e -= p;
            }
        }
    }
    acc
}

/// `<u| Z_j |v>` for every wire.
pub fn cross_expectations_z(u: &[C64], v: &[C64], n: usize) -> Vec<C64> {
    let mut acc = vec![C64::new(0.0, 0.0); n];
    for (i, (a, b)) in u.iter().zip(v).enumerate() {
        let p = a.conj() * b;
        for (j, e) in acc.iter_mut().enumerate() {
            if i & bit(n, j) == 0 {
                *e += p;
            } else {
                *e -= p;
            }
        }
    }
    acc
}
