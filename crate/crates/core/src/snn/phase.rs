use crate::error::{Error, Result};

/// Weight of a spike emitted at step `t` (1-based): `2^-(1 + (t-1) mod K)`.
pub fn phase_weight(t: usize, k: usize) -> f64 {
    0.5f64.powi(1 + ((t - 1) % k) as i32)
}

/// Phase-codes `pixels` (values in `[0, 1]`) into `T` frames laid out
/// `t`-major. Each pixel is quantized to `K` bits; at step `t` the frame
/// carries `ω(t)` where bit `(t-1) mod K`, counted from the most significant,
/// is set.
pub fn phase_encode(pixels: &[f64], t_steps: usize, k: usize) -> Result<Vec<f64>> {
    if t_steps == 0 || !(1..=16).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "phase coding needs T >= 1 and 1 <= K <= 16, got T={t_steps}, K={k}"
        )));
    }
    let levels = ((1u32 << k) - 1) as f64;
    let codes = pixels
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok((p * levels).round() as u32)
            } else {
                Err(Error::InputRange(format!("pixel {p} outside [0, 1]")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(t_steps * pixels.len());
    for t in 1..=t_steps {
        let bit = (t - 1) % k;
        let w = phase_weight(t, k);
        out.extend(
            codes
                .iter()
                .map(|&q| if (q >> (k - 1 - bit)) & 1 == 1 { w } else { 0.0 }),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        assert_eq!(phase_weight(1, 8), 0.5);
        assert_eq!(phase_weight(8, 8), 2f64.powi(-8));
        assert_eq!(phase_weight(9, 8), 0.5);
    }

    #[test]
    fn dark_and_bright_pixels() {
        assert!(phase_encode(&[0.0], 10, 8).unwrap().iter().all(|&v| v == 0.0));
        let total: f64 = phase_encode(&[1.0], 8, 8).unwrap().iter().sum();
        assert_eq!(total, 1.0 - 2f64.powi(-8));
    }

    #[test]
    fn bounded_by_weight_and_rejects_range() {
        let px = [0.1, 0.5, 0.77, 0.9];
        let s = phase_encode(&px, 10, 8).unwrap();
        for (t, frame) in s.chunks(px.len()).enumerate() {
            assert!(frame.iter().all(|&v| v.abs() <= phase_weight(t + 1, 8)));
        }
        assert!(matches!(phase_encode(&[1.5], 10, 8), Err(Error::InputRange(_))));
        assert!(phase_encode(&[0.5], 0, 8).is_err());
    }

    #[test]
    fn half_grey_is_msb_only() {
        // round(0.5 * 255) = 128 = 0b1000_0000
        let s = phase_encode(&[0.5], 8, 8).unwrap();
        assert_eq!(s[0], 0.5);
        assert!(s[1..].iter().all(|&v| v == 0.0));
    }
}
