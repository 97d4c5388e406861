//! Polyphase rational resampling with a Kaiser-windowed sinc prototype.

use std::f64::consts::PI;

pub const KAISER_BETA: f64 = 8.0;
pub const TAPS_PER_PHASE: usize = 64;
const MAX_FACTOR: u64 = 10_000;

/// Upsample by `up`, downsample by `down`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub up: u64,
    pub down: u64,
}

impl Ratio {
    /// Smallest-denominator `up/down` with both factors at most 10000
    /// matching `to_hz / from_hz` within 1e-9 relative error.
    pub fn approximate(from_hz: f64, to_hz: f64) -> Option<Ratio> {
        let target = to_hz / from_hz;
        if !target.is_finite() || target <= 0.0 {
            return None;
        }
        (1..=MAX_FACTOR).find_map(|down| {
            let up = (target * down as f64).round();
            if up < 1.0 || up > MAX_FACTOR as f64 {
                return None;
            }
            let err = (up / down as f64 - target).abs() / target;
            (err <= 1e-9).then_some(Ratio { up: up as u64, down })
        })
    }

    pub fn is_identity(&self) -> bool {
        self.up == self.down
    }

    pub fn output_len(&self, n: usize) -> usize {
        ((n as f64) * self.up as f64 / self.down as f64).round() as usize
    }
}

/// Prototype low-pass at the upsampled rate, normalized to a DC gain of
/// `up` so each polyphase branch has unit gain.
#[derive(Debug, Clone)]
pub struct PolyphaseResampler {
    ratio: Ratio,
    taps: Vec<f64>,
}

impl PolyphaseResampler {
    pub fn new(ratio: Ratio) -> Self {
        let m = ratio.up.max(ratio.down) as usize;
        let len = TAPS_PER_PHASE * m + 1;
        let center = (len - 1) as f64 / 2.0;
        let cutoff = 0.5 / m as f64;
        let i0_beta = bessel_i0(KAISER_BETA);
        let mut taps: Vec<f64> = (0..len)
            .map(|k| {
                let t = k as f64 - center;
                let r = t / center;
                let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                sinc(2.0 * cutoff * t) * window
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        let scale = ratio.up as f64 / sum;
        taps.iter_mut().for_each(|h| *h *= scale);
        PolyphaseResampler { ratio, taps }
    }

    pub fn ratio(&self) -> Ratio {
        self.ratio
    }

    /// Input samples of odd reflection needed on each side.
    pub fn pad_len(&self) -> usize {
        let delay = (self.taps.len() - 1) / 2;
        delay.div_ceil(self.ratio.up as usize) + 2
    }

    /// Shortest input accepted by [`PolyphaseResampler::process`].
    pub fn min_len(&self) -> usize {
        self.pad_len() + 1
    }

    /// Resamples one channel. The caller checks `x.len() >= self.min_len()`.
    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let pad = self.pad_len();
        debug_assert!(n > pad);
        let (first, last) = (x[0], x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i.min(n - 1)]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i.min(n - 1)]));

        let up = self.ratio.up as i64;
        let down = self.ratio.down as i64;
        let len = self.taps.len() as i64;
        let delay = (len - 1) / 2;
        let offset = pad as i64 * up;
        let n_out = self.ratio.output_len(n);
        (0..n_out as i64)
            .map(|m| {
                let pos = m * down + offset + delay;
                let i_lo = (pos - (len - 1) + up - 1).div_euclid(up).max(0);
                let i_hi = pos.div_euclid(up).min(ext.len() as i64 - 1);
                (i_lo..=i_hi)
                    .map(|i| self.taps[(pos - i * up) as usize] * ext[i as usize])
                    .sum()
            })
            .collect()
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_search() {
        assert_eq!(Ratio::approximate(500.0, 512.0), Some(Ratio { up: 128, down: 125 }));
        assert_eq!(Ratio::approximate(1024.0, 512.0), Some(Ratio { up: 1, down: 2 }));
        assert_eq!(Ratio::approximate(512.0, 512.0), Some(Ratio { up: 1, down: 1 }));
        assert_eq!(Ratio::approximate(512.0, 512.0 * std::f64::consts::PI), None);
        assert_eq!(Ratio::approximate(0.0, 512.0), None);
    }

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun table values.
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_74).abs() < 1e-9);
    }

    #[test]
    fn branches_have_unit_gain() {
        let r = PolyphaseResampler::new(Ratio { up: 3, down: 2 });
        for phase in 0..3 {
            let g: f64 = r.taps.iter().skip(phase).step_by(3).sum();
            assert!((g - 1.0).abs() < 1e-3, "phase {phase}: {g}");
        }
    }
}
