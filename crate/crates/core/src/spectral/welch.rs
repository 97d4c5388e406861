//! Welch power spectral density with Hamming windows.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// One-sided PSD estimator (µV²/Hz) with 50 % overlapping periodic Hamming
/// windows and per-window mean removal.
pub struct Welch {
    nperseg: usize,
    step: usize,
    window: Vec<f64>,
    window_energy: f64,
    fs: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl Welch {
    pub fn new(nperseg: usize, fs: f64) -> Self {
        let window: Vec<f64> = (0..nperseg)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / nperseg as f64).cos())
            .collect();
        let window_energy = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(nperseg);
        Welch {
            nperseg,
            step: (nperseg / 2).max(1),
            window,
            window_energy,
            fs,
            fft,
        }
    }

    pub fn resolution_hz(&self) -> f64 {
        self.fs / self.nperseg as f64
    }

    /// Averaged PSD; bins `0..=nperseg/2`. Returns `None` if `x` is shorter
    /// than one window.
    pub fn psd(&self, x: &[f64]) -> Option<Vec<f64>> {
        if x.len() < self.nperseg {
            return None;
        }
        let n_bins = self.nperseg / 2 + 1;
        let mut acc = vec![0.0; n_bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nperseg];
        let mut count = 0usize;
        let mut start = 0;
        while start + self.nperseg <= x.len() {
            let seg = &x[start..start + self.nperseg];
            let mean = seg.iter().sum::<f64>() / self.nperseg as f64;
            for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new((v - mean) * w, 0.0);
            }
            self.fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            count += 1;
            start += self.step;
        }
        let scale = 1.0 / (self.fs * self.window_energy * count as f64);
        let even = self.nperseg.is_multiple_of(2);
        for (k, a) in acc.iter_mut().enumerate() {
            let one_sided = k != 0 && !(even && k == n_bins - 1);
            *a *= if one_sided { 2.0 * scale } else { scale };
        }
        Some(acc)
    }

    /// Integral of the PSD over bins with `lo_hz <= f < hi_hz`.
    pub fn band_power(&self, psd: &[f64], lo_hz: f64, hi_hz: f64) -> f64 {
        let df = self.resolution_hz();
        psd.iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = *k as f64 * df;
                f >= lo_hz && f < hi_hz
            })
            .map(|(_, p)| p * df)
            .sum()
    }
}
