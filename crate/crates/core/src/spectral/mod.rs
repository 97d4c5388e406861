//! Deterministic DSP: 1 Hz high-pass, line-noise notches, band-pass,
//! rational resampling and Welch band power.
//!
//! Every IIR filter is applied forward and backward (zero phase) with odd
//! reflection padding of three times the filter order on each side.

mod iir;
mod resample;
mod welch;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use iir::{Biquad, Sos};
pub use resample::{PolyphaseResampler, Ratio};
pub use welch::Welch;

use crate::band::BandSpec;
use crate::recording::{row_f64, Segment};

pub const BUTTERWORTH_ORDER: usize = 4;
pub const HIGHPASS_CUTOFF_HZ: f64 = 1.0;
pub const NOTCH_Q: f64 = 35.0;
const ZERO_PHASE: &str = "zero-phase forward-backward";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("segment has {got} samples, at least {needed} required")]
    SegmentTooShort { needed: usize, got: usize },
    #[error("notch at {freq_hz} Hz is not below Nyquist ({nyquist_hz} Hz)")]
    FrequencyAboveNyquist { freq_hz: f64, nyquist_hz: f64 },
    #[error("band {lo_hz}-{hi_hz} Hz does not fit below Nyquist ({nyquist_hz} Hz)")]
    BandAboveNyquist { lo_hz: f64, hi_hz: f64, nyquist_hz: f64 },
    #[error("no rational ratio p/q with p, q <= 10000 maps {from_hz} Hz to {to_hz} Hz")]
    IrrationalRatio { from_hz: f64, to_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Highpass,
    Notch,
    Bandpass,
    Resample,
}

/// Design record attached to filtered outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kind: FilterKind,
    pub order: usize,
    pub cutoffs_hz: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub group_delay: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl FilterReport {
    fn zero_phase(kind: FilterKind, order: usize, cutoffs_hz: Vec<f64>) -> Self {
        FilterReport {
            kind,
            order,
            cutoffs_hz,
            q: None,
            group_delay: ZERO_PHASE.to_string(),
            note: None,
        }
    }
}

fn check_len(sos: &Sos, n: usize) -> Result<(), SpectralError> {
    if n < sos.min_len() {
        return Err(SpectralError::SegmentTooShort {
            needed: sos.min_len(),
            got: n,
        });
    }
    Ok(())
}

fn filter_segment(seg: &Segment, sos: &Sos, report: FilterReport) -> Result<Segment, SpectralError> {
    check_len(sos, seg.n_samples())?;
    let rows = (0..seg.n_channels())
        .map(|c| sos.filtfilt(&seg.channel_f64(c)))
        .collect();
    Ok(seg.with_rows(rows, seg.sample_rate_hz, report))
}

/// Zero-phase 4th-order Butterworth high-pass at 1 Hz.
pub fn highpass_1hz(seg: &Segment) -> Result<Segment, SpectralError> {
    let sos = Sos::butter_highpass(BUTTERWORTH_ORDER, HIGHPASS_CUTOFF_HZ, seg.sample_rate_hz);
    let report = FilterReport::zero_phase(FilterKind::Highpass, BUTTERWORTH_ORDER, vec![HIGHPASS_CUTOFF_HZ]);
    filter_segment(seg, &sos, report)
}

/// Cascade of zero-phase second-order notches (Q = 35), one per frequency.
pub fn notch_line(seg: &Segment, freqs_hz: &[f64]) -> Result<Segment, SpectralError> {
    if freqs_hz.is_empty() {
        return Ok(seg.clone());
    }
    let fs = seg.sample_rate_hz;
    let nyquist_hz = fs / 2.0;
    if let Some(&f) = freqs_hz.iter().find(|&&f| !(f > 0.0 && f < nyquist_hz)) {
        return Err(SpectralError::FrequencyAboveNyquist { freq_hz: f, nyquist_hz });
    }
    let sos = Sos::cascade(freqs_hz.iter().map(|&f| Sos::notch(f, NOTCH_Q, fs)));
    let report = FilterReport {
        q: Some(NOTCH_Q),
        note: Some("fixed IIR notch in place of adaptive line-noise regression".to_string()),
        ..FilterReport::zero_phase(FilterKind::Notch, 2, freqs_hz.to_vec())
    };
    filter_segment(seg, &sos, report)
}

/// A band-pass designed once for a band and sample rate, applied row-wise.
#[derive(Debug, Clone)]
pub struct BandpassFilter {
    band: BandSpec,
    sos: Sos,
}

impl BandpassFilter {
    pub fn new(band: BandSpec, sample_rate_hz: f64) -> Result<Self, SpectralError> {
        if !band.fits(sample_rate_hz) {
            return Err(SpectralError::BandAboveNyquist {
                lo_hz: band.lo_hz,
                hi_hz: band.hi_hz,
                nyquist_hz: sample_rate_hz / 2.0,
            });
        }
        let sos = Sos::butter_bandpass(BUTTERWORTH_ORDER, band.lo_hz, band.hi_hz, sample_rate_hz);
        Ok(BandpassFilter { band, sos })
    }

    pub fn band(&self) -> BandSpec {
        self.band
    }

    pub fn sos(&self) -> &Sos {
        &self.sos
    }

    pub fn min_len(&self) -> usize {
        self.sos.min_len()
    }

    pub fn report(&self) -> FilterReport {
        FilterReport::zero_phase(
            FilterKind::Bandpass,
            BUTTERWORTH_ORDER,
            vec![self.band.lo_hz, self.band.hi_hz],
        )
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, SpectralError> {
        check_len(&self.sos, x.len())?;
        Ok(self.sos.filtfilt(x))
    }

    /// Filters each row (channel) of `x`.
    pub fn apply_rows(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, SpectralError> {
        check_len(&self.sos, x.ncols())?;
        let mut out = Array2::zeros(x.raw_dim());
        for (src, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            let y = match src.as_slice() {
                Some(s) => self.sos.filtfilt(s),
                None => self.sos.filtfilt(&src.to_vec()),
            };
            dst.iter_mut().zip(y).for_each(|(d, v)| *d = v);
        }
        Ok(out)
    }
}

/// Zero-phase band-pass of a window (rows are channels).
pub fn bandpass(x: ArrayView2<'_, f64>, band: BandSpec, sample_rate_hz: f64) -> Result<Array2<f64>, SpectralError> {
    BandpassFilter::new(band, sample_rate_hz)?.apply_rows(x)
}

pub fn bandpass_segment(seg: &Segment, band: BandSpec) -> Result<Segment, SpectralError> {
    let f = BandpassFilter::new(band, seg.sample_rate_hz)?;
    filter_segment(seg, &f.sos, f.report())
}

/// Polyphase rational resampling; `start_time_us` is preserved.
pub fn resample_to(seg: &Segment, target_hz: f64) -> Result<Segment, SpectralError> {
    let ratio = Ratio::approximate(seg.sample_rate_hz, target_hz).ok_or(SpectralError::IrrationalRatio {
        from_hz: seg.sample_rate_hz,
        to_hz: target_hz,
    })?;
    if ratio.is_identity() {
        return Ok(seg.clone());
    }
    let resampler = PolyphaseResampler::new(ratio);
    if seg.n_samples() < resampler.min_len() {
        return Err(SpectralError::SegmentTooShort {
            needed: resampler.min_len(),
            got: seg.n_samples(),
        });
    }
    let rows = seg
        .data
        .rows()
        .into_iter()
        .map(|r| resampler.process(&row_f64(r)))
        .collect();
    let report = FilterReport {
        kind: FilterKind::Resample,
        order: resample::TAPS_PER_PHASE,
        cutoffs_hz: vec![seg.sample_rate_hz, target_hz],
        q: None,
        group_delay: "linear-phase, delay compensated".to_string(),
        note: Some(format!(
            "polyphase {}/{} with Kaiser window (beta = {})",
            ratio.up,
            ratio.down,
            resample::KAISER_BETA
        )),
    };
    Ok(seg.with_rows(rows, target_hz, report))
}

/// Welch band power in `[lo_hz, hi_hz)`, averaged across channels (µV²).
pub fn band_power(seg: &Segment, lo_hz: f64, hi_hz: f64) -> Result<f64, SpectralError> {
    let fs = seg.sample_rate_hz;
    if hi_hz >= fs / 2.0 || lo_hz < 0.0 || lo_hz >= hi_hz {
        return Err(SpectralError::BandAboveNyquist {
            lo_hz,
            hi_hz,
            nyquist_hz: fs / 2.0,
        });
    }
    let nperseg = fs.round() as usize;
    let needed = (2.0 * fs).ceil() as usize;
    if seg.n_samples() < needed || seg.n_channels() == 0 {
        return Err(SpectralError::SegmentTooShort {
            needed,
            got: seg.n_samples(),
        });
    }
    let welch = Welch::new(nperseg, fs);
    let total: f64 = (0..seg.n_channels())
        .map(|c| {
            let psd = welch.psd(&seg.channel_f64(c)).expect("length checked");
            welch.band_power(&psd, lo_hz, hi_hz)
        })
        .sum();
    Ok(total / seg.n_channels() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::BandName;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    const FS: f64 = 512.0;

    fn sine_segment(freq: f64, amp: f64, seconds: f64, fs: f64) -> Segment {
        let n = (seconds * fs) as usize;
        let data = Array2::from_shape_fn((1, n), |(_, i)| (amp * (2.0 * PI * freq * i as f64 / fs).sin()) as f32);
        Segment::new(data, 0, fs)
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// Peak amplitude over the central half, away from edge transients.
    fn central_peak(seg: &Segment) -> f64 {
        let n = seg.n_samples();
        seg.data
            .row(0)
            .iter()
            .skip(n / 4)
            .take(n / 2)
            .fold(0.0f64, |m, &v| m.max(f64::from(v).abs()))
    }

    #[test]
    fn highpass_rejects_dc() {
        let seg = Segment::new(Array2::from_elem((2, 5120), 100.0), 0, FS);
        let out = highpass_1hz(&seg).unwrap();
        let max = out.data.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(max < 1.0, "{max}");
        assert_eq!(out.data.dim(), (2, 5120));
        assert_eq!(out.provenance.len(), 1);
    }

    #[test]
    fn highpass_passband_and_stopband() {
        // Oracle: forward-backward gain |H(10 Hz)|^2 and |H(0.1 Hz)|^2.
        let sos = Sos::butter_highpass(BUTTERWORTH_ORDER, 1.0, FS);
        assert!((sos.zero_phase_gain(10.0, FS) - 1.0).abs() < 0.05);
        assert!(sos.zero_phase_gain(0.1, FS) < 0.01);

        let pass = highpass_1hz(&sine_segment(10.0, 1.0, 10.0, FS)).unwrap();
        assert!((central_peak(&pass) - 1.0).abs() < 0.05);
        let stop = highpass_1hz(&sine_segment(0.1, 1.0, 60.0, FS)).unwrap();
        assert!(central_peak(&stop) < 0.01, "{}", central_peak(&stop));
    }

    #[test]
    fn highpass_needs_padding_room() {
        let seg = Segment::new(Array2::zeros((1, 24)), 0, FS);
        assert!(matches!(
            highpass_1hz(&seg),
            Err(SpectralError::SegmentTooShort { needed: 25, got: 24 })
        ));
        let seg = Segment::new(Array2::zeros((1, 25)), 0, FS);
        assert!(highpass_1hz(&seg).is_ok());
    }

    #[test]
    fn notch_removes_line() {
        let line = notch_line(&sine_segment(60.0, 1.0, 10.0, FS), &[60.0, 120.0, 180.0]).unwrap();
        let n = line.n_samples();
        let rms = |s: &Segment| {
            let v: Vec<f64> = s.channel_f64(0)[n / 4..3 * n / 4].to_vec();
            (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
        };
        let input_rms = 1.0 / 2f64.sqrt();
        assert!(rms(&line) < 0.03 * input_rms, "{}", rms(&line));

        let ten = notch_line(&sine_segment(10.0, 1.0, 10.0, FS), &[60.0, 120.0, 180.0]).unwrap();
        assert!((central_peak(&ten) - 1.0).abs() < 0.01);
    }

    #[test]
    fn notch_transfer_function() {
        let sos = Sos::cascade([60.0, 120.0, 180.0].map(|f| Sos::notch(f, NOTCH_Q, FS)));
        for f in [60.0, 120.0, 180.0] {
            assert!(sos.zero_phase_gain(f, FS) < 1e-3, "≥ 30 dB at {f}");
            // Flat to within 1 dB once 1.5 f / Q away from the center.
            let edge = (1.5 * f / NOTCH_Q).max(2.0);
            for df in [edge, edge + 1.0, edge + 5.0] {
                for g in [f - df, f + df] {
                    let db = 10.0 * sos.zero_phase_gain(g, FS).log10();
                    assert!(db > -1.0, "{g} Hz: {db} dB");
                }
            }
        }
        assert!((sos.zero_phase_gain(10.0, FS) - 1.0).abs() < 0.01);
    }

    #[test]
    fn notch_rejects_above_nyquist_and_empty_is_identity() {
        let seg = sine_segment(10.0, 1.0, 1.0, 300.0);
        assert!(matches!(
            notch_line(&seg, &[60.0, 180.0]),
            Err(SpectralError::FrequencyAboveNyquist { freq_hz, .. }) if freq_hz == 180.0
        ));
        assert_eq!(notch_line(&seg, &[]).unwrap(), seg);
    }

    #[test]
    fn alpha_bandpass_response() {
        let alpha = BandName::Alpha.spec();
        let f = BandpassFilter::new(alpha, FS).unwrap();
        assert!((f.sos().zero_phase_gain(11.0, FS) - 1.0).abs() < 0.1);
        assert!(f.sos().zero_phase_gain(40.0, FS) < 0.05);

        let pass = bandpass_segment(&sine_segment(11.0, 1.0, 10.0, FS), alpha).unwrap();
        assert!((central_peak(&pass) - 1.0).abs() < 0.1);
        let stop = bandpass_segment(&sine_segment(40.0, 1.0, 10.0, FS), alpha).unwrap();
        assert!(central_peak(&stop) < 0.05);

        let zeros = bandpass(Array2::zeros((3, 512)).view(), alpha, FS).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bandpass_validates() {
        assert!(matches!(
            BandpassFilter::new(BandName::Hfo.spec(), 256.0),
            Err(SpectralError::BandAboveNyquist { .. })
        ));
        let f = BandpassFilter::new(BandName::Alpha.spec(), FS).unwrap();
        assert!(matches!(
            f.apply(&[0.0; 10]),
            Err(SpectralError::SegmentTooShort { .. })
        ));
    }

    #[test]
    fn zero_phase_peak_lag_is_zero() {
        let alpha = BandpassFilter::new(BandName::Alpha.spec(), FS).unwrap();
        let x = alpha.apply(&noise(4096, 3)).unwrap();
        let y = alpha.apply(&x).unwrap();
        let xcorr = |lag: i64| -> f64 {
            (0..x.len() as i64)
                .filter_map(|i| {
                    let j = i + lag;
                    (j >= 0 && j < y.len() as i64).then(|| x[i as usize] * y[j as usize])
                })
                .sum()
        };
        let best = (-20..=20).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn resample_identity_and_lengths() {
        let seg = sine_segment(20.0, 1.0, 2.0, FS);
        assert_eq!(resample_to(&seg, 512.0).unwrap(), seg);

        let seg500 = Segment::new(Array2::zeros((1, 500)), 42, 500.0);
        let out = resample_to(&seg500, 512.0).unwrap();
        assert_eq!(out.n_samples(), 512);
        assert_eq!(out.start_time_us, 42);
        assert_eq!(out.sample_rate_hz, 512.0);

        assert!(matches!(
            resample_to(&seg, 512.0 * std::f64::consts::E),
            Err(SpectralError::IrrationalRatio { .. })
        ));
    }

    #[test]
    fn downsample_matches_analytic_sinusoid() {
        let seg = sine_segment(20.0, 1.0, 4.0, 1024.0);
        let out = resample_to(&seg, 512.0).unwrap();
        assert_eq!(out.n_samples(), seg.n_samples() / 2);
        let y = out.channel_f64(0);
        let max_err = (0..y.len())
            .map(|m| (y[m] - (2.0 * PI * 20.0 * m as f64 / 512.0).sin()).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 0.02, "{max_err}");
    }

    #[test]
    fn resample_round_trip() {
        let alpha = BandpassFilter::new(BandName::BetaLow.spec(), FS).unwrap();
        let x = alpha.apply(&noise(8192, 9)).unwrap();
        let data = Array2::from_shape_fn((1, x.len()), |(_, i)| x[i] as f32);
        let seg = Segment::new(data, 0, FS);
        let up = resample_to(&seg, 1024.0).unwrap();
        let back = resample_to(&up, 512.0).unwrap();
        assert_eq!(back.n_samples(), seg.n_samples());
        let (orig, rt) = (seg.channel_f64(0), back.channel_f64(0));
        let err: f64 = orig.iter().zip(&rt).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let energy: f64 = orig.iter().map(|a| a * a).sum();
        assert!((err / energy).sqrt() < 0.02, "{}", (err / energy).sqrt());
    }

    #[test]
    fn band_power_of_sinusoid() {
        let a = 3.0;
        let seg = sine_segment(50.0, a, 10.0, FS);
        let inside = band_power(&seg, 45.0, 55.0).unwrap();
        assert!((inside - a * a / 2.0).abs() < 0.1 * a * a / 2.0, "{inside}");
        let outside = band_power(&seg, 55.0, 65.0).unwrap();
        assert!(outside < 0.05 * inside);
    }

    #[test]
    fn band_power_flat_for_white_noise() {
        let x = noise(512 * 60, 11);
        let data = Array2::from_shape_fn((1, x.len()), |(_, i)| x[i] as f32);
        let seg = Segment::new(data, 0, FS);
        let lo = band_power(&seg, 45.0, 55.0).unwrap();
        let hi = band_power(&seg, 55.0, 65.0).unwrap();
        assert!((lo / hi - 1.0).abs() < 0.15, "{lo} {hi}");
        // Additive over adjacent bands.
        let both = band_power(&seg, 45.0, 65.0).unwrap();
        assert!((both - lo - hi).abs() < 1e-9 * both);
        let zero = Segment::new(Array2::zeros((2, 2048)), 0, FS);
        assert_eq!(band_power(&zero, 45.0, 55.0).unwrap(), 0.0);
        assert!(band_power(&Segment::new(Array2::zeros((1, 1000)), 0, FS), 45.0, 55.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn filters_are_linear(seed in 0u64..1000, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let x = noise(1024, seed);
            let y = noise(1024, seed + 1);
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let filters = [
                Sos::butter_highpass(4, 1.0, FS),
                Sos::butter_bandpass(4, 8.0, 15.0, FS),
                Sos::cascade([60.0, 120.0].map(|f| Sos::notch(f, NOTCH_Q, FS))),
            ];
            for sos in &filters {
                let fx = sos.filtfilt(&x);
                let fy = sos.filtfilt(&y);
                let fc = sos.filtfilt(&combo);
                let scale = fc.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
                for i in 0..fc.len() {
                    prop_assert!((fc[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-9 * scale);
                }
            }
        }
    }
}
