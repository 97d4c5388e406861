//! Second-order-section IIR filters: Butterworth and notch design, plus
//! zero-phase forward-backward application.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

/// One biquad, `b0 + b1 z^-1 + b2 z^-2 / 1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Gain at DC, `H(1)`.
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Steady-state transposed direct-form II state for a unit step.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z1 = self.b[2] - self.a[1] * g;
        let z0 = self.b[1] - self.a[0] * g + z1;
        [z0, z1]
    }

    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }
}

/// A cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
    /// Number of poles of the cascade.
    pub order: usize,
}

impl Sos {
    /// Butterworth high-pass of the given order.
    pub fn butter_highpass(order: usize, cutoff_hz: f64, fs: f64) -> Sos {
        let fs2 = 2.0 * fs;
        let wc = prewarp(cutoff_hz, fs);
        let proto = butter_prototype(order);
        let poles: Vec<Complex64> = proto.iter().map(|p| wc / p).collect();
        let zeros = vec![Complex64::new(0.0, 0.0); order];
        let prod_neg_p = poles_product(&proto, |p| -p);
        let k = (1.0 / prod_neg_p).re;
        bilinear(&zeros, &poles, k, fs2)
    }

    /// Butterworth band-pass built from an order-`order` low-pass
    /// prototype; the resulting cascade has `2 * order` poles.
    pub fn butter_bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Sos {
        let fs2 = 2.0 * fs;
        let w1 = prewarp(lo_hz, fs);
        let w2 = prewarp(hi_hz, fs);
        let bw = w2 - w1;
        let wo2 = w1 * w2;
        let mut poles = Vec::with_capacity(2 * order);
        for p in butter_prototype(order) {
            let pl = p * (bw / 2.0);
            let disc = (pl * pl - wo2).sqrt();
            poles.push(pl + disc);
            poles.push(pl - disc);
        }
        let zeros = vec![Complex64::new(0.0, 0.0); order];
        let k = bw.powi(order as i32);
        bilinear(&zeros, &poles, k, fs2)
    }

    /// Second-order notch with quality factor `q`.
    pub fn notch(freq_hz: f64, q: f64, fs: f64) -> Sos {
        let w0 = 2.0 * PI * freq_hz / fs;
        let bw = w0 / q;
        let gain = 1.0 / (1.0 + (bw / 2.0).tan());
        let c = w0.cos();
        Sos {
            sections: vec![Biquad {
                b: [gain, -2.0 * gain * c, gain],
                a: [-2.0 * gain * c, 2.0 * gain - 1.0],
            }],
            order: 2,
        }
    }

    pub fn cascade(filters: impl IntoIterator<Item = Sos>) -> Sos {
        let mut out = Sos {
            sections: Vec::new(),
            order: 0,
        };
        for f in filters {
            out.sections.extend(f.sections);
            out.order += f.order;
        }
        out
    }

    /// Single-pass complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz / fs;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }

    /// Magnitude of the forward-backward response, `|H|^2`.
    pub fn zero_phase_gain(&self, freq_hz: f64, fs: f64) -> f64 {
        self.response(freq_hz, fs).norm_sqr()
    }

    /// Reflection length on each side for [`Sos::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }

    /// Shortest input [`Sos::filtfilt`] accepts.
    pub fn min_len(&self) -> usize {
        2 * self.pad_len() + 1
    }

    /// Causal filtering in place, starting from `state` per section.
    fn filter_in_place(&self, x: &mut [f64], mut state: Vec<[f64; 2]>) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let (mut z0, mut z1) = (z[0], z[1]);
            for v in x.iter_mut() {
                let xi = *v;
                let y = b0 * xi + z0;
                z0 = b1 * xi - a1 * y + z1;
                z1 = b2 * xi - a2 * y;
                *v = y;
            }
        }
    }

    /// Steady-state initial conditions for a unit step through the cascade.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [z0, z1] = s.step_state();
                let out = [z0 * scale, z1 * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Zero-phase forward-backward filtering with odd reflection padding of
    /// [`Sos::pad_len`] samples and step-matched initial conditions.
    ///
    /// The caller checks `x.len() >= self.min_len()`.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let pad = self.pad_len();
        debug_assert!(n > pad, "input shorter than padding");
        if self.sections.is_empty() {
            return x.to_vec();
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.step_states();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let x0 = ext[0];
        self.filter_in_place(&mut ext, scaled(x0));
        ext.reverse();
        let y0 = ext[0];
        self.filter_in_place(&mut ext, scaled(y0));
        ext.reverse();
        ext.drain(..pad);
        ext.truncate(n);
        ext
    }
}

fn prewarp(f_hz: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f_hz / fs).tan()
}

/// Analog Butterworth low-pass prototype poles (unit cutoff).
fn butter_prototype(order: usize) -> Vec<Complex64> {
    let n = order as f64;
    (0..order)
        .map(|i| {
            let m = -n + 1.0 + 2.0 * i as f64;
            -Complex64::from_polar(1.0, PI * m / (2.0 * n))
        })
        .collect()
}

fn poles_product(poles: &[Complex64], f: impl Fn(Complex64) -> Complex64) -> Complex64 {
    poles.iter().fold(Complex64::new(1.0, 0.0), |acc, &p| acc * f(p))
}

/// Bilinear transform of an analog zpk system and grouping into biquads.
fn bilinear(zeros: &[Complex64], poles: &[Complex64], k: f64, fs2: f64) -> Sos {
    let num = poles_product(zeros, |z| fs2 - z);
    let den = poles_product(poles, |p| fs2 - p);
    let kz = k * (num / den).re;
    let mut zd: Vec<f64> = zeros.iter().map(|&z| ((fs2 + z) / (fs2 - z)).re).collect();
    zd.extend(std::iter::repeat_n(-1.0, poles.len() - zeros.len()));
    let pd: Vec<Complex64> = poles.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();
    to_sections(zd, pd, kz)
}

fn to_sections(mut zeros: Vec<f64>, poles: Vec<Complex64>, gain: f64) -> Sos {
    let order = poles.len();
    let tol = 1e-10;
    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= tol).map(|p| p.re).collect();
    // Poles closest to the unit circle go last.
    upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut pole_pairs: Vec<[f64; 2]> = upper.iter().map(|p| [-2.0 * p.re, p.norm_sqr()]).collect();
    for pair in real.chunks(2) {
        match *pair {
            [p1, p2] => pole_pairs.push([-(p1 + p2), p1 * p2]),
            [p] => pole_pairs.push([-p, 0.0]),
            _ => unreachable!(),
        }
    }

    // Pair the smallest remaining zero with the largest.
    zeros.sort_by(f64::total_cmp);
    let mut zero_pairs = Vec::new();
    while !zeros.is_empty() {
        let lo = zeros.remove(0);
        match zeros.pop() {
            Some(hi) => zero_pairs.push([1.0, -(lo + hi), lo * hi]),
            None => zero_pairs.push([1.0, -lo, 0.0]),
        }
    }

    let n = pole_pairs.len().max(zero_pairs.len());
    let per_section = gain.abs().powf(1.0 / n as f64);
    let sections = (0..n)
        .map(|i| {
            let mut b = zero_pairs.get(i).copied().unwrap_or([1.0, 0.0, 0.0]);
            let a = pole_pairs.get(i).copied().unwrap_or([0.0, 0.0]);
            let mut g = per_section;
            if i == 0 && gain < 0.0 {
                g = -g;
            }
            b.iter_mut().for_each(|v| *v *= g);
            Biquad { b, a }
        })
        .collect();
    Sos { sections, order }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analog Butterworth magnitude squared at the prewarped frequency,
    /// an independent route to the digital design's response.
    fn analog_highpass_gain(order: usize, f: f64, fc: f64, fs: f64) -> f64 {
        let r = prewarp(f, fs) / prewarp(fc, fs);
        let mag2 = 1.0 / (1.0 + r.powi(-2 * order as i32));
        mag2.sqrt()
    }

    fn analog_bandpass_gain(order: usize, f: f64, lo: f64, hi: f64, fs: f64) -> f64 {
        let w = prewarp(f, fs);
        let (w1, w2) = (prewarp(lo, fs), prewarp(hi, fs));
        let lp = (w * w - w1 * w2) / (w * (w2 - w1));
        (1.0 / (1.0 + lp.abs().powi(2 * order as i32))).sqrt()
    }

    #[test]
    fn highpass_matches_analog_prototype() {
        let sos = Sos::butter_highpass(4, 1.0, 512.0);
        assert_eq!(sos.sections.len(), 2);
        for f in [0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
            let digital = sos.response(f, 512.0).norm();
            let analog = analog_highpass_gain(4, f, 1.0, 512.0);
            assert!((digital - analog).abs() < 1e-9, "f={f}: {digital} vs {analog}");
        }
    }

    #[test]
    fn bandpass_matches_analog_prototype() {
        let sos = Sos::butter_bandpass(4, 8.0, 15.0, 512.0);
        assert_eq!(sos.sections.len(), 4);
        assert_eq!(sos.order, 8);
        for f in [2.0, 8.0, 11.0, 15.0, 40.0, 200.0] {
            let digital = sos.response(f, 512.0).norm();
            let analog = analog_bandpass_gain(4, f, 8.0, 15.0, 512.0);
            assert!((digital - analog).abs() < 1e-8, "f={f}: {digital} vs {analog}");
        }
    }

    #[test]
    fn notch_nulls_center() {
        let sos = Sos::notch(60.0, 35.0, 512.0);
        assert!(sos.response(60.0, 512.0).norm() < 1e-12);
        assert!((sos.response(0.0, 512.0).norm() - 1.0).abs() < 1e-12);
        assert!((sos.response(256.0, 512.0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steady_state_start_removes_step_transient() {
        let sos = Sos::butter_bandpass(4, 8.0, 15.0, 512.0);
        let x = vec![3.0; 400];
        let y = sos.filtfilt(&x);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn empty_cascade_is_identity() {
        let sos = Sos::cascade(Vec::new());
        let x = [1.0, 2.0, 3.0];
        assert_eq!(sos.filtfilt(&x), x.to_vec());
    }
}
