//! Synthetic recordings with planted spatial sources.
//!
//! Each channel carries white Gaussian background noise. Each planted source
//! is unit-variance band-limited noise whose amplitude follows the condition
//! of the moment (preictal or not) and optional bursts, mixed into the
//! channels through a unit-norm mixing vector.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::band::BandName;
use crate::recording::{IngestError, RecordingManifest, Segment, SeizureAnnotation};
use crate::spectral::BandpassFilter;
use crate::time::{seconds_to_us, Span};
use crate::windowing::{PREICTAL_END_BEFORE_EEC_US, PREICTAL_START_BEFORE_EEC_US};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLayout {
    pub start_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeizureSpec {
    pub eec_s: f64,
    pub end_s: f64,
}

/// Extra amplitude gain over `[center_s - width_s / 2, center_s + width_s / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub center_s: f64,
    pub width_s: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSource {
    pub band: BandName,
    pub mixing_vector: Vec<f64>,
    /// Amplitude gain while preictal, and everywhere else.
    pub condition_gain: [f64; 2],
    #[serde(default)]
    pub bursts: Vec<Burst>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "default_recording_id")]
    pub recording_id: String,
    pub n_channels: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Gap-free stretches to emit; empty means one segment over the whole
    /// duration.
    #[serde(default)]
    pub segments: Vec<SegmentLayout>,
    #[serde(default)]
    pub seizures: Vec<SeizureSpec>,
    #[serde(default)]
    pub planted_sources: Vec<PlantedSource>,
    pub noise_std_uv: f64,
    pub rng_seed: u64,
}

fn default_recording_id() -> String {
    "synth".to_string()
}

#[derive(Debug, Clone)]
pub struct SyntheticRecording {
    pub manifest: RecordingManifest,
    pub segments: Vec<Segment>,
    pub annotations: Vec<SeizureAnnotation>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        let invalid = |m: String| Err(IngestError::InvalidSpec(m));
        if self.n_channels == 0 {
            return invalid("n_channels must be at least 1".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return invalid("duration_s must be positive".into());
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return invalid("sample_rate_hz must be positive".into());
        }
        if !(self.noise_std_uv >= 0.0 && self.noise_std_uv.is_finite()) {
            return invalid("noise_std_uv must be non-negative".into());
        }
        if self.recording_id.is_empty() {
            return invalid("recording_id must not be empty".into());
        }
        let mut prev_end = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.start_s < prev_end || s.duration_s <= 0.0 || s.start_s + s.duration_s > self.duration_s + 1e-9 {
                return invalid(format!(
                    "segments[{i}] must be sorted, disjoint, non-empty and inside [0, duration_s]"
                ));
            }
            prev_end = s.start_s + s.duration_s;
        }
        let mut prev_end = f64::NEG_INFINITY;
        for (i, z) in self.seizures.iter().enumerate() {
            if z.eec_s >= z.end_s || z.eec_s < prev_end {
                return invalid(format!("seizures[{i}] must satisfy eec_s < end_s and be sorted"));
            }
            prev_end = z.end_s;
        }
        for (i, src) in self.planted_sources.iter().enumerate() {
            if src.mixing_vector.len() != self.n_channels {
                return invalid(format!(
                    "planted_sources[{i}].mixing_vector has {} entries, expected {}",
                    src.mixing_vector.len(),
                    self.n_channels
                ));
            }
            let norm = src.mixing_vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return invalid(format!(
                    "planted_sources[{i}].mixing_vector must be unit-norm (norm {norm})"
                ));
            }
            if src.condition_gain.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
                return invalid(format!("planted_sources[{i}].condition_gain must be non-negative"));
            }
            if !src.band.spec().fits(self.sample_rate_hz) {
                return invalid(format!(
                    "planted_sources[{i}].band {} does not fit below Nyquist",
                    src.band
                ));
            }
            if src.bursts.iter().any(|b| !(b.width_s > 0.0 && b.gain >= 0.0)) {
                return invalid(format!("planted_sources[{i}].bursts need width_s > 0 and gain >= 0"));
            }
        }
        Ok(())
    }

    fn layout(&self) -> Vec<SegmentLayout> {
        if self.segments.is_empty() {
            vec![SegmentLayout {
                start_s: 0.0,
                duration_s: self.duration_s,
            }]
        } else {
            self.segments.clone()
        }
    }

    pub fn annotations(&self) -> Vec<SeizureAnnotation> {
        self.seizures
            .iter()
            .map(|z| SeizureAnnotation {
                eec_us: seconds_to_us(z.eec_s),
                end_us: seconds_to_us(z.end_s),
            })
            .collect()
    }

    /// Preictal spans the generator uses to pick condition gains.
    pub fn preictal_spans(&self) -> Vec<Span> {
        self.annotations()
            .iter()
            .map(|a| {
                Span::new(
                    a.eec_us - PREICTAL_START_BEFORE_EEC_US,
                    a.eec_us - PREICTAL_END_BEFORE_EEC_US,
                )
            })
            .collect()
    }
}

/// Deterministic in `spec`: identical specs give bit-identical output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticRecording, IngestError> {
    spec.validate()?;
    let fs = spec.sample_rate_hz;
    let labels = (0..spec.n_channels).map(|c| format!("ch{c:03}")).collect();
    let manifest = RecordingManifest::new(spec.recording_id.clone(), fs, labels);
    let preictal = spec.preictal_spans();
    let filters = spec
        .planted_sources
        .iter()
        .map(|s| BandpassFilter::new(s.band.spec(), fs).map_err(|e| IngestError::InvalidSpec(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut segments = Vec::new();
    for (index, lay) in spec.layout().iter().enumerate() {
        let n = (lay.duration_s * fs).round() as usize;
        if n == 0 {
            return Err(IngestError::InvalidSpec(format!("segments[{index}] has no samples")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        rng.set_stream(index as u64);
        let mut data = Array2::<f32>::zeros((spec.n_channels, n));
        for mut row in data.rows_mut() {
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = (z * spec.noise_std_uv) as f32;
            }
        }
        let mut seg = Segment::new(data, seconds_to_us(lay.start_s), fs);

        for (src, filter) in spec.planted_sources.iter().zip(&filters) {
            let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            if n < filter.min_len() {
                return Err(IngestError::InvalidSpec(format!(
                    "segments[{index}] is too short to band-limit a {} source",
                    src.band
                )));
            }
            let mut s = filter.apply(&white).expect("length checked");
            let std = (s.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            if std > 0.0 {
                s.iter_mut().for_each(|v| *v /= std);
            }
            let bursts: Vec<(Span, f64)> = src
                .bursts
                .iter()
                .map(|b| {
                    let half = b.width_s / 2.0;
                    (
                        Span::new(seconds_to_us(b.center_s - half), seconds_to_us(b.center_s + half)),
                        b.gain,
                    )
                })
                .collect();
            for (i, v) in s.iter_mut().enumerate() {
                let t = seg.time_of(i);
                let in_preictal = preictal.iter().any(|p| p.start_us <= t && t < p.end_us);
                let mut g = src.condition_gain[if in_preictal { 0 } else { 1 }];
                for (span, bg) in &bursts {
                    if span.start_us <= t && t < span.end_us {
                        g *= bg;
                    }
                }
                *v *= g;
            }
            for (mut row, &a) in seg.data.rows_mut().into_iter().zip(&src.mixing_vector) {
                if a == 0.0 {
                    continue;
                }
                row.iter_mut()
                    .zip(&s)
                    .for_each(|(x, v)| *x = (f64::from(*x) + a * v) as f32);
            }
        }
        segments.push(seg);
    }
    Ok(SyntheticRecording {
        manifest,
        segments,
        annotations: spec.annotations(),
    })
}
