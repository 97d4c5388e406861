//! Discriminative waveform discovery for long multichannel electrophysiology
//! recordings.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! ```text
//! recording / synth   manifest + f32 segments, synthetic generator
//!   -> preprocess     artifact rejection, 1 Hz high-pass, notches, resample to 512 Hz
//!   -> windowing      preictal / interictal intervals, 80/20 split, window sampling
//!   -> csp            per-band covariances and the spatial filter pair (w1, w2)
//!   -> search         energy-guided top-k waveform search
//!   -> evaluate       energy-threshold AUC and log-energy summaries
//! ```

pub mod band;
pub mod csp;
pub mod evaluate;
pub mod linalg;
pub mod preprocess;
pub mod recording;
pub mod search;
pub mod spectral;
pub mod synth;
pub mod time;
pub mod windowing;

pub use band::{BandName, BandSpec};
pub use csp::{CovarianceMatrix, CspConfig, SpatialFilterPair};
pub use evaluate::{AucScore, EnergyDistribution, EvaluationCell};
pub use preprocess::{PreprocessConfig, RejectionLog, Rule};
pub use recording::{RecordingManifest, Segment, SeizureAnnotation};
pub use search::{CspSignal, TopKIndexSet, WaveformSet};
pub use time::Span;
pub use windowing::{Condition, LabeledWindow, ShortfallReport, Split};
