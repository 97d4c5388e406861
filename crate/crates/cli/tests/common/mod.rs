//! Synthetic recordings shared by the integration tests.

#![allow(dead_code)]

use std::path::Path;

use cspwave::{PathsConfig, RunConfig};
use cspwave_core::band::BandName;
use cspwave_core::synth::{PlantedSource, SegmentLayout, SeizureSpec, SyntheticSpec};

pub const FS: f64 = 512.0;
pub const EEC_S: f64 = 4000.0;
/// First second clear of the seizure's four-hour guard.
pub const INTERICTAL_START_S: f64 = 18_500.0;
/// The preictal hour before `EEC_S` ends here.
pub const PREICTAL_END_S: f64 = 3700.0;

pub fn unit_mixing(n_channels: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_channels)
        .map(|c| if c % 2 == 0 { 1.0 } else { -0.6 } / (1.0 + 0.5 * c as f64))
        .collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

/// One seizure at `EEC_S`. A segment covers the last `preictal_s` seconds
/// of its preictal hour and another `interictal_s` seconds of interictal
/// time. An alpha source has four times the variance before the seizure.
pub fn one_seizure_spec(n_channels: usize, preictal_s: f64, interictal_s: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        recording_id: "fixture".into(),
        n_channels,
        duration_s: INTERICTAL_START_S + interictal_s,
        sample_rate_hz: FS,
        segments: vec![
            SegmentLayout {
                start_s: PREICTAL_END_S - preictal_s,
                duration_s: preictal_s,
            },
            SegmentLayout {
                start_s: INTERICTAL_START_S,
                duration_s: interictal_s,
            },
        ],
        seizures: vec![SeizureSpec {
            eec_s: EEC_S,
            end_s: EEC_S + 60.0,
        }],
        planted_sources: vec![PlantedSource {
            band: BandName::Alpha,
            mixing_vector: unit_mixing(n_channels),
            condition_gain: [20.0, 10.0],
            bursts: vec![],
        }],
        noise_std_uv: 5.0,
        rng_seed: seed,
    }
}

pub fn config_in(root: &Path, spec: SyntheticSpec) -> RunConfig {
    let mut cfg = RunConfig::new(PathsConfig {
        recording_dir: root.join("recording"),
        annotations: root.join("annotations.csv"),
        output_dir: root.join("out"),
    });
    cfg.synth = Some(spec);
    cfg
}

/// Every regular file under `dir`, by name.
pub fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
