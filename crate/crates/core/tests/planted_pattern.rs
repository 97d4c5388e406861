//! End-to-end through the library: synthesize, label, sample, train and
//! search, checking the spatial filter against the planted source.

use cspwave_core::band::BandName;
use cspwave_core::csp::{train_all_bands, CspConfig};
use cspwave_core::evaluate::{auc_threshold_classifier, BandEnergies};
use cspwave_core::recording::{load_recording, read_annotations, write_annotations, write_recording};
use cspwave_core::search::waveform_search;
use cspwave_core::synth::{generate_synthetic, PlantedSource, SegmentLayout, SeizureSpec, SyntheticSpec};
use cspwave_core::windowing::{label_intervals, SamplingPlan, SegmentGrid, SetCounts};
use cspwave_core::Condition;

const FS: f64 = 512.0;

fn spec(mixing: Vec<f64>) -> SyntheticSpec {
    SyntheticSpec {
        recording_id: "pattern".into(),
        n_channels: mixing.len(),
        duration_s: 19_200.0,
        sample_rate_hz: FS,
        segments: vec![
            SegmentLayout {
                start_s: 3000.0,
                duration_s: 700.0,
            },
            SegmentLayout {
                start_s: 18_500.0,
                duration_s: 700.0,
            },
        ],
        seizures: vec![SeizureSpec {
            eec_s: 4000.0,
            end_s: 4060.0,
        }],
        planted_sources: vec![PlantedSource {
            band: BandName::Alpha,
            mixing_vector: mixing,
            condition_gain: [12.0, 6.0],
            bursts: vec![],
        }],
        noise_std_uv: 20.0,
        rng_seed: 5,
    }
}

#[test]
fn isotropic_noise_recovers_the_mixing_direction() {
    // Sensor noise dominates off the source direction; with little noise
    // there the quotient is nearly flat and w1 is poorly determined.
    let a = vec![0.5, -0.5, 0.5, 0.5, 0.0, 0.0];
    let rec = generate_synthetic(&spec(a.clone())).unwrap();

    // Round trip through the on-disk format first.
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_recording(&rec.manifest, &rec.segments, dir.path()).unwrap();
    write_annotations(&dir.path().join("annotations.csv"), &rec.annotations).unwrap();
    let (loaded_manifest, segments) = load_recording(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(loaded_manifest, manifest);
    assert_eq!(segments.len(), 2);
    assert_eq!(segments[0].data, rec.segments[0].data);
    let annotations = read_annotations(&dir.path().join("annotations.csv")).unwrap();
    assert_eq!(annotations, rec.annotations);

    let recorded: Vec<_> = segments.iter().map(|s| s.span()).collect();
    let (pre, inter) = label_intervals(&annotations, &recorded).unwrap();
    let grids: Vec<SegmentGrid> = segments.iter().map(SegmentGrid::from).collect();
    let counts = SetCounts {
        train: [400, 400],
        test: [100, 100],
    };
    let plan = SamplingPlan::new(&pre, &inter, &grids, counts, 512, 3).unwrap();
    assert!(plan.shortfalls.is_empty(), "{:?}", plan.shortfalls);
    let sets = plan.extract(&segments);

    let alpha = BandName::Alpha.spec();
    let trained = train_all_bands(&sets.train, &[alpha], FS, &CspConfig::default()).unwrap();
    let pair = &trained[0].filters;
    let align: f64 = pair.w1.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>().abs();
    assert!(align > 0.9, "|<w1, a>| = {align}, w1 = {:?}", pair.w1);
    assert!(pair.lambda1 > 0.7 && pair.lambda1 <= 1.0, "lambda1 {}", pair.lambda1);

    let results = [
        waveform_search(&sets.test[0], Condition::Preictal, pair, FS, 5).unwrap(),
        waveform_search(&sets.test[1], Condition::Interictal, pair, FS, 5).unwrap(),
    ];
    let energies = BandEnergies::from_search(&results).unwrap();
    let score = auc_threshold_classifier(alpha, 1, &energies.for_filter(1)).unwrap();
    assert!(score.auc > 0.9, "AUC {}", score.auc);
    assert_eq!(results[0].set(1, 1).waveforms.len(), 5);
}
