//! Stage orchestration for `preprocess` and `run`, and the report files they
//! produce.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use cspwave_core::band::BandSpec;
use cspwave_core::csp::{train_all_bands, CspConfig, SpatialFilterPair, TrainedBand};
use cspwave_core::evaluate::{evaluate_all, evaluation_csv, evaluation_json, BandEnergies, EvaluationCell, LOG_FLOOR};
use cspwave_core::preprocess::{run_pipeline, Rule};
use cspwave_core::recording::{RecordingManifest, Segment, SeizureAnnotation};
use cspwave_core::search::{energies_csv, waveform_search, SearchResult};
use cspwave_core::spectral::FilterReport;
use cspwave_core::time::total_len_us;
use cspwave_core::windowing::{
    label_intervals, Condition, SamplingPlan, SegmentGrid, SetCounts, ShortfallReport, Split,
};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::config::RunConfig;
use crate::error::CliError;

/// Wall-clock time per stage, in execution order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings(pub Vec<StageTiming>);

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.0.push(StageTiming {
            stage: stage.to_string(),
            ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RejectionSummary {
    pub input_segments: usize,
    pub output_segments: usize,
    pub input_us: i64,
    pub retained_us: i64,
    pub rejected_us: i64,
    pub counts: BTreeMap<&'static str, usize>,
    pub filters: Vec<FilterReport>,
}

/// Data ready for labeling, with a printable id per segment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub segments: Vec<Segment>,
    pub segment_ids: Vec<String>,
    pub sample_rate_hz: f64,
    pub rejections: Option<RejectionSummary>,
    pub rejections_csv: Option<String>,
}

/// Applies artifact rejection, or passes segments through when disabled.
pub fn prepare(
    cfg: &RunConfig,
    manifest: &RecordingManifest,
    raw: Vec<Segment>,
    preprocess: bool,
) -> Result<Prepared, CliError> {
    if !preprocess {
        let ids = (0..raw.len()).map(|i| i.to_string()).collect();
        return Ok(Prepared {
            segments: raw,
            segment_ids: ids,
            sample_rate_hz: manifest.sample_rate_hz,
            rejections: None,
            rejections_csv: None,
        });
    }
    let out = run_pipeline(&raw, &cfg.preprocess).map_err(|e| CliError::stage("preprocess", e))?;
    let counts = Rule::ALL.iter().map(|&r| (r.as_str(), out.log.count(r))).collect();
    let summary = RejectionSummary {
        input_segments: raw.len(),
        output_segments: out.segments.len(),
        input_us: raw.iter().map(Segment::duration_us).sum(),
        retained_us: out.retained_us(),
        rejected_us: out.log.rejected_us(),
        counts,
        filters: out.filters.clone(),
    };
    let csv = out.log.to_csv();
    let (ids, segments) = out.segments.into_iter().map(|c| (c.id.to_string(), c.segment)).unzip();
    Ok(Prepared {
        segments,
        segment_ids: ids,
        sample_rate_hz: cfg.preprocess.target_rate_hz,
        rejections: Some(summary),
        rejections_csv: Some(csv),
    })
}

/// Everything computed by `run` after preprocessing.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub plan: SamplingPlan,
    pub bands: Vec<BandSpec>,
    pub trained: Vec<TrainedBand>,
    /// Per band, search results for preictal then interictal test sets.
    pub searches: Vec<[SearchResult; 2]>,
    pub cells: Vec<EvaluationCell>,
    pub achieved: SetCounts,
    pub interval_totals_us: BTreeMap<&'static str, i64>,
}

pub fn analyze(
    cfg: &RunConfig,
    data: &Prepared,
    annotations: &[SeizureAnnotation],
    timings: &mut Timings,
) -> Result<Analysis, CliError> {
    let recorded: Vec<_> = data.segments.iter().map(Segment::span).collect();
    let (pre, inter) = timings
        .time("label", || label_intervals(annotations, &recorded))
        .map_err(|e| CliError::stage("label", e))?;

    let grids: Vec<SegmentGrid> = data.segments.iter().map(SegmentGrid::from).collect();
    let (plan, sets) = timings
        .time("split_sample", || {
            SamplingPlan::new(
                &pre,
                &inter,
                &grids,
                cfg.windows.counts(),
                cfg.windows.length_samples,
                cfg.rng_seed,
            )
            .map(|plan| {
                let sets = plan.extract(&data.segments);
                (plan, sets)
            })
        })
        .map_err(|e| CliError::stage("split_sample", e))?;
    let achieved = SetCounts {
        train: [sets.train[0].len(), sets.train[1].len()],
        test: [sets.test[0].len(), sets.test[1].len()],
    };
    for (set, name) in [(&sets.train, "train"), (&sets.test, "test")] {
        for c in Condition::BOTH {
            if set[c.index()].is_empty() {
                return Err(CliError::stage(
                    "split_sample",
                    format!("no {c} {name} windows could be sampled"),
                ));
            }
        }
    }

    let bands: Vec<BandSpec> = cfg.bands.iter().map(|b| b.spec()).collect();
    let csp_cfg = CspConfig {
        eps_rel: cfg.eps_rel,
        center_windows: cfg.center_windows,
    };
    let trained = timings
        .time("train", || {
            train_all_bands(&sets.train, &bands, data.sample_rate_hz, &csp_cfg)
        })
        .map_err(|e| CliError::stage("train", e))?;
    drop(sets.train);

    let searches = timings
        .time("search", || {
            trained
                .iter()
                .map(|t| -> Result<[SearchResult; 2], cspwave_core::search::SearchError> {
                    Ok([
                        waveform_search(
                            &sets.test[0],
                            Condition::Preictal,
                            &t.filters,
                            data.sample_rate_hz,
                            cfg.k,
                        )?,
                        waveform_search(
                            &sets.test[1],
                            Condition::Interictal,
                            &t.filters,
                            data.sample_rate_hz,
                            cfg.k,
                        )?,
                    ])
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(|e| CliError::stage("search", e))?;

    let cells = timings
        .time("evaluate", || {
            let energies = searches
                .iter()
                .map(|s| BandEnergies::from_search(s))
                .collect::<Result<Vec<_>, _>>()?;
            evaluate_all(&energies, LOG_FLOOR)
        })
        .map_err(|e| CliError::stage("evaluate", e))?;

    let mut interval_totals_us = BTreeMap::new();
    interval_totals_us.insert("preictal", pre.total_us());
    interval_totals_us.insert("interictal", inter.total_us());
    interval_totals_us.insert("preictal_train", plan.train_intervals[0].total_us());
    interval_totals_us.insert("interictal_train", plan.train_intervals[1].total_us());
    interval_totals_us.insert("preictal_test", plan.test_intervals[0].total_us());
    interval_totals_us.insert("interictal_test", plan.test_intervals[1].total_us());
    interval_totals_us.insert("recorded", total_len_us(&recorded));

    Ok(Analysis {
        plan,
        bands,
        trained,
        searches,
        cells,
        achieved,
        interval_totals_us,
    })
}

struct FiltersJson<'a>(&'a [TrainedBand]);

impl Serialize for FiltersJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Counts {
            #[serde(rename = "N1")]
            n1: usize,
            #[serde(rename = "N2")]
            n2: usize,
        }
        #[derive(Serialize)]
        struct Entry<'a> {
            lo_hz: f64,
            hi_hz: f64,
            w1: &'a [f64],
            w2: &'a [f64],
            lambda1: f64,
            lambda2: f64,
            eps_rel: f64,
            n_train: Counts,
        }
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for t in self.0 {
            let f: &SpatialFilterPair = &t.filters;
            map.serialize_entry(
                f.band.name.as_str(),
                &Entry {
                    lo_hz: f.band.lo_hz,
                    hi_hz: f.band.hi_hz,
                    w1: &f.w1,
                    w2: &f.w2,
                    lambda1: f.lambda1,
                    lambda2: f.lambda2,
                    eps_rel: f.eps_rel,
                    n_train: Counts {
                        n1: f.n_train[0],
                        n2: f.n_train[1],
                    },
                },
            )?;
        }
        map.end()
    }
}

pub fn filters_json(trained: &[TrainedBand]) -> String {
    let mut s = serde_json::to_string_pretty(&FiltersJson(trained)).expect("filters serialize");
    s.push('\n');
    s
}

pub fn windows_index_csv(plan: &SamplingPlan, segment_ids: &[String]) -> String {
    let mut out = String::from("window_id,condition,split,segment_id,start_us\n");
    for (split, slots) in [(Split::Train, &plan.train_slots), (Split::Test, &plan.test_slots)] {
        for c in Condition::BOTH {
            for (id, slot) in slots[c.index()].iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{id},{c},{},{},{}",
                    split.as_str(),
                    segment_ids[slot.segment],
                    slot.start_us
                );
            }
        }
    }
    out
}

pub fn waveform_file(band: &BandSpec, s: usize, t: usize) -> String {
    format!("waveforms_{}_{s}_{t}.csv", band.name)
}

/// Top-k windows ranked with `w_t` but projected with the other filter.
pub fn cross_waveform_file(band: &BandSpec, s: usize, t: usize) -> String {
    format!("cross_waveforms_{}_{s}_{t}.csv", band.name)
}

pub fn energies_file(band: &BandSpec, s: usize, t: usize) -> String {
    format!("energies_{}_{s}_{t}.csv", band.name)
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowSummary {
    pub window_len: usize,
    pub sample_rate_hz: f64,
    pub split: &'static str,
    pub requested: SetCounts,
    pub achieved: SetCounts,
    pub shortfalls: Vec<ShortfallReport>,
    pub interval_totals_us: BTreeMap<&'static str, i64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterSummary {
    pub band: &'static str,
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_train: [usize; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub band: &'static str,
    pub filter: usize,
    pub auc: f64,
    pub positive: Condition,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub rejections: Option<RejectionSummary>,
    pub windows: WindowSummary,
    pub filters: Vec<FilterSummary>,
    pub evaluation: Vec<CellSummary>,
    pub outputs: Vec<String>,
    pub timings_ms: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Text outputs of a run, by file name, in a fixed order.
pub fn data_files(data: &Prepared, a: &Analysis) -> Vec<(String, String)> {
    let mut files = vec![
        ("filters.json".to_string(), filters_json(&a.trained)),
        (
            "windows_index.csv".to_string(),
            windows_index_csv(&a.plan, &data.segment_ids),
        ),
        ("evaluation.json".to_string(), evaluation_json(&a.cells)),
        ("evaluation.csv".to_string(), evaluation_csv(&a.cells)),
    ];
    if let Some(csv) = &data.rejections_csv {
        files.push(("rejections.csv".to_string(), csv.clone()));
    }
    for (band, pair) in a.bands.iter().zip(&a.searches) {
        for (si, result) in pair.iter().enumerate() {
            let s = si + 1;
            for t in 1..=2 {
                files.push((waveform_file(band, s, t), result.set(t, t).to_csv()));
                files.push((cross_waveform_file(band, s, t), result.set(t, 3 - t).to_csv()));
                files.push((energies_file(band, s, t), energies_csv(&result.energies[t - 1])));
            }
        }
    }
    files
}

pub fn build_report(
    cfg: &RunConfig,
    data: &Prepared,
    a: &Analysis,
    outputs: Vec<String>,
    timings: Timings,
) -> RunReport {
    RunReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        rejections: data.rejections.clone(),
        windows: WindowSummary {
            window_len: cfg.windows.length_samples,
            sample_rate_hz: data.sample_rate_hz,
            split: "chronological_80_20",
            requested: cfg.windows.counts(),
            achieved: a.achieved,
            shortfalls: a.plan.shortfalls.clone(),
            interval_totals_us: a.interval_totals_us.clone(),
        },
        filters: a
            .trained
            .iter()
            .map(|t| FilterSummary {
                band: t.filters.band.name.as_str(),
                lambda1: t.filters.lambda1,
                lambda2: t.filters.lambda2,
                n_train: t.filters.n_train,
            })
            .collect(),
        evaluation: a
            .cells
            .iter()
            .map(|c| CellSummary {
                band: c.auc.band.name.as_str(),
                filter: c.auc.filter,
                auc: c.auc.auc,
                positive: c.auc.positive,
                n_pos: c.auc.n_pos,
                n_neg: c.auc.n_neg,
            })
            .collect(),
        outputs,
        timings_ms: timings,
    }
}
