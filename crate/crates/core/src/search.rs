//! Energy-guided waveform search.
//!
//! Test windows are ranked by the energy of their band-passed CSP signal;
//! the top `k` are then re-projected without the band-pass so the raw
//! waveform shapes can be inspected.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::band::BandSpec;
use crate::csp::SpatialFilterPair;
use crate::spectral::{BandpassFilter, SpectralError};
use crate::windowing::{Condition, LabeledWindow};

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("filter has {filter} weights but the window has {channels} channels")]
    ShapeMismatch { filter: usize, channels: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Dsp(#[from] SpectralError),
}

/// `wᵀ X`: one sample per column of `window`.
pub fn project(window: ArrayView2<'_, f64>, w: &[f64]) -> Result<Vec<f64>, SearchError> {
    if w.len() != window.nrows() {
        return Err(SearchError::ShapeMismatch {
            filter: w.len(),
            channels: window.nrows(),
        });
    }
    Ok(ArrayView1::from(w).dot(&window).to_vec())
}

pub fn energy(samples: &[f64]) -> f64 {
    samples.iter().map(|x| x * x).sum()
}

/// A projected window.
#[derive(Debug, Clone, PartialEq)]
pub struct CspSignal {
    pub samples: Vec<f64>,
    pub window_id: usize,
    pub start_time_us: i64,
    pub condition: Condition,
    /// Which filter (1 or 2) produced the samples.
    pub filter: usize,
    pub band: BandSpec,
    /// Whether the band-pass was applied before projecting.
    pub filtered: bool,
}

impl CspSignal {
    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEnergy {
    pub window_id: usize,
    pub start_time_us: i64,
    pub energy: f64,
}

/// Energy of `f_B(wᵀ V)` for every window, in input order. The band-pass is
/// linear and identical across channels, so projecting first gives the
/// same signal as filtering every channel and then projecting.
pub fn filtered_energies(
    windows: &[LabeledWindow],
    w: &[f64],
    band: BandSpec,
    sample_rate_hz: f64,
) -> Result<Vec<WindowEnergy>, SearchError> {
    let filter = BandpassFilter::new(band, sample_rate_hz)?;
    windows
        .par_iter()
        .map(|win| {
            let u = filter.apply(&project(win.data.view(), w)?)?;
            Ok(WindowEnergy {
                window_id: win.id,
                start_time_us: win.start_time_us,
                energy: energy(&u),
            })
        })
        .collect()
}

/// Descending energy, ties by ascending window id.
fn rank_order(a: &WindowEnergy, b: &WindowEnergy) -> std::cmp::Ordering {
    b.energy.total_cmp(&a.energy).then(a.window_id.cmp(&b.window_id))
}

/// The `min(k, m)` highest energies, best first.
pub fn topk_energy(energies: &[WindowEnergy], k: usize) -> Vec<WindowEnergy> {
    let mut all = energies.to_vec();
    let k = k.min(all.len());
    if k == 0 {
        return Vec::new();
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, rank_order);
        all.truncate(k);
    }
    all.sort_by(rank_order);
    all
}

/// Top-k window ids for condition `s` ranked with filter `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKIndexSet {
    pub entries: Vec<WindowEnergy>,
    pub k: usize,
    pub condition: Condition,
    pub filter: usize,
    pub band: BandSpec,
}

impl TopKIndexSet {
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.window_id).collect()
    }
}

/// Raw projections with filter `projection` of the windows in `provenance`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    pub provenance: TopKIndexSet,
    pub projection: usize,
    pub waveforms: Vec<CspSignal>,
}

impl WaveformSet {
    /// One row per waveform: id, start, filtered energy, then the samples.
    pub fn to_csv(&self) -> String {
        let len = self.waveforms.first().map_or(0, |w| w.samples.len());
        let mut out = String::from("window_id,start_us,energy_filtered");
        for i in 0..len {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (e, w) in self.provenance.entries.iter().zip(&self.waveforms) {
            let _ = write!(out, "{},{},{}", e.window_id, e.start_time_us, e.energy);
            for x in &w.samples {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn energies_csv(energies: &[WindowEnergy]) -> String {
    let mut out = String::from("window_id,start_us,energy_filtered\n");
    for e in energies {
        let _ = writeln!(out, "{},{},{}", e.window_id, e.start_time_us, e.energy);
    }
    out
}

/// Everything the search produces for one band and test condition.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub band: BandSpec,
    pub condition: Condition,
    /// Filtered energies of every test window, indexed by filter `t - 1`.
    pub energies: [Vec<WindowEnergy>; 2],
    /// `(t, q)` in order (1,1), (1,2), (2,1), (2,2): ranked with `w_t`,
    /// projected with `w_q`.
    pub sets: Vec<WaveformSet>,
}

impl SearchResult {
    pub fn set(&self, t: usize, q: usize) -> &WaveformSet {
        &self.sets[(t - 1) * 2 + (q - 1)]
    }
}

/// Ranks `test` (all of condition `condition`) by filtered energy with each
/// filter, then projects the unfiltered top-k windows with both filters.
pub fn waveform_search(
    test: &[LabeledWindow],
    condition: Condition,
    pair: &SpatialFilterPair,
    sample_rate_hz: f64,
    k: usize,
) -> Result<SearchResult, SearchError> {
    if k == 0 {
        return Err(SearchError::ZeroK);
    }
    let by_id: std::collections::HashMap<usize, &LabeledWindow> = test.iter().map(|w| (w.id, w)).collect();
    let e1 = filtered_energies(test, &pair.w1, pair.band, sample_rate_hz)?;
    let e2 = filtered_energies(test, &pair.w2, pair.band, sample_rate_hz)?;
    let mut sets = Vec::with_capacity(4);
    for (t, energies) in [(1, &e1), (2, &e2)] {
        let provenance = TopKIndexSet {
            entries: topk_energy(energies, k),
            k,
            condition,
            filter: t,
            band: pair.band,
        };
        for q in 1..=2 {
            let waveforms = provenance
                .entries
                .iter()
                .map(|e| {
                    let win = by_id[&e.window_id];
                    Ok(CspSignal {
                        samples: project(win.data.view(), pair.filter(q))?,
                        window_id: win.id,
                        start_time_us: win.start_time_us,
                        condition,
                        filter: q,
                        band: pair.band,
                        filtered: false,
                    })
                })
                .collect::<Result<Vec<_>, SearchError>>()?;
            sets.push(WaveformSet {
                provenance: provenance.clone(),
                projection: q,
                waveforms,
            });
        }
    }
    Ok(SearchResult {
        band: pair.band,
        condition,
        energies: [e1, e2],
        sets,
    })
}

/// Stacks signals into rows, for plotting.
pub fn as_matrix(signals: &[CspSignal]) -> Array2<f64> {
    let len = signals.first().map_or(0, |s| s.samples.len());
    Array2::from_shape_fn((signals.len(), len), |(r, c)| signals[r].samples[c])
}
