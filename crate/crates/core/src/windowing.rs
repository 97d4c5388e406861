//! Preictal/interictal intervals, chronological 80/20 split and uniform
//! sampling of non-overlapping windows on a per-segment slot grid.

use std::fmt;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::recording::{Segment, SeizureAnnotation};
use crate::time::{sample_offset_us, subtract, total_len_us, union, Span, US_PER_H, US_PER_MIN};

/// Preictal state starts 1 h 05 min before the earliest EEG change...
pub const PREICTAL_START_BEFORE_EEC_US: i64 = 65 * US_PER_MIN;
/// ...and ends 5 min before it (minimum intervention time).
pub const PREICTAL_END_BEFORE_EEC_US: i64 = 5 * US_PER_MIN;
/// Interictal data lies at least this far from every ictal span.
pub const INTERICTAL_GUARD_US: i64 = 4 * US_PER_H;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WindowingError {
    #[error("seizure {index} starts (eec {eec_us} µs) before the previous one ends ({prev_end_us} µs)")]
    OverlappingSeizures {
        index: usize,
        eec_us: i64,
        prev_end_us: i64,
    },
    #[error("no {0} data is available")]
    EmptyCondition(Condition),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Preictal,
    Interictal,
}

impl Condition {
    pub const BOTH: [Condition; 2] = [Condition::Preictal, Condition::Interictal];

    /// 1 for preictal, 2 for interictal.
    pub fn number(self) -> usize {
        match self {
            Condition::Preictal => 1,
            Condition::Interictal => 2,
        }
    }

    pub fn index(self) -> usize {
        self.number() - 1
    }

    pub fn from_number(s: usize) -> Option<Condition> {
        match s {
            1 => Some(Condition::Preictal),
            2 => Some(Condition::Interictal),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Preictal => "preictal",
            Condition::Interictal => "interictal",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionIntervals {
    pub condition: Condition,
    pub intervals: Vec<Span>,
}

impl ConditionIntervals {
    pub fn total_us(&self) -> i64 {
        total_len_us(&self.intervals)
    }
}

/// Derives condition intervals from seizure marks and the recorded spans.
///
/// Per seizure, preictal is `[eec - 65 min, eec - 5 min)`, minus every other
/// seizure's exclusion zone `[eec - 4 h, end + 4 h)`; interictal is whatever
/// recording remains outside all exclusion zones.
pub fn label_intervals(
    annotations: &[SeizureAnnotation],
    recorded: &[Span],
) -> Result<(ConditionIntervals, ConditionIntervals), WindowingError> {
    for (index, pair) in annotations.windows(2).enumerate() {
        if pair[1].eec_us < pair[0].end_us {
            return Err(WindowingError::OverlappingSeizures {
                index: index + 1,
                eec_us: pair[1].eec_us,
                prev_end_us: pair[0].end_us,
            });
        }
    }
    let exclusion: Vec<Span> = annotations
        .iter()
        .map(|a| Span::new(a.eec_us - INTERICTAL_GUARD_US, a.end_us + INTERICTAL_GUARD_US))
        .collect();

    let mut preictal = Vec::new();
    for (i, a) in annotations.iter().enumerate() {
        let window = Span::new(
            a.eec_us - PREICTAL_START_BEFORE_EEC_US,
            a.eec_us - PREICTAL_END_BEFORE_EEC_US,
        );
        let clipped: Vec<Span> = recorded.iter().filter_map(|r| r.intersect(&window)).collect();
        let others: Vec<Span> = exclusion
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, z)| *z)
            .collect();
        preictal.extend(subtract(&clipped, &others));
    }
    preictal.sort();

    let mut blocked = exclusion;
    blocked.extend(preictal.iter().copied());
    let interictal = subtract(recorded, &union(blocked));

    Ok((
        ConditionIntervals {
            condition: Condition::Preictal,
            intervals: preictal,
        },
        ConditionIntervals {
            condition: Condition::Interictal,
            intervals: interictal,
        },
    ))
}

/// Chronological split: the first 80 % of the condition's cumulative
/// duration trains, the rest tests.
pub fn split_80_20(intervals: &ConditionIntervals) -> Result<(ConditionIntervals, ConditionIntervals), WindowingError> {
    let total = intervals.total_us();
    if total == 0 {
        return Err(WindowingError::EmptyCondition(intervals.condition));
    }
    let cut = (i128::from(total) * 4 / 5) as i64;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut seen = 0i64;
    for iv in &intervals.intervals {
        let len = iv.len_us();
        if seen + len <= cut {
            train.push(*iv);
        } else if seen >= cut {
            test.push(*iv);
        } else {
            let at = iv.start_us + (cut - seen);
            train.push(Span::new(iv.start_us, at));
            test.push(Span::new(at, iv.end_us));
        }
        seen += len;
    }
    let wrap = |v| ConditionIntervals {
        condition: intervals.condition,
        intervals: v,
    };
    Ok((wrap(train), wrap(test)))
}

/// Sample-grid geometry of a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGrid {
    pub start_time_us: i64,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
}

impl SegmentGrid {
    fn time_of(&self, i: usize) -> i64 {
        self.start_time_us + sample_offset_us(i, self.sample_rate_hz)
    }

    fn span(&self) -> Span {
        Span::new(self.start_time_us, self.time_of(self.n_samples))
    }

    /// First sample index at or after `t_us`.
    fn first_at_or_after(&self, t_us: i64) -> usize {
        let rel = (t_us - self.start_time_us) as f64 * self.sample_rate_hz / 1e6;
        let mut i = rel.ceil().max(0.0) as usize;
        while i > 0 && self.time_of(i - 1) >= t_us {
            i -= 1;
        }
        while self.time_of(i) < t_us {
            i += 1;
        }
        i
    }
}

impl From<&Segment> for SegmentGrid {
    fn from(s: &Segment) -> Self {
        SegmentGrid {
            start_time_us: s.start_time_us,
            sample_rate_hz: s.sample_rate_hz,
            n_samples: s.n_samples(),
        }
    }
}

/// An `L`-sample window position inside one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub segment: usize,
    pub offset: usize,
    pub start_us: i64,
    pub end_us: i64,
}

/// Consecutive `len`-sample slots lying wholly inside one interval and one
/// segment, in chronological order.
pub fn grid_slots(intervals: &[Span], grids: &[SegmentGrid], len: usize) -> Vec<Slot> {
    let mut slots = Vec::new();
    if len == 0 {
        return slots;
    }
    for iv in intervals {
        for (segment, g) in grids.iter().enumerate() {
            if !g.span().overlaps(iv) {
                continue;
            }
            let mut offset = g.first_at_or_after(iv.start_us);
            while offset + len <= g.n_samples {
                let end_us = g.time_of(offset + len);
                if end_us > iv.end_us {
                    break;
                }
                slots.push(Slot {
                    segment,
                    offset,
                    start_us: g.time_of(offset),
                    end_us,
                });
                offset += len;
            }
        }
    }
    slots.sort();
    slots
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShortfallReport {
    pub condition: Condition,
    pub split: Split,
    pub requested: usize,
    pub got: usize,
    /// Intervals too short to hold a single window.
    pub excluded_intervals: usize,
    pub excluded_us: i64,
}

/// Draws `n` slots uniformly without replacement; the result is in
/// chronological order. Fewer than `n` slots yields all of them.
pub fn sample_slots(intervals: &[Span], grids: &[SegmentGrid], n: usize, len: usize, rng_seed: u64) -> Vec<Slot> {
    let slots = grid_slots(intervals, grids, len);
    if n >= slots.len() {
        return slots;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked = rand::seq::index::sample(&mut rng, slots.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| slots[i]).collect()
}

/// A `C x L` window with its condition label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub id: usize,
    pub data: Array2<f64>,
    pub condition: Condition,
    pub segment: usize,
    pub start_time_us: i64,
}

impl LabeledWindow {
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

pub fn extract_windows(slots: &[Slot], segments: &[Segment], len: usize, condition: Condition) -> Vec<LabeledWindow> {
    slots
        .iter()
        .enumerate()
        .map(|(id, s)| {
            let seg = &segments[s.segment];
            let view = seg.data.slice(ndarray::s![.., s.offset..s.offset + len]);
            LabeledWindow {
                id,
                data: view.mapv(f64::from),
                condition,
                segment: s.segment,
                start_time_us: s.start_us,
            }
        })
        .collect()
}

/// Samples `n` windows of `len` samples from a condition's intervals.
pub fn sample_windows(
    intervals: &ConditionIntervals,
    split: Split,
    segments: &[Segment],
    n: usize,
    len: usize,
    rng_seed: u64,
) -> (Vec<LabeledWindow>, Option<ShortfallReport>) {
    let grids: Vec<SegmentGrid> = segments.iter().map(SegmentGrid::from).collect();
    let slots = sample_slots(&intervals.intervals, &grids, n, len, rng_seed);
    let shortfall = (slots.len() < n).then_some(ShortfallReport {
        condition: intervals.condition,
        split,
        requested: n,
        got: slots.len(),
        excluded_intervals: 0,
        excluded_us: 0,
    });
    (extract_windows(&slots, segments, len, intervals.condition), shortfall)
}

/// Requested window counts, indexed by condition (preictal first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCounts {
    pub train: [usize; 2],
    pub test: [usize; 2],
}

/// Where every train/test window comes from, fixed before any sample is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub window_len: usize,
    pub rng_seed: u64,
    /// Train and test intervals per condition.
    pub train_intervals: [ConditionIntervals; 2],
    pub test_intervals: [ConditionIntervals; 2],
    pub train_slots: [Vec<Slot>; 2],
    pub test_slots: [Vec<Slot>; 2],
    pub shortfalls: Vec<ShortfallReport>,
}

/// Independent per-(condition, split) seeds from one run seed.
pub fn derived_seed(rng_seed: u64, condition: Condition, split: Split) -> u64 {
    let k = match (condition, split) {
        (Condition::Preictal, Split::Train) => 1u64,
        (Condition::Interictal, Split::Train) => 2,
        (Condition::Preictal, Split::Test) => 3,
        (Condition::Interictal, Split::Test) => 4,
    };
    let mut z = rng_seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SamplingPlan {
    pub fn new(
        preictal: &ConditionIntervals,
        interictal: &ConditionIntervals,
        grids: &[SegmentGrid],
        counts: SetCounts,
        window_len: usize,
        rng_seed: u64,
    ) -> Result<SamplingPlan, WindowingError> {
        let (pre_train, pre_test) = split_80_20(preictal)?;
        let (int_train, int_test) = split_80_20(interictal)?;
        let fs = grids.first().map_or(1.0, |g| g.sample_rate_hz);
        let window_us = sample_offset_us(window_len, fs);

        let mut shortfalls = Vec::new();
        let mut draw = |iv: &ConditionIntervals, split: Split, n: usize| {
            let slots = sample_slots(
                &iv.intervals,
                grids,
                n,
                window_len,
                derived_seed(rng_seed, iv.condition, split),
            );
            let short: Vec<&Span> = iv.intervals.iter().filter(|s| s.len_us() < window_us).collect();
            if slots.len() < n || !short.is_empty() {
                shortfalls.push(ShortfallReport {
                    condition: iv.condition,
                    split,
                    requested: n,
                    got: slots.len(),
                    excluded_intervals: short.len(),
                    excluded_us: short.iter().map(|s| s.len_us()).sum(),
                });
            }
            slots
        };
        let train_slots = [
            draw(&pre_train, Split::Train, counts.train[0]),
            draw(&int_train, Split::Train, counts.train[1]),
        ];
        let test_slots = [
            draw(&pre_test, Split::Test, counts.test[0]),
            draw(&int_test, Split::Test, counts.test[1]),
        ];
        Ok(SamplingPlan {
            window_len,
            rng_seed,
            train_intervals: [pre_train, int_train],
            test_intervals: [pre_test, int_test],
            train_slots,
            test_slots,
            shortfalls,
        })
    }

    pub fn extract(&self, segments: &[Segment]) -> SampledSets {
        let get = |slots: &[Slot], c: Condition| extract_windows(slots, segments, self.window_len, c);
        SampledSets {
            train: [
                get(&self.train_slots[0], Condition::Preictal),
                get(&self.train_slots[1], Condition::Interictal),
            ],
            test: [
                get(&self.test_slots[0], Condition::Preictal),
                get(&self.test_slots[1], Condition::Interictal),
            ],
            rng_seed: self.rng_seed,
            shortfalls: self.shortfalls.clone(),
        }
    }
}

/// Train sets 𝓧₁, 𝓧₂ and test sets 𝓥₁, 𝓥₂, indexed by condition.
#[derive(Debug, Clone)]
pub struct SampledSets {
    pub train: [Vec<LabeledWindow>; 2],
    pub test: [Vec<LabeledWindow>; 2],
    pub rng_seed: u64,
    pub shortfalls: Vec<ShortfallReport>,
}
