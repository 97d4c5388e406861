//! Artifact rejection. Rules run in this order:
//!
//! missing -> flatline -> too short -> rail-to-rail -> 1 Hz high-pass ->
//! line notches -> broad 60 Hz -> spike excision -> too short -> resample.
//!
//! Every threshold is a strict inequality. Every dropped or excised span is
//! logged once, so retained plus rejected time equals input time exactly.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::recording::Segment;
use crate::spectral::{band_power, highpass_1hz, notch_line, resample_to, FilterReport, SpectralError};
use crate::time::Span;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub flatline_ms: f64,
    pub min_segment_s: f64,
    pub railtorail_rel_freq: f64,
    pub broad60_low: (f64, f64),
    pub broad60_high: (f64, f64),
    pub spike_delta_uv: f64,
    pub spike_excision_window_s: f64,
    pub line_freqs_hz: Vec<f64>,
    pub target_rate_hz: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            flatline_ms: 25.0,
            min_segment_s: 5.0,
            railtorail_rel_freq: 0.05,
            broad60_low: (45.0, 55.0),
            broad60_high: (55.0, 65.0),
            spike_delta_uv: 70.0,
            spike_excision_window_s: 120.0,
            line_freqs_hz: vec![60.0, 120.0, 180.0],
            target_rate_hz: 512.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("flatline_ms", self.flatline_ms),
            ("min_segment_s", self.min_segment_s),
            ("railtorail_rel_freq", self.railtorail_rel_freq),
            ("spike_delta_uv", self.spike_delta_uv),
            ("spike_excision_window_s", self.spike_excision_window_s),
            ("target_rate_hz", self.target_rate_hz),
            ("broad60_low", self.broad60_low.0),
            ("broad60_high", self.broad60_high.0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("preprocess.{name} must be positive"));
            }
        }
        if self.broad60_low.0 >= self.broad60_low.1 || self.broad60_high.0 >= self.broad60_high.1 {
            return Err("preprocess broad-60 bands must have lo < hi".to_string());
        }
        if self.line_freqs_hz.iter().any(|f| f.is_nan() || *f <= 0.0) {
            return Err("preprocess.line_freqs_hz must be positive".to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Missing,
    Flatline,
    TooShort,
    RailToRail,
    #[serde(rename = "broad_60hz")]
    Broad60Hz,
    SpikeExcision,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::Missing,
        Rule::Flatline,
        Rule::TooShort,
        Rule::RailToRail,
        Rule::Broad60Hz,
        Rule::SpikeExcision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Missing => "missing",
            Rule::Flatline => "flatline",
            Rule::TooShort => "too_short",
            Rule::RailToRail => "rail_to_rail",
            Rule::Broad60Hz => "broad_60hz",
            Rule::SpikeExcision => "spike_excision",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Input segment index, plus the piece index once spike excision split it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentId {
    pub source: usize,
    pub piece: Option<usize>,
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.piece {
            Some(p) => write!(f, "{}.{p}", self.source),
            None => write!(f, "{}", self.source),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub segment_id: SegmentId,
    pub rule: Rule,
    pub span: Span,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionLog {
    pub entries: Vec<Rejection>,
}

impl RejectionLog {
    pub fn count(&self, rule: Rule) -> usize {
        self.entries.iter().filter(|e| e.rule == rule).count()
    }

    pub fn rejected_us(&self) -> i64 {
        self.entries.iter().map(|e| e.span.len_us()).sum()
    }

    /// `rejections.csv` contents.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment_id,rule,start_us,end_us,detail\n");
        for e in &self.entries {
            let detail = e.detail.replace('"', "'");
            out.push_str(&format!(
                "{},{},{},{},\"{}\"\n",
                e.segment_id, e.rule, e.span.start_us, e.span.end_us, detail
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("segment {segment}: {source}")]
pub struct PreprocessError {
    pub segment: SegmentId,
    #[source]
    pub source: SpectralError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Drop(String),
}

impl Verdict {
    pub fn is_keep(&self) -> bool {
        matches!(self, Verdict::Keep)
    }
}

pub fn reject_missing(seg: &Segment) -> Verdict {
    if seg.data.is_empty() {
        return Verdict::Drop("segment holds no samples".to_string());
    }
    match seg.data.indexed_iter().find(|(_, v)| v.is_nan()) {
        Some(((c, i), _)) => Verdict::Drop(format!("missing sample at channel {c}, index {i}")),
        None => Verdict::Keep,
    }
}

/// Drops a segment if any channel repeats one bit pattern for longer than
/// `flatline_ms`.
pub fn reject_flatline(seg: &Segment, cfg: &PreprocessConfig) -> Verdict {
    let limit_s = cfg.flatline_ms / 1e3;
    for (c, row) in seg.data.rows().into_iter().enumerate() {
        let mut run = 0usize;
        let mut prev: Option<u32> = None;
        for (i, v) in row.iter().enumerate() {
            let bits = v.to_bits();
            run = if prev == Some(bits) { run + 1 } else { 1 };
            prev = Some(bits);
            if run as f64 / seg.sample_rate_hz > limit_s {
                return Verdict::Drop(format!("channel {c} constant for {run} samples ending at index {i}"));
            }
        }
    }
    Verdict::Keep
}

pub fn reject_short(seg: &Segment, cfg: &PreprocessConfig) -> Verdict {
    if seg.duration_s() < cfg.min_segment_s {
        Verdict::Drop(format!("{:.3} s long", seg.duration_s()))
    } else {
        Verdict::Keep
    }
}

/// Drops a segment if, in any channel, one exact amplitude value makes up
/// more than `railtorail_rel_freq` of the samples.
pub fn reject_rail_to_rail(seg: &Segment, cfg: &PreprocessConfig) -> Verdict {
    let n = seg.n_samples();
    if n == 0 {
        return Verdict::Keep;
    }
    for (c, row) in seg.data.rows().into_iter().enumerate() {
        let mut bits: Vec<u32> = row.iter().map(|v| v.to_bits()).collect();
        bits.sort_unstable();
        let (mut best, mut best_val) = (0usize, 0u32);
        let mut i = 0;
        while i < bits.len() {
            let j = bits[i..].partition_point(|&b| b == bits[i]) + i;
            if j - i > best {
                best = j - i;
                best_val = bits[i];
            }
            i = j;
        }
        let freq = best as f64 / n as f64;
        if freq > cfg.railtorail_rel_freq {
            return Verdict::Drop(format!(
                "channel {c}: value {} µV has relative frequency {:.4}",
                f32::from_bits(best_val),
                freq
            ));
        }
    }
    Verdict::Keep
}

/// Drops a segment whose power just below 60 Hz is lower than just above.
pub fn reject_broad_60(seg: &Segment, cfg: &PreprocessConfig) -> Result<Verdict, SpectralError> {
    let low = band_power(seg, cfg.broad60_low.0, cfg.broad60_low.1)?;
    let high = band_power(seg, cfg.broad60_high.0, cfg.broad60_high.1)?;
    Ok(if low < high {
        Verdict::Drop(format!("power {low:.4} µV² below {high:.4} µV² above"))
    } else {
        Verdict::Keep
    })
}

/// Sample ranges `[from, to)` removed around every consecutive-sample jump
/// larger than `spike_delta_uv`, merged.
pub fn spike_excisions(seg: &Segment, cfg: &PreprocessConfig) -> Vec<(usize, usize)> {
    let n = seg.n_samples();
    let half = (cfg.spike_excision_window_s / 2.0 * seg.sample_rate_hz).round() as usize;
    let mut spikes: Vec<usize> = Vec::new();
    for row in seg.data.rows() {
        for (t, w) in row
            .as_slice()
            .map_or_else(|| row.to_vec(), <[f32]>::to_vec)
            .windows(2)
            .enumerate()
        {
            if (f64::from(w[1]) - f64::from(w[0])).abs() > cfg.spike_delta_uv {
                spikes.push(t);
            }
        }
    }
    spikes.sort_unstable();
    spikes.dedup();
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    for t in spikes {
        let (from, to) = (t.saturating_sub(half), (t + half).min(n));
        match ranges.last_mut() {
            Some(last) if from <= last.1 => last.1 = last.1.max(to),
            _ => ranges.push((from, to)),
        }
    }
    ranges
}

/// A segment piece after spike excision, still at the native rate, with the
/// span used for time accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub id: SegmentId,
    pub span: Span,
    pub segment: Segment,
}

/// Removes the excision ranges; returns kept pieces and the log entries.
pub fn excise_spikes(seg: &Segment, source: usize, cfg: &PreprocessConfig) -> (Vec<Piece>, Vec<Rejection>) {
    let ranges = spike_excisions(seg, cfg);
    let n = seg.n_samples();
    let whole = SegmentId { source, piece: None };
    let mut log = Vec::new();
    let mut pieces = Vec::new();
    let mut cursor = 0;
    for &(from, to) in &ranges {
        if from > cursor {
            pieces.push((cursor, from));
        }
        log.push(Rejection {
            segment_id: whole,
            rule: Rule::SpikeExcision,
            span: Span::new(seg.time_of(from), seg.time_of(to)),
            detail: format!("samples {from}..{to} around jumps > {} µV", cfg.spike_delta_uv),
        });
        cursor = to;
    }
    if cursor < n {
        pieces.push((cursor, n));
    }
    let pieces = pieces
        .into_iter()
        .enumerate()
        .map(|(p, (from, to))| Piece {
            id: SegmentId { source, piece: Some(p) },
            span: Span::new(seg.time_of(from), seg.time_of(to)),
            segment: if ranges.is_empty() {
                seg.clone()
            } else {
                seg.slice(from, to)
            },
        })
        .collect();
    (pieces, log)
}

/// A retained segment at the target rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSegment {
    pub id: SegmentId,
    /// Span at the native rate, before resampling.
    pub span: Span,
    pub segment: Segment,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    pub segments: Vec<CleanSegment>,
    pub log: RejectionLog,
    /// Filter designs applied to the retained data, in order.
    pub filters: Vec<FilterReport>,
}

impl PipelineOutput {
    pub fn retained_us(&self) -> i64 {
        self.segments.iter().map(|s| s.span.len_us()).sum()
    }
}

fn clean_one(
    source: usize,
    seg: &Segment,
    cfg: &PreprocessConfig,
) -> Result<(Vec<CleanSegment>, Vec<Rejection>), PreprocessError> {
    let id = SegmentId { source, piece: None };
    let dsp = |e| PreprocessError { segment: id, source: e };
    let dropped = |rule, detail| Rejection {
        segment_id: id,
        rule,
        span: seg.span(),
        detail,
    };

    if let Verdict::Drop(d) = reject_missing(seg) {
        return Ok((vec![], vec![dropped(Rule::Missing, d)]));
    }
    type Check = fn(&Segment, &PreprocessConfig) -> Verdict;
    let checks: [(Rule, Check); 3] = [
        (Rule::Flatline, reject_flatline),
        (Rule::TooShort, reject_short),
        (Rule::RailToRail, reject_rail_to_rail),
    ];
    for (rule, check) in checks {
        if let Verdict::Drop(d) = check(seg, cfg) {
            return Ok((vec![], vec![dropped(rule, d)]));
        }
    }

    let filtered = highpass_1hz(seg).map_err(dsp)?;
    let filtered = notch_line(&filtered, &cfg.line_freqs_hz).map_err(dsp)?;
    if let Verdict::Drop(d) = reject_broad_60(&filtered, cfg).map_err(dsp)? {
        return Ok((vec![], vec![dropped(Rule::Broad60Hz, d)]));
    }

    let (pieces, mut log) = excise_spikes(&filtered, source, cfg);
    drop(filtered);
    let mut out = Vec::new();
    for piece in pieces {
        if let Verdict::Drop(d) = reject_short(&piece.segment, cfg) {
            log.push(Rejection {
                segment_id: piece.id,
                rule: Rule::TooShort,
                span: piece.span,
                detail: format!("{d} after spike excision"),
            });
            continue;
        }
        let resampled = resample_to(&piece.segment, cfg.target_rate_hz).map_err(|e| PreprocessError {
            segment: piece.id,
            source: e,
        })?;
        out.push(CleanSegment {
            id: piece.id,
            span: piece.span,
            segment: resampled,
        });
    }
    Ok((out, log))
}

/// Runs every rule over `segments` (sorted, disjoint). Segments are
/// processed in parallel; the log is ordered by (segment id, time).
pub fn run_pipeline(segments: &[Segment], cfg: &PreprocessConfig) -> Result<PipelineOutput, PreprocessError> {
    let results = segments
        .par_iter()
        .enumerate()
        .map(|(i, s)| clean_one(i, s, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = PipelineOutput::default();
    for (clean, log) in results {
        out.segments.extend(clean);
        out.log.entries.extend(log);
    }
    out.log
        .entries
        .sort_by_key(|e| (e.segment_id.source, e.span.start_us, e.segment_id.piece));
    out.filters = out
        .segments
        .first()
        .map(|s| s.segment.provenance.clone())
        .unwrap_or_default();
    Ok(out)
}
