//! Integer-microsecond time base and half-open interval arithmetic.

use serde::{Deserialize, Serialize};

pub const US_PER_S: i64 = 1_000_000;
pub const US_PER_MIN: i64 = 60 * US_PER_S;
pub const US_PER_H: i64 = 60 * US_PER_MIN;

/// Offset of sample `index` from the first sample, rounded to whole µs.
pub fn sample_offset_us(index: usize, sample_rate_hz: f64) -> i64 {
    (index as f64 * 1e6 / sample_rate_hz).round() as i64
}

pub fn seconds_to_us(s: f64) -> i64 {
    (s * 1e6).round() as i64
}

/// Half-open time interval `[start_us, end_us)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_us: i64,
    pub end_us: i64,
}

impl Span {
    pub fn new(start_us: i64, end_us: i64) -> Self {
        Span { start_us, end_us }
    }

    pub fn len_us(&self) -> i64 {
        (self.end_us - self.start_us).max(0)
    }

    pub fn is_empty(&self) -> bool {
        self.end_us <= self.start_us
    }

    pub fn contains_span(&self, other: &Span) -> bool {
        self.start_us <= other.start_us && other.end_us <= self.end_us
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start_us < other.end_us && other.start_us < self.end_us
    }

    pub fn intersect(&self, other: &Span) -> Option<Span> {
        let s = Span::new(self.start_us.max(other.start_us), self.end_us.min(other.end_us));
        (!s.is_empty()).then_some(s)
    }
}

/// Sorts and merges overlapping or touching spans; drops empty ones.
pub fn union(spans: impl IntoIterator<Item = Span>) -> Vec<Span> {
    let mut v: Vec<Span> = spans.into_iter().filter(|s| !s.is_empty()).collect();
    v.sort();
    let mut out: Vec<Span> = Vec::with_capacity(v.len());
    for s in v {
        match out.last_mut() {
            Some(last) if s.start_us <= last.end_us => last.end_us = last.end_us.max(s.end_us),
            _ => out.push(s),
        }
    }
    out
}

/// `base` minus every span in `remove`. Pieces of one base span stay
/// separate from pieces of another, even where they touch.
pub fn subtract(base: &[Span], remove: &[Span]) -> Vec<Span> {
    let remove = union(remove.iter().copied());
    let mut out = Vec::new();
    for b in base {
        let mut cursor = b.start_us;
        for r in remove.iter().filter(|r| r.overlaps(b)) {
            if r.start_us > cursor {
                out.push(Span::new(cursor, r.start_us));
            }
            cursor = cursor.max(r.end_us);
        }
        if cursor < b.end_us {
            out.push(Span::new(cursor, b.end_us));
        }
    }
    out
}

pub fn total_len_us(spans: &[Span]) -> i64 {
    spans.iter().map(Span::len_us).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn offsets_round() {
        assert_eq!(sample_offset_us(1, 512.0), 1953);
        assert_eq!(sample_offset_us(512, 512.0), 1_000_000);
        assert_eq!(sample_offset_us(3, 512.0), 5859);
    }

    #[test]
    fn union_merges_touching() {
        let u = union([Span::new(5, 10), Span::new(0, 5), Span::new(20, 30), Span::new(25, 26)]);
        assert_eq!(u, vec![Span::new(0, 10), Span::new(20, 30)]);
    }

    #[test]
    fn subtract_splits() {
        let out = subtract(&[Span::new(0, 100)], &[Span::new(10, 20), Span::new(90, 200)]);
        assert_eq!(out, vec![Span::new(0, 10), Span::new(20, 90)]);
    }

    proptest! {
        #[test]
        fn subtract_conserves_length(
            base in prop::collection::vec((0i64..1000, 1i64..100), 0..8),
            rem in prop::collection::vec((0i64..1000, 1i64..100), 0..8),
        ) {
            let base = union(base.into_iter().map(|(s, l)| Span::new(s, s + l)));
            let rem: Vec<Span> = rem.into_iter().map(|(s, l)| Span::new(s, s + l)).collect();
            let kept = subtract(&base, &rem);
            let removed: Vec<Span> = base
                .iter()
                .flat_map(|b| union(rem.iter().copied()).into_iter().filter_map(move |r| r.intersect(b)))
                .collect();
            prop_assert_eq!(total_len_us(&kept) + total_len_us(&removed), total_len_us(&base));
            for k in &kept {
                prop_assert!(rem.iter().all(|r| !r.overlaps(k)));
            }
        }
    }
}
