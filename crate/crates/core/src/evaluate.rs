//! Scores each (band, filter) pair as a hard-threshold energy classifier and
//! summarizes the log-energy distributions.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::BandSpec;
use crate::search::SearchResult;
use crate::windowing::Condition;

/// Floor applied to zero energies before taking logs for plots.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluateError {
    #[error("class {0} has no energies")]
    EmptyClass(&'static str),
    #[error("search results for band {band} are missing condition {condition}")]
    MissingCondition { band: String, condition: Condition },
}

/// Twice the Mann–Whitney U of `pos` over `neg`, with midranks for ties.
/// Kept doubled so it stays an integer.
pub fn mann_whitney_u2(pos: &[f64], neg: &[f64]) -> u64 {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&x| (x, true))
        .chain(neg.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sum over positives of (first rank + last rank) of their tie group.
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0.total_cmp(&all[i].0).is_eq() {
            j += 1;
        }
        let npos = all[i..=j].iter().filter(|e| e.1).count() as u64;
        rank_sum2 += npos * (i as u64 + 1 + j as u64 + 1);
        i = j + 1;
    }
    let n = pos.len() as u64;
    rank_sum2 - n * (n + 1)
}

/// Probability that a positive outranks a negative, ties counting half.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64, EvaluateError> {
    if pos.is_empty() {
        return Err(EvaluateError::EmptyClass("positive"));
    }
    if neg.is_empty() {
        return Err(EvaluateError::EmptyClass("negative"));
    }
    let denom = 2 * pos.len() as u64 * neg.len() as u64;
    Ok(mann_whitney_u2(pos, neg) as f64 / denom as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucScore {
    pub band: BandSpec,
    pub filter: usize,
    pub auc: f64,
    /// The condition filter `t` targets.
    pub positive: Condition,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Scores filter `t`: its target condition is the positive class.
pub fn auc_threshold_classifier(
    band: BandSpec,
    filter: usize,
    by_condition: &[Vec<f64>; 2],
) -> Result<AucScore, EvaluateError> {
    let positive = Condition::from_number(filter).expect("filter index is 1 or 2");
    let (pos, neg) = (&by_condition[positive.index()], &by_condition[1 - positive.index()]);
    Ok(AucScore {
        band,
        filter,
        auc: auc(pos, neg)?,
        positive,
        n_pos: pos.len(),
        n_neg: neg.len(),
    })
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme data points within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub min: f64,
    pub max: f64,
    pub n_outliers: usize,
}

impl BoxplotStats {
    pub fn from_values(values: &[f64]) -> Option<BoxplotStats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v
            .iter()
            .copied()
            .filter(|x| (lo_fence..=hi_fence).contains(x))
            .collect();
        Some(BoxplotStats {
            n: v.len(),
            median,
            q1,
            q3,
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            min: v[0],
            max: v[v.len() - 1],
            n_outliers: v.len() - inside.len(),
        })
    }
}

/// log₁₀ energies of one filter's CSP signals under both conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDistribution {
    pub band: BandSpec,
    pub filter: usize,
    /// Indexed by condition: preictal, interictal.
    #[serde(skip)]
    pub log_energies: [Vec<f64>; 2],
    pub stats: [Option<BoxplotStats>; 2],
    /// How many energies were at or below the floor.
    pub floored: [usize; 2],
}

pub fn log_energy(e: f64, floor: f64) -> (f64, bool) {
    if e > floor {
        (e.log10(), false)
    } else {
        (floor.log10(), true)
    }
}

pub fn summarize_distributions(
    by_condition: &[Vec<f64>; 2],
    band: BandSpec,
    filter: usize,
    floor: f64,
) -> EnergyDistribution {
    let mut floored = [0; 2];
    let log_energies: [Vec<f64>; 2] = std::array::from_fn(|s| {
        by_condition[s]
            .iter()
            .map(|&e| {
                let (l, f) = log_energy(e, floor);
                floored[s] += usize::from(f);
                l
            })
            .collect()
    });
    let stats = std::array::from_fn(|s| BoxplotStats::from_values(&log_energies[s]));
    EnergyDistribution {
        band,
        filter,
        log_energies,
        stats,
        floored,
    }
}

/// Filtered energies of every test window for one band, indexed
/// `[condition][filter - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandEnergies {
    pub band: BandSpec,
    pub energies: [[Vec<f64>; 2]; 2],
}

impl BandEnergies {
    /// Collects the energies from both conditions' search results.
    pub fn from_search(results: &[SearchResult]) -> Result<BandEnergies, EvaluateError> {
        let band = results
            .first()
            .map(|r| r.band)
            .ok_or(EvaluateError::EmptyClass("search"))?;
        let pick = |c: Condition| -> Result<[Vec<f64>; 2], EvaluateError> {
            let r = results
                .iter()
                .find(|r| r.condition == c)
                .ok_or_else(|| EvaluateError::MissingCondition {
                    band: band.name.to_string(),
                    condition: c,
                })?;
            Ok(std::array::from_fn(|t| {
                r.energies[t].iter().map(|e| e.energy).collect()
            }))
        };
        Ok(BandEnergies {
            band,
            energies: [pick(Condition::Preictal)?, pick(Condition::Interictal)?],
        })
    }

    /// Energies under filter `t`, indexed by condition.
    pub fn for_filter(&self, t: usize) -> [Vec<f64>; 2] {
        [self.energies[0][t - 1].clone(), self.energies[1][t - 1].clone()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCell {
    pub auc: AucScore,
    pub distribution: EnergyDistribution,
}

/// One cell per (band, filter), in band order then filter order.
pub fn evaluate_all(bands: &[BandEnergies], floor: f64) -> Result<Vec<EvaluationCell>, EvaluateError> {
    let jobs: Vec<(&BandEnergies, usize)> = bands.iter().flat_map(|b| [(b, 1), (b, 2)]).collect();
    jobs.par_iter()
        .map(|&(b, t)| {
            let by_condition = b.for_filter(t);
            Ok(EvaluationCell {
                auc: auc_threshold_classifier(b.band, t, &by_condition)?,
                distribution: summarize_distributions(&by_condition, b.band, t, floor),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct JsonCell<'a> {
    band: &'a str,
    filter: usize,
    auc: f64,
    positive: Condition,
    n_pos: usize,
    n_neg: usize,
    boxplot_stats: JsonStats<'a>,
    floored: JsonCounts,
}

#[derive(Serialize)]
struct JsonStats<'a> {
    preictal: &'a Option<BoxplotStats>,
    interictal: &'a Option<BoxplotStats>,
}

#[derive(Serialize)]
struct JsonCounts {
    preictal: usize,
    interictal: usize,
}

/// `evaluation.json` contents.
pub fn evaluation_json(cells: &[EvaluationCell]) -> String {
    let rows: Vec<JsonCell<'_>> = cells
        .iter()
        .map(|c| JsonCell {
            band: c.auc.band.name.as_str(),
            filter: c.auc.filter,
            auc: c.auc.auc,
            positive: c.auc.positive,
            n_pos: c.auc.n_pos,
            n_neg: c.auc.n_neg,
            boxplot_stats: JsonStats {
                preictal: &c.distribution.stats[0],
                interictal: &c.distribution.stats[1],
            },
            floored: JsonCounts {
                preictal: c.distribution.floored[0],
                interictal: c.distribution.floored[1],
            },
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows).expect("plain data serializes");
    s.push('\n');
    s
}

pub const EVALUATION_CSV_HEADER: &str =
    "band,filter,condition,auc,n,median,q1,q3,whisker_low,whisker_high,min,max,n_outliers,floored";

/// `evaluation.csv`: one row per (band, filter, condition).
pub fn evaluation_csv(cells: &[EvaluationCell]) -> String {
    let mut out = format!("{EVALUATION_CSV_HEADER}\n");
    for c in cells {
        for cond in Condition::BOTH {
            let i = cond.index();
            let _ = write!(out, "{},{},{},{}", c.auc.band.name, c.auc.filter, cond, c.auc.auc);
            match &c.distribution.stats[i] {
                Some(s) => {
                    let _ = write!(
                        out,
                        ",{},{},{},{},{},{},{},{},{}",
                        s.n, s.median, s.q1, s.q3, s.whisker_low, s.whisker_high, s.min, s.max, s.n_outliers
                    );
                }
                None => out.push_str(",0,,,,,,,,0"),
            }
            let _ = writeln!(out, ",{}", c.distribution.floored[i]);
        }
    }
    out
}
