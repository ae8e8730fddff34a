//! Detection probability oracle, truth-table enumeration, and replicate
//! aggregation.
//!
//! The closed-form oracle and the exhaustive enumeration are two
//! independent routes to the same quantity: the probability that a
//! randomizing equivocator is caught by at least one of `h` honest
//! parent–child pairs. Keeping both routes exact (rational arithmetic,
//! no floats until the reporting boundary) makes their agreement a
//! strict equality test.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::protocol::{NodeId, TxId};
use crate::simnet::IterationReport;

/// Largest pair count for which the truth table is materialized.
pub const MAX_ENUMERATED_PAIRS: u32 = 20;

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum AnalysisError {
    #[error("pair count must be at least 1")]
    NoPairs,
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(u32),
    #[error("truth table for {0} pairs exceeds the {MAX_ENUMERATED_PAIRS}-pair guard")]
    TableTooLarge(u32),
    #[error("k^h does not fit exact arithmetic for h = {0}")]
    RatioInfeasible(u32),
    #[error("cannot aggregate an empty replicate list")]
    EmptyAggregate,
}

/// Probability that a sender drawing independent uniform symbols from an
/// alphabet of size `k` is observed equivocating by at least one of `h`
/// honest parent–child pairs, as an exact fraction.
///
/// Each pair receives two independent symbols, equal with probability
/// `1/k`, so the miss probability over `h` independent pairs is
/// `(1/k)^h` and the detection probability is `1 - (1/k)^h`.
pub fn detection_probability_ratio(h: u32, k: u32) -> Result<(u128, u128), AnalysisError> {
    if h == 0 {
        return Err(AnalysisError::NoPairs);
    }
    if k < 2 {
        return Err(AnalysisError::AlphabetTooSmall(k));
    }
    let den = (k as u128)
        .checked_pow(h)
        .ok_or(AnalysisError::RatioInfeasible(h))?;
    Ok((den - 1, den))
}

/// [`detection_probability_ratio`] at the reporting boundary. Falls back
/// to floating point when the exact fraction does not fit 128 bits.
pub fn detection_probability(h: u32, k: u32) -> Result<f64, AnalysisError> {
    match detection_probability_ratio(h, k) {
        Ok((num, den)) => Ok(num as f64 / den as f64),
        Err(AnalysisError::RatioInfeasible(_)) => Ok(1.0 - (1.0 / k as f64).powi(h as i32)),
        Err(e) => Err(e),
    }
}

/// One observation per honest pair: the pair saw equal copies (`e`) or
/// different copies (`d`).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Observation {
    Equal,
    Different,
}

/// The exhaustive table of equal/different observations over `h` pairs.
#[derive(Clone, Debug)]
pub struct TruthTable {
    pub pairs: u32,
    /// One entry per row; bit `i` set means pair `i` observed `d`.
    pub rows: Vec<u32>,
    /// Number of rows containing at least one `d`.
    pub detecting_rows: u64,
}

impl TruthTable {
    pub fn row(&self, index: usize) -> Vec<Observation> {
        let bits = self.rows[index];
        (0..self.pairs)
            .map(|i| {
                if bits & (1 << i) != 0 {
                    Observation::Different
                } else {
                    Observation::Equal
                }
            })
            .collect()
    }

    /// Renders a row as the symbols `e`/`d`, most significant pair first.
    pub fn render_row(&self, index: usize) -> String {
        self.row(index)
            .iter()
            .map(|o| match o {
                Observation::Equal => 'e',
                Observation::Different => 'd',
            })
            .collect()
    }
}

/// Enumerates all `2^h` observation rows over `h` honest pairs and
/// counts the rows that detect (contain at least one `d`).
///
/// Rows are emitted in ascending bit order, so row 0 is the all-`e`
/// (non-detecting) row and every other row detects: the count is always
/// `2^h - 1`, which is exactly what the closed-form oracle predicts for
/// a binary alphabet.
pub fn enumerate_outcomes(h: u32) -> Result<TruthTable, AnalysisError> {
    if h == 0 {
        return Err(AnalysisError::NoPairs);
    }
    if h > MAX_ENUMERATED_PAIRS {
        return Err(AnalysisError::TableTooLarge(h));
    }
    let total: u64 = 1 << h;
    let rows: Vec<u32> = (0..total as u32).collect();
    let detecting_rows = rows.iter().filter(|&&bits| bits != 0).count() as u64;
    Ok(TruthTable {
        pairs: h,
        rows,
        detecting_rows,
    })
}

/// Everything measured over one scenario run (one seed).
#[derive(Clone, PartialEq, Debug)]
pub struct RunMetrics {
    /// Per-iteration reports, in iteration order.
    pub reports: Vec<IterationReport>,
    /// Share of Byzantine nodes on the intersection of all honest
    /// blacklists at the last pre-reset measurement point (1.0 when
    /// `t = 0`, by convention).
    pub final_detection_fraction: f64,
    /// Detection fractions sampled immediately before each blacklist
    /// reset (or at the final iteration when resets are disabled).
    pub pre_reset_fractions: Vec<f64>,
    /// Total broadcast operations over the whole run.
    pub total_messages: u64,
    /// Total point-to-point deliveries over the whole run.
    pub total_deliveries: u64,
    /// First iteration (1-based) at which each Byzantine node appeared
    /// on every honest blacklist; absent if never detected.
    pub detection_latency: BTreeMap<NodeId, u64>,
    /// Byzantine nodes never detected during the run.
    pub never_detected: Vec<NodeId>,
    /// Transactions committed by every honest parent, in commit order.
    pub committed: Vec<TxId>,
}

impl RunMetrics {
    /// Mean of the pre-reset detection fraction samples.
    pub fn mean_pre_reset_fraction(&self) -> f64 {
        if self.pre_reset_fractions.is_empty() {
            return self.final_detection_fraction;
        }
        self.pre_reset_fractions.iter().sum::<f64>() / self.pre_reset_fractions.len() as f64
    }
}

/// Aggregate statistics over replicates of one scenario.
#[derive(Clone, PartialEq, Debug)]
pub struct Summary {
    pub replicates: usize,
    pub mean_detection_fraction: f64,
    pub min_detection_fraction: f64,
    pub max_detection_fraction: f64,
    pub mean_pre_reset_fraction: f64,
    pub total_messages: u64,
    pub total_deliveries: u64,
    pub mean_messages_per_iteration: f64,
    /// Percentiles of detection latency (iterations until a Byzantine
    /// node is on every honest blacklist), over all detected nodes in
    /// all replicates.
    pub latency_p50: Option<u64>,
    pub latency_p95: Option<u64>,
    pub latency_max: Option<u64>,
    /// Count of (node, replicate) pairs never detected.
    pub never_detected: u64,
}

/// Elementwise statistics over replicates. All outputs are symmetric
/// functions of the input, so the result does not depend on replicate
/// order.
pub fn aggregate(replicates: &[RunMetrics]) -> Result<Summary, AnalysisError> {
    if replicates.is_empty() {
        return Err(AnalysisError::EmptyAggregate);
    }
    let n = replicates.len();
    // Sorting before every float reduction keeps the summary strictly
    // permutation-invariant (f64 addition is not associative).
    let mut fractions: Vec<f64> = replicates
        .iter()
        .map(|r| r.final_detection_fraction)
        .collect();
    fractions.sort_unstable_by(f64::total_cmp);
    let mut pre_reset_means: Vec<f64> = replicates
        .iter()
        .map(|r| r.mean_pre_reset_fraction())
        .collect();
    pre_reset_means.sort_unstable_by(f64::total_cmp);
    let total_messages: u64 = replicates.iter().map(|r| r.total_messages).sum();
    let total_deliveries: u64 = replicates.iter().map(|r| r.total_deliveries).sum();
    let total_iterations: usize = replicates.iter().map(|r| r.reports.len()).sum();

    let mut latencies: Vec<u64> = replicates
        .iter()
        .flat_map(|r| r.detection_latency.values().copied())
        .collect();
    latencies.sort_unstable();
    let percentile = |p: f64| -> Option<u64> {
        if latencies.is_empty() {
            return None;
        }
        let idx = ((latencies.len() as f64 - 1.0) * p).round() as usize;
        Some(latencies[idx])
    };

    Ok(Summary {
        replicates: n,
        mean_detection_fraction: fractions.iter().sum::<f64>() / n as f64,
        min_detection_fraction: fractions.iter().copied().fold(f64::INFINITY, f64::min),
        max_detection_fraction: fractions.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_pre_reset_fraction: pre_reset_means.iter().sum::<f64>() / n as f64,
        total_messages,
        total_deliveries,
        mean_messages_per_iteration: if total_iterations == 0 {
            0.0
        } else {
            total_messages as f64 / total_iterations as f64
        },
        latency_p50: percentile(0.5),
        latency_p95: percentile(0.95),
        latency_max: latencies.last().copied(),
        never_detected: replicates.iter().map(|r| r.never_detected.len() as u64).sum(),
    })
}
