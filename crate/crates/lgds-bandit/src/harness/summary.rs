//! Summary statistics for benchmark cells: lower-median and
//! linear-interpolation quartiles.

use crate::policies::PolicyId;

/// Lower median: for even counts, the smaller of the two middle values.
pub fn lower_median(sorted: &[f64]) -> f64 {
    assert!(!sorted.is_empty());
    sorted[(sorted.len() - 1) / 2]
}

/// Linear-interpolation quantile (the convention where the quantile of a
/// sorted sample interpolates between order statistics at h = q(n-1)).
pub fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// One (policy, metric) cell of a benchmark summary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SummaryCell {
    pub policy: PolicyId,
    pub median: f64,
    pub iqr: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
    pub excluded: usize,
    /// Episodes whose oracle regret was too small to normalize by.
    pub unnormalizable: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SummaryTable {
    pub cells: Vec<SummaryCell>,
    pub total_episodes: usize,
    pub excluded_episodes: usize,
}

impl SummaryTable {
    pub fn cell(&self, policy: PolicyId) -> Option<&SummaryCell> {
        self.cells.iter().find(|c| c.policy == policy)
    }
}

/// Builds one summary cell from a cell's normalized-regret values.
pub fn summarize_cell(
    policy: PolicyId,
    values: &[f64],
    excluded: usize,
    unnormalizable: usize,
) -> Option<SummaryCell> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in summary"));
    let q1 = quantile_linear(&sorted, 0.25);
    let q3 = quantile_linear(&sorted, 0.75);
    Some(SummaryCell {
        policy,
        median: lower_median(&sorted),
        iqr: q3 - q1,
        q1,
        q3,
        count: sorted.len(),
        excluded,
        unnormalizable,
    })
}

/// Box-plot statistics with whiskers at the most extreme data points
/// within 1.5 IQR of the quartiles.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in box stats"));
    let q1 = quantile_linear(&sorted, 0.25);
    let q3 = quantile_linear(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = sorted.iter().cloned().find(|&v| v >= lo_fence).unwrap_or(q1);
    let whisker_hi = sorted
        .iter()
        .rev()
        .cloned()
        .find(|&v| v <= hi_fence)
        .unwrap_or(q3);
    let outliers = sorted
        .iter()
        .cloned()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();
    Some(BoxStats {
        median: lower_median(&sorted),
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        outliers,
    })
}
