//! Spread of allowed transition energies and related spectrum summaries.

use crate::hamiltonian::EigenSystem;
use crate::jump::FrequencyResolvedOps;

/// Name of the quantile rule, echoed into run reports.
pub const QUANTILE_RULE: &str = "linear interpolation between order statistics (position q·(n-1))";

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile_linear(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Positive transition frequencies reached by at least one coupling, ascending and distinct.
pub fn allowed_gaps(ops: &[FrequencyResolvedOps]) -> Vec<f64> {
    let mut idx: Vec<(usize, f64)> =
        ops.iter().flat_map(|op| op.components.iter().filter(|c| c.omega > 0.0).map(|c| (c.index, c.omega))).collect();
    idx.sort_by_key(|&(i, _)| i);
    idx.dedup_by_key(|&mut (i, _)| i);
    idx.into_iter().map(|(_, w)| w).collect()
}

/// Interquartile range of the allowed transition energies; `None` with fewer than two.
pub fn gap_iqr(_eig: &EigenSystem, ops: &[FrequencyResolvedOps]) -> Option<f64> {
    iqr(&allowed_gaps(ops))
}

pub fn iqr(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_linear(&v, 0.75)? - quantile_linear(&v, 0.25)?)
}

/// True when two distinct positive gaps lie within `10·gamma` of each other.
pub fn is_congested(eig: &EigenSystem, gamma: f64) -> bool {
    eig.gaps.windows(2).any(|w| (w[1] - w[0]).abs() < 10.0 * gamma)
}
