//! Estimators over ensembles and their comparison with predictions.
//!
//! Every reduction sums in trajectory order with a fixed pairwise tree, so
//! results do not depend on the number of worker threads.

mod cf;
mod density;
mod moments;
mod report;

pub use cf::{empirical_char_fn, EmpiricalCF};
pub use density::{density_l1_compare, histogram_l1, null_l1_floor, BinnedPrediction, Binning};
pub use moments::{mean_drift_factor, moment_report, position_moments, PositionMoments};
pub use report::{summary_table, write_json_lines, ComparisonReport, Metric, Verdict};

/// Sum with a fixed pairwise association.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Pairwise sum of `f` applied to `0..n`, without materializing the terms.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= 32 {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_forms_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(pairwise_sum(&xs), pairwise_sum_by(xs.len(), &|i| xs[i]));
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }
}
