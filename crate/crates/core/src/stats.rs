//! Two-sample Wilcoxon rank-sum test and small summary helpers.
//!
//! For samples with at most [`EXACT_LIMIT`] observations per side the
//! two-sided p-value is computed by exact enumeration of all rank
//! assignments (midranks for ties); larger samples use the normal
//! approximation with tie-corrected variance.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Largest per-side sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 10;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("rank-sum test requires non-empty samples on both sides")]
    EmptySample,
    #[error("samples must not contain NaN")]
    NanSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSumMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone)]
pub struct RankSumResult {
    /// Rank sum of the first sample (midranks under ties).
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: RankSumMethod,
}

/// Midranks of the pooled sample, in pooled order (`a` then `b`).
fn midranks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len();
    let mut order: Vec<usize> = (0..n).collect();
    let val = |i: usize| if i < a.len() { a[i] } else { b[i - a.len()] };
    order.sort_by(|&i, &j| val(i).partial_cmp(&val(j)).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && val(order[j]) == val(order[i]) {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0; // average of 1-based ranks i+1..=j
        for k in i..j {
            ranks[order[k]] = r;
        }
        i = j;
    }
    ranks
}

/// Two-sided Wilcoxon rank-sum test of `a` versus `b`.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(StatsError::NanSample);
    }
    let ranks = midranks(a, b);
    let w: f64 = ranks[..a.len()].iter().sum();
    if a.len() <= EXACT_LIMIT && b.len() <= EXACT_LIMIT {
        let p = exact_two_sided(&ranks, a.len(), w);
        Ok(RankSumResult { statistic: w, p_value: p, method: RankSumMethod::Exact })
    } else {
        let p = normal_two_sided(&ranks, a.len(), b.len(), w);
        Ok(RankSumResult { statistic: w, p_value: p, method: RankSumMethod::NormalApprox })
    }
}

/// Exact two-sided p-value: fraction of the C(n, n1) rank assignments whose
/// rank sum is at least as far from its mean as the observed one. Midrank
/// sums are exact in binary (multiples of 1/2), so the comparison is exact.
fn exact_two_sided(ranks: &[f64], n1: usize, w_obs: f64) -> f64 {
    let n = ranks.len();
    let mean = n1 as f64 * (n + 1) as f64 / 2.0;
    let dev_obs = (w_obs - mean).abs();
    let mut extreme: u64 = 0;
    let mut total: u64 = 0;
    // iterate all n1-subsets of 0..n in lexicographic order
    let mut idx: Vec<usize> = (0..n1).collect();
    loop {
        let w: f64 = idx.iter().map(|&i| ranks[i]).sum();
        if (w - mean).abs() >= dev_obs {
            extreme += 1;
        }
        total += 1;
        // advance combination
        let mut i = n1;
        loop {
            if i == 0 {
                return extreme as f64 / total as f64;
            }
            i -= 1;
            if idx[i] != i + n - n1 {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..n1 {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn normal_two_sided(ranks: &[f64], n1: usize, n2: usize, w_obs: f64) -> f64 {
    let n = (n1 + n2) as f64;
    let mean = n1 as f64 * (n + 1.0) / 2.0;
    // tie correction: sum of (t^3 - t) over tie groups
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = (n1 as f64 * n2 as f64 / 12.0) * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0; // all observations tied
    }
    let z = (w_obs - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0)
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Mean and (sample) standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "mean of empty sample");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples_give_exact_p_of_one_tenth() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.method, RankSumMethod::Exact);
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [2.0, 2.0, 2.0, 2.0];
        let r = wilcoxon_rank_sum(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        // normal path with all ties
        let big: Vec<f64> = vec![1.0; 20];
        let r = wilcoxon_rank_sum(&big, &big).unwrap();
        assert_eq!(r.method, RankSumMethod::NormalApprox);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(wilcoxon_rank_sum(&[], &[1.0]).is_err());
        assert!(wilcoxon_rank_sum(&[1.0], &[]).is_err());
    }

    #[test]
    fn normal_approx_detects_shift() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64 + 20.0).collect();
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(r.method, RankSumMethod::NormalApprox);
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn midranks_average_tied_positions() {
        // pooled: [1, 2, 2, 3] -> ranks [1, 2.5, 2.5, 4]
        let r = midranks(&[1.0, 2.0], &[2.0, 3.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn median_and_mean_sd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, s) = mean_sd(&[2.0, 4.0]);
        assert_eq!(m, 3.0);
        assert!((s - (2.0f64).sqrt()).abs() < 1e-15);
    }
}
