use crate::error::{Error, Result};

/// The `tau`-expectile of `values`: the minimizer of
/// `sum |tau - 1[q < v]| (q - v)^2`.
pub fn expectile(values: &[f64], tau: f64) -> Result<f64> {
    let weighted: Vec<(f64, f64)> = values.iter().map(|&q| (q, 1.0)).collect();
    weighted_expectile(&weighted, tau)
}

/// Expectile of a multiset given as `(value, multiplicity)` pairs.
///
/// The first-order condition `tau * sum_{q >= v} w (q - v) = (1 - tau) *
/// sum_{q < v} w (v - q)` is piecewise linear and decreasing in `v`. After
/// sorting, the root is located between two adjacent values and solved
/// in closed form on that piece, where it is a weighted mean with weight
/// `tau` above and `1 - tau` below.
pub fn weighted_expectile(values: &[(f64, f64)], tau: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::param("expectile of an empty list"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::param(format!("tau {tau} outside (0, 1)")));
    }
    if values.iter().any(|(q, w)| !q.is_finite() || !w.is_finite() || *w <= 0.0) {
        return Err(Error::param("expectile needs finite values and positive weights"));
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted[0].0 == sorted[sorted.len() - 1].0 {
        return Ok(sorted[0].0);
    }

    // suffix sums over the sorted list: weight and weight * value at or above index k
    let n = sorted.len();
    let mut above_w = vec![0.0; n + 1];
    let mut above_wq = vec![0.0; n + 1];
    for k in (0..n).rev() {
        above_w[k] = above_w[k + 1] + sorted[k].1;
        above_wq[k] = above_wq[k + 1] + sorted[k].1 * sorted[k].0;
    }
    let total_w = above_w[0];
    let total_wq = above_wq[0];

    // Points strictly below the root are sorted[..k]; the root lies in
    // [sorted[k-1], sorted[k]]. Scan k upward until the candidate fits.
    let mut best = sorted[0].0;
    for k in 1..n {
        let below_w = total_w - above_w[k];
        let below_wq = total_wq - above_wq[k];
        let v = (tau * above_wq[k] + (1.0 - tau) * below_wq)
            / (tau * above_w[k] + (1.0 - tau) * below_w);
        let lo = sorted[k - 1].0;
        let hi = sorted[k].0;
        if v >= lo && v <= hi {
            return Ok(v);
        }
        best = if v < lo { lo } else { hi };
    }
    Ok(best)
}
