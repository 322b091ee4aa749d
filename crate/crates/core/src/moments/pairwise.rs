use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn xlogx(v: u64) -> f64 {
    if v == 0 {
        0.0
    } else {
        let f = v as f64;
        f * f.ln()
    }
}

/// log of `W = s^s / (2^s u^u v^v)` with `s = u + v` and `0⁰ = 1`.
fn log_weight(u: u64, v: u64) -> f64 {
    if u == v {
        return 0.0;
    }
    let s = u + v;
    xlogx(s) - s as f64 * std::f64::consts::LN_2 - xlogx(u) - xlogx(v)
}

/// Pairwise estimator of `e^{−2λ} λⁿ / n!` for one column of counts.
///
/// Every unordered pair of samples is weighted by the likelihood ratio that
/// both share one Poisson mean; the weighted fraction of pairs summing to
/// `n_index` estimates `e^{−2λ}(2λ)ⁿ/n!` and is scaled by `2^{−n}`.
/// Biased by construction. Not used by the default estimators.
pub fn pairwise_condvar(column: &[u64], n_index: u64) -> Result<f64> {
    if column.len() < 2 {
        return Err(Error::TooFewSamples(column.len()));
    }
    let mut freq: BTreeMap<u64, u64> = BTreeMap::new();
    for &x in column {
        *freq.entry(x).or_default() += 1;
    }
    let groups: Vec<(u64, f64)> = freq.into_iter().map(|(v, c)| (v, c as f64)).collect();

    // (log weight, number of pairs, sums to target?)
    let mut terms = Vec::with_capacity(groups.len() * (groups.len() + 1) / 2);
    for (a, &(u, cu)) in groups.iter().enumerate() {
        let same = cu * (cu - 1.0) / 2.0;
        if same > 0.0 {
            terms.push((log_weight(u, u), same, 2 * u == n_index));
        }
        for &(v, cv) in &groups[a + 1..] {
            terms.push((log_weight(u, v), cu * cv, u + v == n_index));
        }
    }
    let peak = terms
        .iter()
        .map(|t| t.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (lw, pairs, hit) in terms {
        let w = pairs * (lw - peak).exp();
        den += w;
        if hit {
            num += w;
        }
    }
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::InvalidInput(
            "pairwise weights are all zero".into(),
        ));
    }
    Ok(num / den * 2f64.powi(-(n_index.min(i32::MAX as u64) as i32)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_column() {
        for k in 0..6u64 {
            let col = vec![k; 7];
            assert_eq!(pairwise_condvar(&col, 2 * k).unwrap(), 2f64.powi(-2 * k as i32));
            assert_eq!(pairwise_condvar(&col, 2 * k + 1).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_zero_pair() {
        assert_eq!(pairwise_condvar(&[0, 0], 0).unwrap(), 1.0);
        assert!(pairwise_condvar(&[3], 3).is_err());
    }

    #[test]
    fn weights_are_likelihood_ratios() {
        assert_eq!(log_weight(4, 4), 0.0);
        // (0, 3): 3^3 / (2^3 · 27) = 1/8
        assert!((log_weight(0, 3) - (0.125f64).ln()).abs() < 1e-14);
        // far apart pairs underflow in linear space but still normalise
        let v = pairwise_condvar(&[0, 2000], 2000).unwrap();
        assert!(v.is_finite());
    }
}
