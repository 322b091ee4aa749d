//! Conditional variance of `log X` for a Poisson count, via associated
//! Stirling numbers.
//!
//! Expanding `log(1 + D)` with `D = (X − λ)/λ`, truncating at order `T`, and
//! using that `E[D^n | λ] = Σ_k S₂(n, k) λ^{k−n}` (where `S₂(n, k)` counts
//! partitions of an `n`-set into `k` blocks with no singletons) gives
//! `Var(log X | λ) ≈ Σ_{l=1}^{T−1} a_l λ^{−l}`. Each `λ^{−l}` is then
//! estimated by `1/((X+1)⋯(X+l))`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Number of partitions of an `n`-set into `k` blocks, none of them singletons.
pub fn assoc_stirling(n: usize, k: usize) -> BigUint {
    if n == 0 {
        return BigUint::from(u8::from(k == 0));
    }
    if k == 0 || 2 * k > n {
        return BigUint::zero();
    }
    // rows[m][j] = S₂(m, j); S₂(m, j) = j·S₂(m−1, j) + (m−1)·S₂(m−2, j−1)
    let mut rows: Vec<Vec<BigUint>> = vec![vec![BigUint::zero(); k + 1]; n + 1];
    rows[0][0] = BigUint::from(1u8);
    for m in 2..=n {
        for j in 1..=k.min(m / 2) {
            let a = &rows[m - 1][j] * BigUint::from(j);
            let b = &rows[m - 2][j - 1] * BigUint::from(m - 1);
            rows[m][j] = a + b;
        }
    }
    rows[n][k].clone()
}

/// Coefficients `a_1..a_{T−1}` of the conditional-variance series.
#[derive(Debug, Clone, PartialEq)]
pub struct CondVarCoeffs {
    order: usize,
    exact: Vec<BigRational>,
    values: Vec<f64>,
}

impl CondVarCoeffs {
    /// Truncation order `T`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `a_l` for `l = 1..T−1` at index `l − 1`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exact(&self) -> &[BigRational] {
        &self.exact
    }
}

fn stirling_rational(n: usize, k: i64) -> BigRational {
    if k < 0 {
        return BigRational::zero();
    }
    BigRational::from_integer(BigInt::from(assoc_stirling(n, k as usize)))
}

fn coefficient(l: usize, order: usize) -> BigRational {
    let mut total = BigRational::zero();
    for n in (l + 1)..=order.min(2 * l) {
        let mut inner_sum = BigRational::zero();
        for i in 1..n {
            let mut bracket = stirling_rational(n, (n - l) as i64);
            let lo = (i + n).div_ceil(2) as i64 - l as i64;
            let hi = (i / 2) as i64;
            for k in lo.max(0)..=hi {
                let rest = n as i64 - l as i64 - k;
                if rest < 0 {
                    continue;
                }
                bracket -= stirling_rational(i, k) * stirling_rational(n - i, rest);
            }
            inner_sum += bracket / BigRational::from_integer(BigInt::from(i * (n - i)));
        }
        if n % 2 == 0 {
            total += inner_sum;
        } else {
            total -= inner_sum;
        }
    }
    total
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<CondVarCoeffs>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<CondVarCoeffs>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Computes (once per order, then cached) the series coefficients for
/// truncation order `T ≥ 2`. Sums are exact rationals, converted at the end.
pub fn compute_condvar_coeffs(order: usize) -> Result<Arc<CondVarCoeffs>> {
    if order < 2 {
        return Err(Error::InvalidInput(format!(
            "conditional-variance truncation order must be >= 2, got {order}"
        )));
    }
    let mut guard = cache().lock().expect("coefficient cache poisoned");
    if let Some(c) = guard.get(&order) {
        return Ok(Arc::clone(c));
    }
    let exact: Vec<BigRational> = (1..order).map(|l| coefficient(l, order)).collect();
    let values = exact
        .iter()
        .map(|r| r.to_f64().unwrap_or(f64::NAN))
        .collect();
    let c = Arc::new(CondVarCoeffs {
        order,
        exact,
        values,
    });
    guard.insert(order, Arc::clone(&c));
    Ok(c)
}

/// `h̃(x) = Σ_l a_l Π_{j=1}^{l} (x + j)^{−1}`, approximately unbiased for
/// `Var(log X | λ)` when `λ` is not small.
pub fn log_condvar(x: u64, coeffs: &CondVarCoeffs) -> f64 {
    let xf = x as f64;
    let mut prod = 1.0;
    let mut acc = 0.0;
    for (idx, a) in coeffs.values.iter().enumerate() {
        prod /= xf + (idx + 1) as f64;
        acc += a * prod;
    }
    acc
}
