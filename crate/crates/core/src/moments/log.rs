use crate::error::{Error, Result};

/// Parameters of the truncated-series estimator of `log λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogParams {
    /// Expansion centre `a > 0`.
    pub center: f64,
    /// Truncation order `N ≥ 1`.
    pub order: u32,
    /// Counts at or above this use `log x` directly.
    pub switch: u64,
}

impl Default for LogParams {
    fn default() -> Self {
        Self {
            center: 3.0,
            order: 4,
            switch: 7,
        }
    }
}

impl LogParams {
    pub fn new(center: f64, order: u32, switch: u64) -> Result<Self> {
        if !(center.is_finite() && center > 0.0) {
            return Err(Error::InvalidInput(format!(
                "log centre must be > 0, got {center}"
            )));
        }
        if order < 1 || switch < 1 {
            return Err(Error::InvalidInput(
                "log truncation order and switch threshold must be >= 1".into(),
            ));
        }
        Ok(Self {
            center,
            order,
            switch,
        })
    }
}

/// Estimator of `log λ` from a Poisson count.
///
/// Below the switch threshold this is the unbiased estimator of the
/// `N`-term Taylor polynomial of `log λ` about `a`,
///
/// `log a + Σ_{m=1}^{N} (−1)^{m+1} (λ/a − 1)^m / m`,
///
/// which after replacing `λ^i` by the falling factorial `x^{(i)}` gives
///
/// `g(x) = log a − H_N − Σ_{i=1}^{x∧N} (−1)^i x^{(i)} a^{−i} Σ_{m=i}^{N} C(m,i)/m`.
///
/// At and above the threshold `g(x) = log x`.
pub fn log_g(x: u64, params: &LogParams) -> f64 {
    if x >= params.switch {
        return (x as f64).ln();
    }
    let a = params.center;
    let order = params.order as u64;
    let harmonic: f64 = (1..=order).map(|m| 1.0 / m as f64).sum();
    let mut value = a.ln() - harmonic;
    let mut fall = 1.0;
    let mut a_pow = 1.0;
    for i in 1..=x.min(order) {
        fall *= (x - i + 1) as f64;
        a_pow *= a;
        let mut inner = 0.0;
        let mut binom = 1.0; // C(i, i)
        for m in i..=order {
            if m > i {
                binom = binom * m as f64 / (m - i) as f64;
            }
            inner += binom / m as f64;
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        value -= sign * fall / a_pow * inner;
    }
    value
}

/// [`log_g`] with the sub-threshold branch tabulated.
#[derive(Debug, Clone, PartialEq)]
pub struct LogG {
    table: Vec<f64>,
}

impl LogG {
    pub fn new(params: &LogParams) -> Self {
        Self {
            table: (0..params.switch).map(|x| log_g(x, params)).collect(),
        }
    }

    #[inline]
    pub fn eval(&self, x: u64) -> f64 {
        match self.table.get(x as usize) {
            Some(&v) => v,
            None => (x as f64).ln(),
        }
    }
}
