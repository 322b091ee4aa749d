//! Univariate Poisson moment machinery.
//!
//! For a target transform `f` of a Poisson mean `λ`, an unbiased estimator
//! `g(X)` has `g(n)/n!` equal to the Taylor coefficients of `e^λ f(λ)`, and the
//! binomial self-convolution `h` of `g` carries the coefficients of
//! `e^{2λ} f(λ)²`. Those two tables are enough to correct the diagonal of the
//! sample covariance of `g(X)` for Poisson noise.

mod log;
mod pairwise;
mod stirling;

pub use log::{log_g, LogG, LogParams};
pub use pairwise::pairwise_condvar;
pub use stirling::{assoc_stirling, compute_condvar_coeffs, log_condvar, CondVarCoeffs};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A polynomial `f(λ) = Σ c_j λ^j`, coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Trailing zero coefficients are dropped; the remaining degree must be ≥ 1.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients".into()));
        }
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput(
                "polynomial transform needs degree >= 1".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &c)| j as f64 * c)
            .collect()
    }

    /// Whether `f` is strictly increasing on `[0, ∞)`.
    ///
    /// Up to degree 3 this is decided from `f′` in closed form (sign of the
    /// leading coefficient plus the discriminant for the quadratic `f′`).
    /// Higher degrees scan `f′` over `[0, R]` with `R` the Cauchy root bound.
    pub fn is_strictly_increasing(&self) -> bool {
        let d = self.derivative();
        let lead = *d.last().expect("degree >= 1");
        if lead <= 0.0 {
            return false;
        }
        match d.len() {
            1 => true,
            2 => d[0] >= 0.0,
            3 => {
                let (c, b, a) = (d[0], d[1], d[2]);
                let disc = b * b - 4.0 * a * c;
                disc < 0.0 || (c >= 0.0 && b >= 0.0)
            }
            _ => {
                let bound = 1.0 + d.iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
                let eval = |x: f64| d.iter().rev().fold(0.0, |acc, &c| acc * x + c);
                let steps = 20_000;
                (1..=steps).all(|i| eval(bound * i as f64 / steps as f64) > 0.0) && eval(0.0) >= 0.0
            }
        }
    }

    /// `g(n) = Σ_j c_j n!/(n−j)!`, the unbiased estimator of `f(λ)`.
    pub fn g(&self, n: u64) -> f64 {
        falling_sum(&self.coeffs, n)
    }

    /// `Σ_j c_j n^{(j)} g(n − j)`, an unbiased estimator of `f(λ)²`.
    ///
    /// Equals the alternating sum in [`condvar_eq1_term`] with the `h` table of
    /// this polynomial, but without the cancellation: the exponential
    /// generating function of that sum is `e^{−λ}(e^λ f)² = f · e^λ f`.
    pub fn unbiased_square(&self, n: u64) -> f64 {
        let mut fall = 1.0;
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate() {
            let j = j as u64;
            if j > n {
                break;
            }
            if j > 0 {
                fall *= (n - j + 1) as f64;
            }
            acc += c * fall * self.g(n - j);
        }
        acc
    }
}

fn falling_sum(coeffs: &[f64], n: u64) -> f64 {
    let mut fall = 1.0;
    let mut acc = 0.0;
    for (j, &c) in coeffs.iter().enumerate() {
        let j = j as u64;
        if j > n {
            break;
        }
        if j > 0 {
            fall *= (n - j + 1) as f64;
        }
        acc += c * fall;
    }
    acc
}

/// Target transform of the latent means.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Identity,
    Polynomial(Polynomial),
    Log(LogParams),
    /// A user-supplied table `g(0..=n_max)`.
    CustomTaylor(Vec<f64>),
}

impl Transform {
    pub fn log_default() -> Self {
        Transform::Log(LogParams::default())
    }

    pub fn tag(&self) -> crate::TransformTag {
        use crate::TransformTag as T;
        match self {
            Transform::Identity => T::Identity,
            Transform::Polynomial(_) => T::Polynomial,
            Transform::Log(_) => T::Log,
            Transform::CustomTaylor(_) => T::CustomTaylor,
        }
    }

    /// `f(λ)`; `None` for custom tables, which carry no closed form.
    pub fn forward(&self, lambda: f64) -> Option<f64> {
        match self {
            Transform::Identity => Some(lambda),
            Transform::Polynomial(poly) => Some(poly.eval(lambda)),
            Transform::Log(_) => Some(lambda.ln()),
            Transform::CustomTaylor(_) => None,
        }
    }

    /// The transform applied directly to a count, with zero counts replaced
    /// by `zero_sub` under the log transform.
    pub fn naive(&self, x: u64, zero_sub: f64) -> f64 {
        match self {
            Transform::Log(_) if x == 0 => zero_sub.ln(),
            _ => self.forward(x as f64).unwrap_or(x as f64),
        }
    }
}

/// Table of `g(n) = Σ_j c_j n!/(n−j)!` for `n = 0..=n_max`.
pub fn poly_to_g(coeffs: &[f64], n_max: usize) -> Vec<f64> {
    (0..=n_max as u64).map(|n| falling_sum(coeffs, n)).collect()
}

pub(crate) fn to_rational(x: f64, what: &str) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::NonFinite(what.to_string()))
}

fn rational_to_f64(r: &BigRational, what: &str) -> Result<f64> {
    match r.to_f64() {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonFinite(what.to_string())),
    }
}

fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * BigInt::from(n - k) / BigInt::from(k + 1);
        row.push(c.clone());
    }
    row
}

fn exact_h(g: &[BigRational]) -> Vec<BigRational> {
    (0..g.len())
        .map(|n| {
            let binom = binomial_row(n);
            let mut acc = BigRational::zero();
            for m in 0..=n {
                acc += &g[m] * &g[n - m] * BigRational::from_integer(binom[m].clone());
            }
            acc
        })
        .collect()
}

/// `h(n) = Σ_{m=0}^{n} C(n,m) g(m) g(n−m)`, the Taylor coefficients (times
/// `n!`) of `e^{2λ} f(λ)²`.
///
/// Accumulated exactly in rational arithmetic, rounded once at the end.
pub fn conv_h(g_table: &[f64]) -> Result<Vec<f64>> {
    let g = g_table
        .iter()
        .map(|&v| to_rational(v, "g table"))
        .collect::<Result<Vec<_>>>()?;
    exact_h(&g)
        .iter()
        .map(|v| rational_to_f64(v, "h table"))
        .collect()
}

/// Unbiased estimator of `e^{−λ} λⁿ / n!`: one when `x == n`.
pub fn s_indicator(x: u64, n: u64) -> f64 {
    if x == n {
        1.0
    } else {
        0.0
    }
}

/// Unbiased estimator of `e^{−2λ} λⁿ / n!`: `(−1)^{x−n} C(x, n)`.
///
/// Its variance grows quickly with `λ`, which is why the alternating route
/// for the conditional variance is only practical at small counts.
pub fn t_alternating(x: u64, n: u64) -> Result<f64> {
    if n > x {
        return Ok(0.0);
    }
    let k = n.min(x - n);
    let mut c = 1.0_f64;
    for i in 0..k {
        c = c * (x - i) as f64 / (i + 1) as f64;
    }
    if !c.is_finite() {
        return Err(Error::NonFinite(format!("C({x}, {n})")));
    }
    Ok(if (x - n).is_multiple_of(2) { c } else { -c })
}

/// Per-observation term of the conditional-variance correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondVarTerm {
    pub value: f64,
    /// Set when some partial sum exceeded `1e8 × |value|`.
    pub cancellation: bool,
}

/// `Σ_{k=0}^{x} (−1)^{x−k} C(x,k) h(k)` evaluated in floating point.
pub fn condvar_eq1_term(x: u64, h_table: &[f64]) -> Result<CondVarTerm> {
    let x_us = x as usize;
    if h_table.len() <= x_us {
        return Err(Error::DimensionMismatch {
            what: "h table length",
            expected: x_us + 1,
            found: h_table.len(),
        });
    }
    let mut binom = 1.0_f64;
    let mut acc = 0.0_f64;
    let mut peak = 0.0_f64;
    for k in 0..=x_us {
        if k > 0 {
            binom = binom * (x_us - k + 1) as f64 / k as f64;
        }
        let term = binom * h_table[k];
        if (x_us - k).is_multiple_of(2) {
            acc += term;
        } else {
            acc -= term;
        }
        peak = peak.max(acc.abs());
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite(format!(
            "conditional-variance term at x = {x}; use the log transform or the identity transform"
        )));
    }
    Ok(CondVarTerm {
        value: acc,
        cancellation: peak > 1e8 * acc.abs(),
    })
}

/// Exact values of [`condvar_eq1_term`] for every `x` in `0..=n_max` of a
/// `g` table, computed in rational arithmetic so cancellation cannot occur.
pub fn condvar_terms_exact(g_table: &[f64]) -> Result<Vec<f64>> {
    let g = g_table
        .iter()
        .map(|&v| to_rational(v, "g table"))
        .collect::<Result<Vec<_>>>()?;
    let h = exact_h(&g);
    (0..h.len())
        .map(|x| {
            let binom = binomial_row(x);
            let mut acc = BigRational::zero();
            for k in 0..=x {
                let term = &h[k] * BigRational::from_integer(binom[k].clone());
                if (x - k) % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            rational_to_f64(&acc, "conditional-variance term")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn g_for_monomials() {
        let g = poly_to_g(&[0.0, 0.0, 1.0], 6);
        for (n, v) in g.iter().enumerate() {
            assert_eq!(*v, (n * n.saturating_sub(1)) as f64);
        }
        assert_eq!(poly_to_g(&[2.5], 4), vec![2.5; 5]);
        let g = poly_to_g(&[0.0, 1.0, 1.0], 8);
        for (n, v) in g.iter().enumerate() {
            assert_eq!(*v, (n * n) as f64);
        }
    }

    #[test]
    fn h_examples() {
        let g: Vec<f64> = (0..12).map(|n| n as f64).collect();
        let h = conv_h(&g).unwrap();
        assert_eq!(h[0], 0.0);
        assert_eq!(h[1], 0.0);
        assert_eq!(h[2], 2.0);
        for n in 2..12 {
            assert_eq!(h[n], (n * (n - 1)) as f64 * 2f64.powi(n as i32 - 2));
        }
        let h = conv_h(&[1.0; 10]).unwrap();
        for (n, v) in h.iter().enumerate() {
            assert_eq!(*v, 2f64.powi(n as i32));
        }
        assert!(conv_h(&[0.0; 7]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn h_is_taylor_series_of_squared_tilt() {
        let poly = Polynomial::new(vec![1.0, -0.5, 0.25]).unwrap();
        let n_max = 40;
        let g = poly_to_g(poly.coeffs(), n_max);
        let h = conv_h(&g).unwrap();
        for lam in [0.3, 1.0, 2.0] {
            let mut term = 1.0;
            let mut s = 0.0;
            for (n, hn) in h.iter().enumerate() {
                if n > 0 {
                    term *= lam / n as f64;
                }
                s += hn * term;
            }
            let target = (2.0 * lam).exp() * poly.eval(lam).powi(2);
            assert!((s - target).abs() <= 1e-10 * target.abs().max(1.0), "lam={lam}");
        }
    }

    #[test]
    fn indicator_and_alternating() {
        assert_eq!(s_indicator(5, 5), 1.0);
        assert_eq!(s_indicator(5, 4), 0.0);
        for n in 0..20 {
            assert_eq!(t_alternating(n, n).unwrap(), 1.0);
            assert_eq!(t_alternating(n + 1, n).unwrap(), -((n + 1) as f64));
        }
        assert_eq!(t_alternating(3, 5).unwrap(), 0.0);
        assert_eq!(t_alternating(10, 4).unwrap(), 210.0);
        assert!(t_alternating(5000, 2500).is_err());
    }

    #[test]
    fn condvar_term_examples() {
        let g: Vec<f64> = (0..8).map(|n| n as f64).collect();
        let h = conv_h(&g).unwrap();
        assert_eq!(condvar_eq1_term(0, &h).unwrap().value, g[0] * g[0]);
        assert_eq!(condvar_eq1_term(2, &h).unwrap().value, 2.0);
        assert_eq!(condvar_eq1_term(3, &h).unwrap().value, 6.0);
        assert!(condvar_eq1_term(9, &h).is_err());
    }

    #[test]
    fn eq1_cancellation_is_flagged() {
        let g: Vec<f64> = (0..=80).map(|n| n as f64).collect();
        let h = conv_h(&g).unwrap();
        let t = condvar_eq1_term(80, &h).unwrap();
        assert!(t.cancellation);
        let exact = condvar_terms_exact(&g).unwrap();
        assert_eq!(exact[80], 80.0 * 79.0);
    }

    #[test]
    fn exact_and_polynomial_routes_agree() {
        let poly = Polynomial::new(vec![0.0, 16.0, -0.4, 0.004]).unwrap();
        let g = poly_to_g(poly.coeffs(), 25);
        let exact = condvar_terms_exact(&g).unwrap();
        let h = conv_h(&g).unwrap();
        for x in 0..=25u64 {
            let direct = poly.unbiased_square(x);
            assert_abs_diff_eq!(exact[x as usize], direct, epsilon = 1e-9 * direct.abs().max(1.0));
            if x <= 10 {
                let lit = condvar_eq1_term(x, &h).unwrap().value;
                assert_abs_diff_eq!(lit, direct, epsilon = 1e-6 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn monotonicity_check() {
        let cubic = Polynomial::new(vec![0.0, 16.0, -0.4, 0.004]).unwrap();
        assert!(cubic.is_strictly_increasing());
        assert!(!Polynomial::new(vec![0.0, 1.0, -1.0]).unwrap().is_strictly_increasing());
        assert!(!Polynomial::new(vec![0.0, 1.0, -3.0, 1.0]).unwrap().is_strictly_increasing());
        assert!(Polynomial::new(vec![0.0, 1.0, 0.0, 0.0, 1.0]).unwrap().is_strictly_increasing());
        assert!(Polynomial::new(vec![1.0]).is_err());
        assert!(Polynomial::new(vec![1.0, 2.0, 0.0]).unwrap().degree() == 1);
    }
}
