#![allow(dead_code)]

use ndarray::{Array1, Array2};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Counts partitions of {0..n} into blocks of size ≥ 2 by direct enumeration
/// of restricted growth strings. Returns counts indexed by block number.
pub fn brute_force_no_singletons(n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n + 1];
    if n == 0 {
        counts[0] = 1;
        return counts;
    }
    let mut rgs = vec![0usize; n];
    loop {
        let blocks = rgs.iter().max().unwrap() + 1;
        let mut sizes = vec![0usize; blocks];
        for &b in &rgs {
            sizes[b] += 1;
        }
        if sizes.iter().all(|&s| s >= 2) {
            counts[blocks] += 1;
        }
        // next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return counts;
            }
            let prefix_max = rgs[..i].iter().copied().max().unwrap();
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

fn q(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Poisson central moments `μ_k(λ)` as coefficient vectors in `λ`, from the
/// recurrence `μ_{k+1} = λ (k μ_{k−1} + dμ_k/dλ)`.
pub fn poisson_central_moments(max_k: usize) -> Vec<Vec<BigRational>> {
    let mut mu: Vec<Vec<BigRational>> = vec![vec![q(1)], vec![q(0)]];
    for k in 1..max_k {
        let prev = &mu[k - 1];
        let cur = &mu[k];
        let mut next = vec![q(0); cur.len().max(prev.len()) + 1];
        for (j, c) in prev.iter().enumerate() {
            next[j + 1] += c * q(k as i64);
        }
        for (j, c) in cur.iter().enumerate().skip(1) {
            next[j] += c * q(j as i64);
        }
        mu.push(next);
    }
    mu
}

/// Coefficient of `λ^{−l}` in `E[D^k]`, `D = (X − λ)/λ`.
fn ed_coeff(mu: &[Vec<BigRational>], k: usize, l: usize) -> BigRational {
    if l > k {
        return BigRational::zero();
    }
    mu[k].get(k - l).cloned().unwrap_or_else(BigRational::zero)
}

/// Coefficients of `Var(Σ_{m} (−1)^{m+1} D^m/m)` in powers `λ^{−l}`,
/// `l = 1..T−1`, keeping products `D^i D^j` with `i + j ≤ T`.
pub fn condvar_oracle(order: usize) -> Vec<BigRational> {
    let mu = poisson_central_moments(order + 1);
    let c = |m: usize| {
        let s = if m % 2 == 1 { 1 } else { -1 };
        BigRational::new(BigInt::from(s), BigInt::from(m as i64))
    };
    (1..order)
        .map(|l| {
            let mut total = BigRational::zero();
            for i in 1..order {
                for j in 1..=(order - i) {
                    let mut cov = ed_coeff(&mu, i + j, l);
                    for l1 in 0..=l {
                        cov -= ed_coeff(&mu, i, l1) * ed_coeff(&mu, j, l - l1);
                    }
                    total += c(i) * c(j) * cov;
                }
            }
            total
        })
        .collect()
}

pub fn one() -> BigRational {
    BigRational::one()
}

/// Random symmetric matrix with standard normal entries.
pub fn random_symmetric<R: Rng>(p: usize, rng: &mut R) -> Array2<f64> {
    let a: Array2<f64> = Array2::from_shape_simple_fn((p, p), || StandardNormal.sample(rng));
    (&a + &a.t()) * 0.5
}

/// Random vector orthogonal to `1`.
pub fn random_centered<R: Rng>(p: usize, rng: &mut R) -> Array1<f64> {
    let v: Array1<f64> = Array1::from_shape_simple_fn(p, || StandardNormal.sample(rng));
    let m = v.mean().unwrap();
    v - m
}

/// Unbiased sample covariance (divisor n − 1).
pub fn sample_cov(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    let c = x - &mean.insert_axis(ndarray::Axis(0));
    c.t().dot(&c) / (n - 1.0)
}

/// Elementwise mean and standard error of a sequence of equally shaped matrices.
pub fn mean_and_se(samples: &[Array2<f64>]) -> (Array2<f64>, Array2<f64>) {
    let r = samples.len() as f64;
    let shape = samples[0].raw_dim();
    let mut mean = Array2::zeros(shape);
    for s in samples {
        mean += s;
    }
    mean /= r;
    let mut ss = Array2::<f64>::zeros(shape);
    for s in samples {
        let d = s - &mean;
        ss += &(&d * &d);
    }
    let se = (ss / (r - 1.0) / r).mapv(f64::sqrt);
    (mean, se)
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
