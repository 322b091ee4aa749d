//! Random draws used by the simulation harness.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Haar-distributed `p × p` orthogonal matrix: Gram–Schmidt on an i.i.d.
/// normal matrix, which is the QR factor with positive `R` diagonal.
pub fn gen_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Array2<f64> {
    let z = Array2::from_shape_simple_fn((p, p), || StandardNormal.sample(rng));
    gram_schmidt(z)
}

/// Orthonormalises columns left to right (modified Gram–Schmidt, two passes).
pub(crate) fn gram_schmidt(mut q: Array2<f64>) -> Array2<f64> {
    let k = q.ncols();
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let (done, mut rest) = q.view_mut().split_at(Axis(1), j);
                let qi = done.column(i);
                let mut col = rest.column_mut(0);
                let proj = qi.dot(&col);
                col.scaled_add(-proj, &qi);
            }
        }
        let mut col = q.column_mut(j);
        let norm = col.dot(&col).sqrt();
        col /= norm;
    }
    q
}

/// Orthonormal `p × p` matrix whose last column is `1/√p` and whose other
/// columns are Haar-distributed within the complement of `1`.
pub fn gen_orthogonal_compositional<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Array2<f64> {
    let ones = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
    let mut z = Array2::from_shape_simple_fn((p, p), || StandardNormal.sample(rng));
    z.column_mut(0).assign(&ones);
    let q = gram_schmidt(z);
    let mut out = Array2::zeros((p, p));
    for j in 1..p {
        out.column_mut(j - 1).assign(&q.column(j));
    }
    out.column_mut(p - 1).assign(&q.column(0));
    out
}

const LN_FACT_TABLE: usize = 32;

/// `ln k!`; exact table for small `k`, Stirling series beyond.
pub(crate) fn ln_factorial(k: u64) -> f64 {
    static TABLE: std::sync::OnceLock<[f64; LN_FACT_TABLE]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0.0; LN_FACT_TABLE];
        for i in 1..LN_FACT_TABLE {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    if (k as usize) < LN_FACT_TABLE {
        return table[k as usize];
    }
    let x = k as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Poisson draw: sequential inversion for `λ < 10`, Hörmann's transformed
/// rejection (PTRS) otherwise.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    if lambda < 10.0 {
        let mut prob = (-lambda).exp();
        let mut cdf = prob;
        let u: f64 = rng.random();
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            prob *= lambda / k as f64;
            cdf += prob;
            if prob <= 0.0 && cdf < u {
                break;
            }
        }
        return k;
    }
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn orthogonal_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let one = gen_orthogonal(1, &mut rng);
        assert_eq!(one[[0, 0]].abs(), 1.0);
        let q = gen_orthogonal(50, &mut rng);
        let gram = q.t().dot(&q) - Array2::<f64>::eye(50);
        assert!(max_abs(gram.iter()) <= 1e-10);
    }

    #[test]
    fn compositional_basis() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let q = gen_orthogonal_compositional(6, &mut rng);
        let gram = q.t().dot(&q) - Array2::<f64>::eye(6);
        assert!(max_abs(gram.iter()) <= 1e-12);
        let last = q.column(5);
        assert!(last.iter().all(|v| (v - 1.0 / 6f64.sqrt()).abs() < 1e-14));
        for j in 0..5 {
            assert!(q.column(j).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn ln_factorial_continuity() {
        let mut exact = 0.0;
        for k in 1..200u64 {
            exact += (k as f64).ln();
            assert!((ln_factorial(k) - exact).abs() < 1e-10 * exact.max(1.0), "k = {k}");
        }
    }

    #[test]
    fn poisson_moments() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for &lambda in &[0.3, 4.0, 9.99, 10.0, 37.5, 1e4] {
            let n = 100_000;
            let draws: Vec<f64> = (0..n).map(|_| sample_poisson(lambda, &mut rng) as f64).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se_mean = (lambda / n as f64).sqrt();
            assert!((mean - lambda).abs() < 4.0 * se_mean, "lambda {lambda}: mean {mean}");
            // Var(s²) ≈ (μ4 − σ⁴)/n with μ4 = λ + 3λ²
            let se_var = ((lambda + 2.0 * lambda * lambda) / n as f64).sqrt();
            assert!((var - lambda).abs() < 4.0 * se_var, "lambda {lambda}: var {var}");
        }
        assert_eq!(sample_poisson(0.0, &mut rng), 0);
    }
}
