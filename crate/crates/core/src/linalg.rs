//! Dense symmetric linear algebra: cyclic Jacobi eigendecomposition, the
//! centering projector and a few small helpers used across the crate.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// Eigenvalues in non-increasing order together with orthonormal eigenvectors
/// stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl SymEigen {
    /// `V diag(values) Vᵀ`
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.values.view().insert_axis(Axis(0));
        scaled.dot(&self.vectors.t())
    }

    /// Sum of log |λ| and the sign of the product of eigenvalues.
    pub fn log_abs_det(&self) -> (f64, f64) {
        let mut sign = 1.0;
        let mut acc = 0.0;
        for &v in self.values.iter() {
            if v == 0.0 {
                return (f64::NEG_INFINITY, 0.0);
            }
            if v < 0.0 {
                sign = -sign;
            }
            acc += v.abs().ln();
        }
        (acc, sign)
    }
}

/// Returns `(M + Mᵀ) / 2`.
pub fn symmetrize(m: ArrayView2<f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    out += &m.t();
    out *= 0.5;
    out
}

pub fn max_abs<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn check_square(m: ArrayView2<f64>, what: &'static str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::DimensionMismatch {
            what,
            expected: r,
            found: c,
        });
    }
    Ok(r)
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized before decomposition. Eigenvalues come back in
/// non-increasing order (ties keep their original diagonal position) and each
/// eigenvector is flipped so its largest-magnitude entry is positive, which
/// makes the output deterministic for a fixed input.
pub fn eigendecompose_sym(m: ArrayView2<f64>) -> Result<SymEigen> {
    let p = check_square(m, "symmetric eigendecomposition")?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "{p}x{p} matrix passed to eigendecompose_sym"
        )));
    }
    let asym = m
        .indexed_iter()
        .fold(0.0_f64, |acc, ((i, j), v)| acc.max((v - m[[j, i]]).abs()));
    let scale = max_abs(m.iter()).max(1.0);
    if asym > 1e-8 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max |M - Mᵀ| = {asym:e})"
        )));
    }

    let mut a = symmetrize(m);
    let mut v = Array2::<f64>::eye(p);
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = JACOBI_REL_TOL * frob;

    let off_norm = |a: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    s += a[[i, j]] * a[[i, j]];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= target;
    let mut sweep = 0;
    while !converged && sweep < JACOBI_MAX_SWEEPS {
        sweep += 1;
        for ip in 0..p {
            for iq in (ip + 1)..p {
                let apq = a[[ip, iq]];
                if apq == 0.0 {
                    continue;
                }
                let app = a[[ip, ip]];
                let aqq = a[[iq, iq]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[[ip, ip]] = app - t * apq;
                a[[iq, iq]] = aqq + t * apq;
                a[[ip, iq]] = 0.0;
                a[[iq, ip]] = 0.0;
                for r in 0..p {
                    if r == ip || r == iq {
                        continue;
                    }
                    let g = a[[r, ip]];
                    let h = a[[r, iq]];
                    let new_p = g - s * (h + g * tau);
                    let new_q = h + s * (g - h * tau);
                    a[[r, ip]] = new_p;
                    a[[ip, r]] = new_p;
                    a[[r, iq]] = new_q;
                    a[[iq, r]] = new_q;
                }
                for r in 0..p {
                    let g = v[[r, ip]];
                    let h = v[[r, iq]];
                    v[[r, ip]] = g - s * (h + g * tau);
                    v[[r, iq]] = h + s * (g - h * tau);
                }
            }
        }
        converged = off_norm(&a) <= target;
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: format!("Jacobi eigendecomposition of {p}x{p} matrix"),
            iterations: JACOBI_MAX_SWEEPS,
        });
    }

    let diag: Vec<f64> = (0..p).map(|i| a[[i, i]]).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| diag[y].total_cmp(&diag[x]).then(x.cmp(&y)));

    let mut values = Array1::zeros(p);
    let mut vectors = Array2::zeros((p, p));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = diag[src];
        let col = v.column(src);
        let mut pivot = 0;
        for r in 1..p {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.column_mut(dst).assign(&(&col * sign));
    }
    Ok(SymEigen { values, vectors })
}

/// The centering projector `I − 11ᵀ/p`.
pub fn centering_projector(p: usize) -> Array2<f64> {
    let mut m = Array2::from_elem((p, p), -1.0 / p as f64);
    for i in 0..p {
        m[[i, i]] += 1.0;
    }
    m
}

/// Unbiased sample covariance of the rows of `data` (n ≥ 2).
pub fn sample_covariance(data: ArrayView2<f64>) -> Array2<f64> {
    let n = data.nrows();
    let mean = data.mean_axis(Axis(0)).expect("non-empty rows");
    let centered = &data - &mean.insert_axis(Axis(0));
    let mut cov = centered.t().dot(&centered);
    cov /= (n - 1) as f64;
    symmetrize(cov.view())
}

/// Solves `H x = b` for symmetric positive definite `H` by Cholesky
/// factorization. Returns `None` if `H` is not numerically positive definite.
pub fn cholesky_solve(h: ArrayView2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let p = h.nrows();
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut d = h[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..p {
            let mut s = h[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    let mut y = Array1::<f64>::zeros(p);
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(p);
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(p: usize, rng: &mut impl Rng) -> Array2<f64> {
        let a = Array2::from_shape_fn((p, p), |_| rng.random_range(-1.0..1.0));
        symmetrize(a.view())
    }

    #[test]
    fn diagonal_input_is_its_own_decomposition() {
        let e = eigendecompose_sym(array![[3.0, 0.0], [0.0, 1.0]].view()).unwrap();
        assert_eq!(e.values, array![3.0, 1.0]);
        assert_eq!(e.vectors, Array2::eye(2));
    }

    #[test]
    fn swap_matrix() {
        let e = eigendecompose_sym(array![[0.0, 1.0], [1.0, 0.0]].view()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], -1.0, epsilon = 1e-14);
        // second column: largest magnitude entries tie, first one is made positive
        assert_abs_diff_eq!(e.vectors, array![[h, h], [h, -h]], epsilon = 1e-14);
    }

    #[test]
    fn random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [1, 2, 6, 13, 20] {
            let m = random_sym(p, &mut rng);
            let e = eigendecompose_sym(m.view()).unwrap();
            let err = max_abs((&e.reconstruct() - &m).iter());
            assert!(err <= 1e-8 * max_abs(m.iter()).max(1.0), "p={p} err={err}");
            let gram = e.vectors.t().dot(&e.vectors) - Array2::<f64>::eye(p);
            assert!(max_abs(gram.iter()) <= 1e-10);
            let trace: f64 = m.diag().sum();
            assert!((e.values.sum() - trace).abs() <= 1e-8 * trace.abs().max(1.0));
            for w in e.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn repeatable_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_sym(9, &mut rng);
        let a = eigendecompose_sym(m.view()).unwrap();
        let b = eigendecompose_sym(m.view()).unwrap();
        assert_eq!(a, b);
        for col in a.vectors.columns() {
            let big = col.iter().fold(0.0_f64, |acc, &x| if x.abs() > acc.abs() { x } else { acc });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn rejects_non_finite_and_asymmetric() {
        assert!(matches!(
            eigendecompose_sym(array![[f64::NAN, 0.0], [0.0, 1.0]].view()),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            eigendecompose_sym(array![[1.0, 0.5], [0.0, 1.0]].view()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn projector_examples() {
        assert_eq!(centering_projector(1), array![[0.0]]);
        assert_eq!(centering_projector(2), array![[0.5, -0.5], [-0.5, 0.5]]);
        let p4 = centering_projector(4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(p4[[i, j]], if i == j { 0.75 } else { -0.25 });
            }
        }
    }

    #[test]
    fn projector_is_orthogonal_projector() {
        for p in 1..12 {
            let m = centering_projector(p);
            assert!(max_abs((&m.dot(&m) - &m).iter()) <= 1e-12);
            assert!(max_abs((&m - &m.t()).iter()) == 0.0);
            assert!(max_abs(m.dot(&Array1::<f64>::ones(p)).iter()) <= 1e-12);
        }
    }

    #[test]
    fn cholesky_matches_direct_solution() {
        let h = array![[4.0, 1.0], [1.0, 3.0]];
        let x = cholesky_solve(h.view(), &array![1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(h.dot(&x), array![1.0, 2.0], epsilon = 1e-14);
        assert!(cholesky_solve(array![[1.0, 2.0], [2.0, 1.0]].view(), &array![1.0, 1.0]).is_none());
    }
}
