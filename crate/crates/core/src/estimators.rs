//! Poisson-noise corrected covariance estimators for count matrices.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::sample_covariance;
use crate::moments::{compute_condvar_coeffs, condvar_terms_exact, log_condvar, LogG, Transform};
use crate::types::{CountMatrix, CovarianceEstimate, SequencingDepths, TransformTag};

/// Truncation order of the log conditional-variance series.
pub const LOG_CONDVAR_ORDER: usize = 9;

/// `YᵀY/(n−1) − (Yᵀ1)(Yᵀ1)ᵀ/(n(n−1)) − diag(noise)`
fn corrected_second_moment(y: ArrayView2<f64>, noise: &Array1<f64>) -> Array2<f64> {
    let n = y.nrows() as f64;
    let col_sums = y.sum_axis(Axis(0));
    let outer = col_sums
        .view()
        .insert_axis(Axis(1))
        .dot(&col_sums.view().insert_axis(Axis(0)));
    let mut sigma = y.t().dot(&y) / (n - 1.0) - outer / (n * (n - 1.0));
    for (i, v) in noise.iter().enumerate() {
        sigma[[i, i]] -= v;
    }
    sigma
}

/// Unbiased estimate of `Var(Λ)` when counts are `Po(Λ)`:
/// the sample covariance of `X` minus `diag` of the column means.
pub fn estimate_cov_identity(counts: &CountMatrix) -> Result<CovarianceEstimate> {
    let n = counts.n();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let x = counts.to_f64();
    let mean = x.sum_axis(Axis(0)) / n as f64;
    let sigma = corrected_second_moment(x.view(), &mean);
    CovarianceEstimate::new(sigma, mean, TransformTag::Identity)
}

/// Unbiased estimate of `Var(Λ)` when counts are `Po(S_i Λ)` with known
/// per-sample depths `S_i`.
pub fn estimate_cov_seqdepth(
    counts: &CountMatrix,
    depths: &SequencingDepths,
) -> Result<CovarianceEstimate> {
    let n = counts.n();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if depths.len() != n {
        return Err(Error::DimensionMismatch {
            what: "sequencing depths",
            expected: n,
            found: depths.len(),
        });
    }
    let x = counts.to_f64();
    let s = depths.values();
    let s_col = s.insert_axis(Axis(1));
    let scaled = &x / &s_col;
    let scaled_sq = &x / &(&s_col * &s_col);
    let noise = scaled_sq.sum_axis(Axis(0)) / n as f64;
    let sigma = corrected_second_moment(scaled.view(), &noise);
    let mean = scaled.sum_axis(Axis(0)) / n as f64;
    CovarianceEstimate::new(sigma, mean, TransformTag::SequencingDepth)
}

fn transformed_estimate(
    g: Array2<f64>,
    diag: impl Fn(usize, &Array1<f64>) -> f64,
    tag: TransformTag,
) -> Result<CovarianceEstimate> {
    let mut sigma = sample_covariance(g.view());
    for (l, col) in g.columns().into_iter().enumerate() {
        sigma[[l, l]] = diag(l, &col.to_owned());
    }
    let mean = g.mean_axis(Axis(0)).expect("n >= 2");
    CovarianceEstimate::new(sigma, mean, tag).map_err(|e| match e {
        Error::NonFinite(_) => Error::NonFinite(format!(
            "{tag} covariance (conditional-variance correction overflowed; \
             use the log transform or the identity transform)"
        )),
        other => other,
    })
}

/// `(1/n) Σ_i w_i − (1/(n(n−1))) Σ_{i≠j} g_i g_j`
fn unbiased_diagonal(inner_sum: f64, g: &Array1<f64>) -> f64 {
    let n = g.len() as f64;
    let total = g.sum();
    let squares = g.dot(g);
    inner_sum / n - (total * total - squares) / (n * (n - 1.0))
}

/// Estimate of `Var(f(Λ))` for a transform `f`.
///
/// Off-diagonal entries are the sample covariances of `g(X)`. Diagonal
/// entries subtract an estimate of `E Var(g(X) | Λ)`: the exact
/// conditional-variance correction for polynomial and tabulated transforms,
/// and the Stirling-series approximation for the log transform.
pub fn estimate_cov_transformed(
    counts: &CountMatrix,
    transform: &Transform,
) -> Result<CovarianceEstimate> {
    let n = counts.n();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let x = counts.data();
    match transform {
        Transform::Identity => estimate_cov_identity(counts),
        Transform::Polynomial(poly) => {
            let g = x.mapv(|v| poly.g(v));
            transformed_estimate(
                g,
                |l, col| {
                    let inner: f64 = x.column(l).iter().map(|&v| poly.unbiased_square(v)).sum();
                    unbiased_diagonal(inner, col)
                },
                TransformTag::Polynomial,
            )
        }
        Transform::CustomTaylor(table) => {
            let n_max = x.iter().copied().max().unwrap_or(0) as usize;
            if table.len() <= n_max {
                return Err(Error::DimensionMismatch {
                    what: "custom g table length",
                    expected: n_max + 1,
                    found: table.len(),
                });
            }
            let inner_table = condvar_terms_exact(&table[..=n_max])?;
            let g = x.mapv(|v| table[v as usize]);
            transformed_estimate(
                g,
                |l, col| {
                    let inner: f64 = x.column(l).iter().map(|&v| inner_table[v as usize]).sum();
                    unbiased_diagonal(inner, col)
                },
                TransformTag::CustomTaylor,
            )
        }
        Transform::Log(params) => {
            let coeffs = compute_condvar_coeffs(LOG_CONDVAR_ORDER)?;
            let log_g = LogG::new(params);
            let g = x.mapv(|v| log_g.eval(v));
            transformed_estimate(
                g,
                |l, col| {
                    let mean = col.sum() / n as f64;
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / (n - 1) as f64;
                    let condvar = x.column(l).iter().map(|&v| log_condvar(v, &coeffs)).sum::<f64>()
                        / n as f64;
                    var - condvar
                },
                TransformTag::Log,
            )
        }
    }
}
