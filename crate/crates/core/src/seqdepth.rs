//! Matrix-level sequencing-depth corrections of an estimated covariance.
//!
//! Multiplicative depth noise adds a component along the all-ones direction
//! to a log-scale covariance. The compositional correction projects that
//! direction out; the minimum-variance correction subtracts the largest
//! multiple of `11ᵀ` that keeps the (thresholded) matrix positive semidefinite.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{centering_projector, eigendecompose_sym, symmetrize, SymEigen};

pub const DEFAULT_ENERGY_THRESHOLD: f64 = 0.9;

/// The unique symmetric matrix that annihilates `1` and agrees with `sigma`
/// on every pair of vectors orthogonal to `1`: `(I − 11ᵀ/p) Σ (I − 11ᵀ/p)`.
pub fn compositional_correct(sigma: ArrayView2<f64>) -> Result<Array2<f64>> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::DimensionMismatch {
            what: "covariance columns",
            expected: p,
            found: sigma.ncols(),
        });
    }
    let proj = centering_projector(p);
    let out = proj.dot(&sigma).dot(&proj);
    Ok(symmetrize(out.view()))
}

/// Outcome of [`minvar_correct`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinVarReport {
    /// Multiple of `11ᵀ` subtracted.
    pub c: f64,
    /// 1-based cut index: eigenvalues after position `j` were raised or lowered to `λ_j`.
    pub j: usize,
    /// Spectrum after clamping and thresholding, non-increasing.
    pub thresholded_eigenvalues: Array1<f64>,
    /// `Σ_t − c·11ᵀ`.
    pub corrected: Array2<f64>,
    /// Smallest eigenvalue of `corrected`.
    pub min_eigenvalue: f64,
    /// Set when `corrected` has an eigenvalue below `−1e-8·λ_1`.
    pub psd_violation: bool,
}

/// Smallest `j ≥ 2` (1-based) with `(λ_2+…+λ_j)/(λ_2+…+λ_p) > threshold`;
/// `p` when no such `j` exists or the tail carries no variance.
fn cut_index(values: &Array1<f64>, threshold: f64) -> usize {
    let p = values.len();
    let tail: f64 = values.iter().skip(1).sum();
    if tail <= 0.0 {
        return 2.min(p);
    }
    let mut running = 0.0;
    for j in 2..=p {
        running += values[j - 1];
        if running / tail > threshold {
            return j;
        }
    }
    p
}

fn log_det(m: ArrayView2<f64>) -> Result<(f64, f64)> {
    Ok(eigendecompose_sym(m)?.log_abs_det())
}

/// Minimum-variance depth correction with eigenvalue thresholding.
///
/// 1. eigendecompose `Σ`, clamp negative eigenvalues to zero;
/// 2. pick the cut `j` from the energy ratio that skips `λ_1`;
/// 3. replace `λ_k`, `k > j`, by `λ_j` and rebuild `Σ_t`;
/// 4. `c = |Σ_t| / (p |Σ̃_t + 11ᵀ/p|)` with `Σ̃_t` the compositional
///    correction of `Σ_t`, the root of `|Σ_t − c11ᵀ| = 0`.
///
/// Determinants are products of eigenvalues. An `energy_threshold ≥ 1`
/// disables thresholding.
pub fn minvar_correct(sigma: ArrayView2<f64>, energy_threshold: f64) -> Result<MinVarReport> {
    let p = sigma.nrows();
    if p < 2 {
        return Err(Error::InvalidInput(format!(
            "minimum-variance correction needs p >= 2, got {p}"
        )));
    }
    if !(energy_threshold > 0.0) {
        return Err(Error::InvalidInput(format!(
            "energy threshold must be > 0, got {energy_threshold}"
        )));
    }
    let eig = eigendecompose_sym(sigma)?;
    let mut values = eig.values.mapv(|v| v.max(0.0));
    let j = cut_index(&values, energy_threshold);
    let floor = values[j - 1];
    for v in values.iter_mut().skip(j) {
        *v = floor;
    }
    let thresholded = SymEigen {
        values: values.clone(),
        vectors: eig.vectors,
    }
    .reconstruct();
    let thresholded = symmetrize(thresholded.view());

    let (num_log, num_sign) = log_det(thresholded.view())?;
    let mut shifted = compositional_correct(thresholded.view())?;
    shifted += 1.0 / p as f64;
    let shifted_eig = eigendecompose_sym(shifted.view())?;
    let largest = shifted_eig.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let smallest = shifted_eig.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if smallest <= 1e-12 * largest {
        return Err(Error::Singular(
            "compositional part plus 11ᵀ/p is singular; c is undefined".into(),
        ));
    }
    let (den_log, den_sign) = shifted_eig.log_abs_det();
    let c = if num_sign == 0.0 {
        0.0
    } else {
        num_sign * den_sign * (num_log - den_log - (p as f64).ln()).exp()
    };

    let corrected = &thresholded - c;
    let corrected = symmetrize(corrected.view());
    let min_eigenvalue = eigendecompose_sym(corrected.view())?.values[p - 1];
    let psd_violation = min_eigenvalue < -1e-8 * values[0].abs();
    if psd_violation {
        log::warn!(
            "minimum-variance correction left eigenvalue {min_eigenvalue:e} below zero"
        );
    }
    Ok(MinVarReport {
        c,
        j,
        thresholded_eigenvalues: values,
        corrected,
        min_eigenvalue,
        psd_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn compositional_examples() {
        let eye = Array2::<f64>::eye(3);
        let out = compositional_correct(eye.view()).unwrap();
        assert_abs_diff_eq!(out, centering_projector(3), epsilon = 1e-15);

        let out = compositional_correct(array![[2.0, 0.0], [0.0, 0.0]].view()).unwrap();
        assert_abs_diff_eq!(out, array![[0.5, -0.5], [-0.5, 0.5]], epsilon = 1e-15);

        let fixed = array![[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        let out = compositional_correct(fixed.view()).unwrap();
        assert!(max_abs((&out - &fixed).iter()) <= 1e-12);
    }

    #[test]
    fn minvar_identity() {
        let r = minvar_correct(Array2::<f64>::eye(4).view(), DEFAULT_ENERGY_THRESHOLD).unwrap();
        assert!((r.c - 0.25).abs() <= 1e-12);
        assert_eq!(r.j, 4);
        assert_abs_diff_eq!(r.corrected, centering_projector(4), epsilon = 1e-12);
        assert!(!r.psd_violation);
    }

    #[test]
    fn minvar_clamps_negative_eigenvalues() {
        // eigenvalues 3, 2, -0.1 with an arbitrary rotation
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = array![[h, h, 0.0], [-h, h, 0.0], [0.0, 0.0, 1.0]];
        let d = array![3.0, 2.0, -0.1];
        let sigma = SymEigen {
            values: d,
            vectors: v,
        }
        .reconstruct();
        let r = minvar_correct(sigma.view(), DEFAULT_ENERGY_THRESHOLD).unwrap();
        assert!(r.thresholded_eigenvalues.iter().all(|&v| v >= 0.0));
        assert!(r.min_eigenvalue >= -1e-8 * 3.0);
    }

    #[test]
    fn cut_index_rules() {
        assert_eq!(cut_index(&array![5.0, 1.0], 0.9), 2);
        assert_eq!(cut_index(&array![5.0, 4.0, 0.3, 0.2, 0.1], 0.9), 3);
        assert_eq!(cut_index(&array![5.0, 1.0, 1.0, 1.0], 0.9), 4);
        assert_eq!(cut_index(&array![5.0, 0.0, 0.0], 0.9), 2);
        assert_eq!(cut_index(&array![5.0, 1.0, 1.0], 1.0), 3);
    }

    #[test]
    fn minvar_rejects_scalar() {
        assert!(minvar_correct(array![[1.0]].view(), 0.9).is_err());
    }
}
