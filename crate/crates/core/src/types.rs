//! Domain types shared across the estimators, corrections and projection.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{eigendecompose_sym, symmetrize};

/// An `n × p` matrix of observed counts, rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    data: Array2<u64>,
    row_labels: Option<Vec<String>>,
    col_labels: Option<Vec<String>>,
}

impl CountMatrix {
    pub fn new(data: Array2<u64>) -> Result<Self> {
        let (n, p) = data.dim();
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        if p < 2 {
            return Err(Error::InvalidInput(format!(
                "count matrix needs at least 2 variables, got {p}"
            )));
        }
        Ok(Self {
            data,
            row_labels: None,
            col_labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} entries, expected {p}",
                r.len()
            )));
        }
        let flat: Vec<u64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((n, p), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(data)
    }

    pub fn with_row_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "row labels",
                expected: self.n(),
                found: labels.len(),
            });
        }
        self.row_labels = Some(labels);
        Ok(self)
    }

    pub fn with_col_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: "column labels",
                expected: self.p(),
                found: labels.len(),
            });
        }
        self.col_labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, u64> {
        self.data.view()
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn col_labels(&self) -> Option<&[String]> {
        self.col_labels.as_deref()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(|x| x as f64)
    }

    pub fn row_totals(&self) -> Array1<f64> {
        self.data.rows().into_iter().map(|r| r.sum() as f64).collect()
    }
}

/// Known per-sample sequencing depths, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencingDepths {
    values: Array1<f64>,
}

impl SequencingDepths {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "sequencing depth {i} must be finite and > 0, got {v}"
            )));
        }
        Ok(Self { values })
    }

    /// Plug-in depths from row totals. The depth-corrected estimator assumes
    /// depths are known; totals are a noisy stand-in.
    pub fn from_row_totals(counts: &CountMatrix) -> Result<Self> {
        Self::new(counts.row_totals())
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which estimator produced a [`CovarianceEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformTag {
    Identity,
    SequencingDepth,
    Polynomial,
    Log,
    CustomTaylor,
}

impl fmt::Display for TransformTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TransformTag::Identity => "identity",
            TransformTag::SequencingDepth => "identity-seqdepth",
            TransformTag::Polynomial => "polynomial",
            TransformTag::Log => "log",
            TransformTag::CustomTaylor => "custom-taylor",
        };
        f.write_str(s)
    }
}

/// A symmetric (not necessarily positive semidefinite) estimate of the
/// covariance of the transformed latent means, with the column means of g(X).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    sigma: Array2<f64>,
    mean_g: Array1<f64>,
    transform: TransformTag,
}

impl CovarianceEstimate {
    pub fn new(sigma: Array2<f64>, mean_g: Array1<f64>, transform: TransformTag) -> Result<Self> {
        let p = sigma.nrows();
        if sigma.ncols() != p {
            return Err(Error::DimensionMismatch {
                what: "covariance columns",
                expected: p,
                found: sigma.ncols(),
            });
        }
        if mean_g.len() != p {
            return Err(Error::DimensionMismatch {
                what: "mean vector",
                expected: p,
                found: mean_g.len(),
            });
        }
        if sigma.iter().chain(mean_g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{transform} covariance estimate")));
        }
        Ok(Self {
            sigma: symmetrize(sigma.view()),
            mean_g,
            transform,
        })
    }

    pub fn sigma(&self) -> ArrayView2<'_, f64> {
        self.sigma.view()
    }

    pub fn mean_g(&self) -> ArrayView1<'_, f64> {
        self.mean_g.view()
    }

    pub fn transform(&self) -> TransformTag {
        self.transform
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>) {
        (self.sigma, self.mean_g)
    }

    /// Principal components of the estimate, centred at `mean_g`.
    pub fn pca(&self) -> Result<LatentPCA> {
        LatentPCA::from_covariance(self.sigma.view(), self.mean_g.clone())
    }
}

/// Principal components of an estimated latent covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPCA {
    vectors: Array2<f64>,
    eigenvalues: Array1<f64>,
    center: Array1<f64>,
}

impl LatentPCA {
    pub fn from_covariance(sigma: ArrayView2<f64>, center: Array1<f64>) -> Result<Self> {
        if center.len() != sigma.nrows() {
            return Err(Error::DimensionMismatch {
                what: "PCA center",
                expected: sigma.nrows(),
                found: center.len(),
            });
        }
        let eig = eigendecompose_sym(sigma)?;
        Ok(Self {
            vectors: eig.vectors,
            eigenvalues: eig.values,
            center,
        })
    }

    /// Builds from parts, checking orthonormality to 1e-10 and ordering.
    pub fn from_parts(
        vectors: Array2<f64>,
        eigenvalues: Array1<f64>,
        center: Array1<f64>,
    ) -> Result<Self> {
        let p = vectors.nrows();
        if vectors.ncols() != p || eigenvalues.len() != p || center.len() != p {
            return Err(Error::DimensionMismatch {
                what: "PCA parts",
                expected: p,
                found: eigenvalues.len(),
            });
        }
        let gram = vectors.t().dot(&vectors) - Array2::<f64>::eye(p);
        if crate::linalg::max_abs(gram.iter()) > 1e-10 {
            return Err(Error::InvalidInput("PCA vectors are not orthonormal".into()));
        }
        if eigenvalues.windows(2).into_iter().any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "PCA eigenvalues must be non-increasing".into(),
            ));
        }
        Ok(Self {
            vectors,
            eigenvalues,
            center,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.eigenvalues.view()
    }

    pub fn center(&self) -> ArrayView1<'_, f64> {
        self.center.view()
    }
}

/// Per-sample latent coordinates produced by a projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    /// Full latent coordinates `a`, one row per sample.
    pub a: Array2<f64>,
    /// Retained rank `r`.
    pub rank: usize,
    /// `μ + V a_[r]` per sample.
    pub reconstruction: Array2<f64>,
    /// Fitted Poisson means `exp(μ + V a)`.
    pub lambda_hat: Array2<f64>,
    /// Whether each row met the convergence tolerance.
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl Scores {
    /// `a_[r]` for each row: coordinates past the retained rank set to zero.
    pub fn truncated(&self) -> Array2<f64> {
        let mut t = self.a.clone();
        for mut row in t.rows_mut() {
            for v in row.iter_mut().skip(self.rank) {
                *v = 0.0;
            }
        }
        t
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn count_matrix_shape_checks() {
        assert!(matches!(
            CountMatrix::from_rows(&[vec![1, 2]]),
            Err(Error::TooFewSamples(1))
        ));
        assert!(CountMatrix::from_rows(&[vec![1], vec![2]]).is_err());
        assert!(CountMatrix::from_rows(&[vec![1, 2], vec![3]]).is_err());
        let x = CountMatrix::from_rows(&[vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(x.row_totals(), array![3.0, 7.0]);
    }

    #[test]
    fn depths_must_be_positive() {
        assert!(SequencingDepths::new(array![1.0, 0.0]).is_err());
        assert!(SequencingDepths::new(array![1.0, f64::NAN]).is_err());
        assert!(SequencingDepths::new(array![1.0, 2.0]).is_ok());
    }

    #[test]
    fn estimate_is_symmetrized() {
        let est = CovarianceEstimate::new(
            array![[1.0, 2.0], [0.0, 1.0]],
            array![0.0, 0.0],
            TransformTag::Identity,
        )
        .unwrap();
        assert_eq!(est.sigma(), array![[1.0, 1.0], [1.0, 1.0]]);
        assert!(CovarianceEstimate::new(
            array![[f64::INFINITY, 0.0], [0.0, 1.0]],
            array![0.0, 0.0],
            TransformTag::Identity
        )
        .is_err());
    }

    #[test]
    fn truncated_scores_zero_tail() {
        let s = Scores {
            a: array![[1.0, 2.0, 3.0]],
            rank: 1,
            reconstruction: array![[0.0, 0.0, 0.0]],
            lambda_hat: array![[1.0, 1.0, 1.0]],
            converged: vec![true],
            iterations: vec![0],
        };
        assert_eq!(s.truncated(), array![[1.0, 0.0, 0.0]]);
    }
}
