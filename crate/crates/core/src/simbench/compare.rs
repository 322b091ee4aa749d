use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::{gen_dataset, Dataset, SimulationConfig};
use crate::error::{Error, Result};
use crate::estimators::{estimate_cov_seqdepth, estimate_cov_transformed};
use crate::linalg::{eigendecompose_sym, sample_covariance};
use crate::moments::Transform;
use crate::seqdepth::{compositional_correct, minvar_correct};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "POISSON_PCA_THREADS";

/// Stand-in for zero counts when a transform is applied to raw counts.
pub const NAIVE_ZERO_SUB: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    PoissonPca,
    NaivePca,
    NaiveTransformPca,
    CompositionalPca,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::PoissonPca,
        Method::NaivePca,
        Method::NaiveTransformPca,
        Method::CompositionalPca,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::PoissonPca => "poisson-pca",
            Method::NaivePca => "naive-pca",
            Method::NaiveTransformPca => "naive-transform-pca",
            Method::CompositionalPca => "compositional-pca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::Usage(format!("unknown method {s:?}")))
    }
}

/// Matrix-level depth correction applied to the poisson-pca estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correction {
    None,
    Compositional,
    MinVar { energy_threshold: f64 },
}

impl Correction {
    pub fn apply(self, sigma: Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Correction::None => Ok(sigma),
            Correction::Compositional => compositional_correct(sigma.view()),
            Correction::MinVar { energy_threshold } => {
                Ok(minvar_correct(sigma.view(), energy_threshold)?.corrected)
            }
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correction::None => write!(f, "none"),
            Correction::Compositional => write!(f, "compositional"),
            Correction::MinVar { energy_threshold } => write!(f, "minvar({energy_threshold:?})"),
        }
    }
}

/// Cumulative true variance captured by the leading estimated eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentCurve {
    pub method: String,
    /// Entry `k − 1` is `Σ_{i ≤ k} v̂_iᵀ Σ v̂_i`.
    pub cumulative: Array1<f64>,
}

/// `Σ_{i=1}^{k} (V̂ᵀ Σ V̂)_{ii}` for every `k` up to the number of columns.
pub fn variance_explained(
    method: &str,
    v_hat: ArrayView2<f64>,
    sigma_true: ArrayView2<f64>,
) -> Result<AssessmentCurve> {
    let p = sigma_true.nrows();
    if v_hat.nrows() != p || sigma_true.ncols() != p {
        return Err(Error::DimensionMismatch {
            what: "eigenvector rows vs covariance",
            expected: p,
            found: v_hat.nrows(),
        });
    }
    let k = v_hat.ncols();
    let gram = v_hat.t().dot(&v_hat);
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            if (gram[[i, j]] - target).abs() > 1e-8 {
                return Err(Error::InvalidInput(
                    "estimated eigenvectors are not orthonormal".into(),
                ));
            }
        }
    }
    let quad = sigma_true.dot(&v_hat);
    let mut acc = 0.0;
    let cumulative = Array1::from_iter((0..k).map(|i| {
        acc += v_hat.column(i).dot(&quad.column(i));
        acc
    }));
    Ok(AssessmentCurve {
        method: method.to_string(),
        cumulative,
    })
}

/// Rayon pool sized by `POISSON_PCA_THREADS` when set, otherwise the default.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let threads: usize = raw.trim().parse().map_err(|_| {
            Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))
        })?;
        if threads == 0 {
            return Err(Error::Usage(format!("{THREADS_ENV} must be >= 1")));
        }
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// CPU time consumed by the calling thread, in seconds.
fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: ts is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Independent stream for one replicate.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn poisson_covariance(ds: &Dataset, transform: &Transform) -> Result<Array2<f64>> {
    let est = match (&ds.depths, transform) {
        (Some(depths), Transform::Identity) => estimate_cov_seqdepth(&ds.counts, depths)?,
        _ => estimate_cov_transformed(&ds.counts, transform)?,
    };
    Ok(est.into_parts().0)
}

/// The covariance a method would hand to PCA.
pub fn method_covariance(
    method: Method,
    ds: &Dataset,
    transform: &Transform,
    correction: Correction,
) -> Result<Array2<f64>> {
    match method {
        Method::PoissonPca => correction.apply(poisson_covariance(ds, transform)?),
        Method::NaivePca => Ok(sample_covariance(ds.counts.to_f64().view())),
        Method::NaiveTransformPca => {
            let y = ds.counts.data().mapv(|x| transform.naive(x, NAIVE_ZERO_SUB));
            Ok(sample_covariance(y.view()))
        }
        Method::CompositionalPca => compositional_correct(poisson_covariance(ds, transform)?.view()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    /// One curve per requested method, in request order.
    pub curves: Vec<AssessmentCurve>,
    /// Curve of the true eigenvectors.
    pub truth: AssessmentCurve,
    pub cpu_seconds: Vec<f64>,
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub methods: Vec<Method>,
    pub outcomes: Vec<ReplicateOutcome>,
    /// `(replicate, reason)` for replicates that failed.
    pub skipped: Vec<(usize, String)>,
    pub mean_curves: Vec<AssessmentCurve>,
    pub mean_truth: AssessmentCurve,
}

impl ComparisonResult {
    pub fn curve(&self, method: Method) -> Option<&AssessmentCurve> {
        self.methods
            .iter()
            .position(|m| *m == method)
            .map(|i| &self.mean_curves[i])
    }

    pub fn total_clamped(&self) -> usize {
        self.outcomes.iter().map(|o| o.clamped).sum()
    }

    /// `method,k,mean_cumvar`, with the true curve under `truth`.
    pub fn write_curves(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "k", "mean_cumvar"])?;
        for curve in self.mean_curves.iter().chain(std::iter::once(&self.mean_truth)) {
            for (k, v) in curve.cumulative.iter().enumerate() {
                w.write_record([curve.method.clone(), (k + 1).to_string(), format!("{v:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `method,replicate,k,cumvar` for every successful replicate.
    pub fn write_replicate_curves(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "replicate", "k", "cumvar"])?;
        for o in &self.outcomes {
            for curve in o.curves.iter().chain(std::iter::once(&o.truth)) {
                for (k, v) in curve.cumulative.iter().enumerate() {
                    w.write_record([
                        curve.method.clone(),
                        o.replicate.to_string(),
                        (k + 1).to_string(),
                        format!("{v:?}"),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `method,replicate,cpu_seconds`.
    pub fn write_timings(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "replicate", "cpu_seconds"])?;
        for o in &self.outcomes {
            for (m, t) in self.methods.iter().zip(&o.cpu_seconds) {
                w.write_record([m.label().to_string(), o.replicate.to_string(), format!("{t:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn run_replicate(
    config: &SimulationConfig,
    methods: &[Method],
    correction: Correction,
    replicate: usize,
) -> Result<ReplicateOutcome> {
    let mut rng = replicate_rng(config.seed, replicate);
    let ds = gen_dataset(config, &mut rng)?;
    let sigma = ds.sigma_true.view();
    let mut curves = Vec::with_capacity(methods.len());
    let mut cpu_seconds = Vec::with_capacity(methods.len());
    for &m in methods {
        let start = thread_cpu_seconds();
        let cov = method_covariance(m, &ds, &config.transform, correction)?;
        let eig = eigendecompose_sym(cov.view())?;
        cpu_seconds.push(thread_cpu_seconds() - start);
        curves.push(variance_explained(m.label(), eig.vectors.view(), sigma)?);
    }
    // true eigenvectors sorted by eigenvalue
    let truth_eig = eigendecompose_sym(sigma)?;
    let truth = variance_explained("truth", truth_eig.vectors.view(), sigma)?;
    Ok(ReplicateOutcome {
        replicate,
        curves,
        truth,
        cpu_seconds,
        clamped: ds.clamped,
    })
}

fn mean_curve(label: &str, curves: impl Iterator<Item = Array1<f64>>) -> AssessmentCurve {
    let mut count = 0usize;
    let mut sum: Option<Array1<f64>> = None;
    for c in curves {
        count += 1;
        sum = Some(match sum {
            None => c,
            Some(s) => s + c,
        });
    }
    AssessmentCurve {
        method: label.to_string(),
        cumulative: sum.map(|s| s / count as f64).unwrap_or_else(|| Array1::zeros(0)),
    }
}

/// Runs `config.replicates` seeded replicates in parallel and averages the
/// variance-explained curves of each method.
///
/// A replicate whose generation or estimation fails is skipped; more than 10%
/// skipped replicates is an error.
pub fn run_comparison(
    config: &SimulationConfig,
    methods: &[Method],
    correction: Correction,
) -> Result<ComparisonResult> {
    config.validate()?;
    if methods.is_empty() {
        return Err(Error::Usage("at least one method is required".into()));
    }
    if config.replicates == 0 {
        return Err(Error::InvalidInput("replicates must be >= 1".into()));
    }
    let pool = worker_pool()?;
    let results: Vec<Result<ReplicateOutcome>> = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, methods, correction, r))
            .collect()
    });
    let mut outcomes = Vec::new();
    let mut skipped = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                log::warn!("replicate {r} skipped: {e}");
                skipped.push((r, e.to_string()));
            }
        }
    }
    if skipped.len() * 10 > config.replicates {
        return Err(Error::TooManySkipped {
            skipped: skipped.len(),
            total: config.replicates,
        });
    }
    let mean_curves = methods
        .iter()
        .enumerate()
        .map(|(i, m)| mean_curve(m.label(), outcomes.iter().map(|o| o.curves[i].cumulative.clone())))
        .collect();
    let mean_truth = mean_curve("truth", outcomes.iter().map(|o| o.truth.cumulative.clone()));
    Ok(ComparisonResult {
        methods: methods.to_vec(),
        outcomes,
        skipped,
        mean_curves,
        mean_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simbench::{Preset, SimulationConfig};
    use ndarray::array;

    #[test]
    fn curve_examples() {
        let sigma = array![[3.0, 0.0], [0.0, 1.0]];
        let swapped = array![[0.0, 1.0], [1.0, 0.0]];
        let c = variance_explained("x", swapped.view(), sigma.view()).unwrap();
        assert_eq!(c.cumulative, array![1.0, 4.0]);
        let c = variance_explained("x", Array2::<f64>::eye(2).view(), sigma.view()).unwrap();
        assert_eq!(c.cumulative, array![3.0, 4.0]);
        let bad = array![[1.0, 1.0], [0.0, 1.0]];
        assert!(variance_explained("x", bad.view(), sigma.view()).is_err());
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("pca".parse::<Method>().is_err());
    }

    #[test]
    fn small_run_is_deterministic() {
        let mut cfg = SimulationConfig::preset(Preset::Fig1, 200, 4);
        cfg.replicates = 3;
        cfg.seed = 17;
        let a = run_comparison(&cfg, &[Method::PoissonPca, Method::NaivePca], Correction::None).unwrap();
        let b = run_comparison(&cfg, &[Method::PoissonPca, Method::NaivePca], Correction::None).unwrap();
        assert_eq!(a.mean_curves, b.mean_curves);
        assert_eq!(a.outcomes.len(), 3);
        assert!(a.outcomes.iter().all(|o| o.cpu_seconds.iter().all(|t| *t >= 0.0)));
    }
}
