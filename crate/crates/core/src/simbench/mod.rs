//! Simulation harness: synthetic latent-Poisson datasets with known
//! covariance, and a comparison of PCA variants by how much true variance
//! their estimated eigenvectors capture.

mod compare;
mod sampling;

pub use compare::{
    run_comparison, variance_explained, worker_pool, AssessmentCurve, ComparisonResult,
    method_covariance, replicate_rng, Correction, Method, ReplicateOutcome, NAIVE_ZERO_SUB,
    THREADS_ENV,
};
pub use sampling::{gen_orthogonal, gen_orthogonal_compositional, sample_poisson};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SymEigen;
use crate::moments::{Polynomial, Transform};
use crate::types::{CountMatrix, SequencingDepths};

/// Value given to latent means whose transformed draw falls below the range
/// of the transform on `[0, ∞)`.
pub const CLAMPED_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatentDist {
    Normal,
    /// Uniform direction with a centred `Gamma(shape, scale)` radius.
    GammaSpherical { shape: f64, scale: f64 },
}

impl LatentDist {
    pub fn gamma_spherical() -> Self {
        LatentDist::GammaSpherical {
            shape: 5.0,
            scale: 1.0 / 5f64.sqrt(),
        }
    }
}

impl fmt::Display for LatentDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatentDist::Normal => write!(f, "normal"),
            LatentDist::GammaSpherical { shape, scale } => {
                write!(f, "gamma-spherical(shape={shape:?},scale={scale:?})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn depth_default() -> Self {
        Self {
            shape: 4.0,
            scale: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Identity transform, Normal latent draws.
    Fig1,
    /// `f(x) = 0.004x³ − 0.4x² + 16x`.
    Fig2,
    /// Log transform, moderate counts with zeros.
    Log,
    /// Log transform with Gamma sequencing depths and a compositional latent
    /// covariance.
    Depth,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "log" => Ok(Preset::Log),
            "depth" => Ok(Preset::Depth),
            other => Err(Error::Usage(format!(
                "unknown preset {other:?} (expected fig1, fig2, log or depth)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Log => "log",
            Preset::Depth => "depth",
        })
    }
}

/// Coefficients (constant first) of the simulation polynomial.
pub const FIG2_POLY: [f64; 4] = [0.0, 16.0, -0.4, 0.004];

/// `d_i = scale · ratio^{i−1}` for `i = 1..=p`.
pub fn geometric_eigenvalues(p: usize, scale: f64, ratio: f64) -> Array1<f64> {
    Array1::from_iter((0..p).map(|i| scale * ratio.powi(i as i32)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    /// Eigenvalues `d` of the latent covariance `M = V diag(d) Vᵀ`.
    pub eigenvalues: Array1<f64>,
    pub transform: Transform,
    pub latent_dist: LatentDist,
    /// Per-coordinate means of the transformed latent variable are drawn
    /// once per dataset from `Normal(mean_center, mean_sd)`.
    pub mean_center: f64,
    pub mean_sd: f64,
    pub seqdepth: Option<GammaParams>,
    pub compositional: bool,
    pub replicates: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn preset(preset: Preset, n: usize, p: usize) -> Self {
        let base = SimulationConfig {
            n,
            p,
            eigenvalues: geometric_eigenvalues(p, 25.0, 0.6),
            transform: Transform::Identity,
            latent_dist: LatentDist::Normal,
            mean_center: 100.0,
            mean_sd: 15.0,
            seqdepth: None,
            compositional: false,
            replicates: 20,
            seed: 0,
        };
        match preset {
            Preset::Fig1 => base,
            Preset::Fig2 => SimulationConfig {
                transform: Transform::Polynomial(
                    Polynomial::new(FIG2_POLY.to_vec()).expect("fixed polynomial"),
                ),
                ..base
            },
            Preset::Log => SimulationConfig {
                eigenvalues: geometric_eigenvalues(p, 1.0, 0.6),
                transform: Transform::log_default(),
                mean_center: 2.0,
                mean_sd: 0.5,
                ..base
            },
            Preset::Depth => {
                let mut d = geometric_eigenvalues(p, 1.0, 0.6);
                if p > 0 {
                    d[p - 1] = 0.0;
                }
                SimulationConfig {
                    eigenvalues: d,
                    transform: Transform::log_default(),
                    mean_center: -(p as f64).ln(),
                    mean_sd: 0.5,
                    seqdepth: Some(GammaParams::depth_default()),
                    compositional: true,
                    ..base
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 2 {
            return Err(Error::InvalidInput(format!(
                "simulation needs n >= 2 and p >= 2, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        if self.eigenvalues.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "simulation eigenvalues",
                expected: self.p,
                found: self.eigenvalues.len(),
            });
        }
        let d = &self.eigenvalues;
        if d.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("eigenvalues must be finite and >= 0".into()));
        }
        if d.windows(2).into_iter().any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("eigenvalues must be non-increasing".into()));
        }
        if self.compositional && d[self.p - 1] != 0.0 {
            return Err(Error::InvalidInput(
                "compositional simulation requires the last eigenvalue to be 0".into(),
            ));
        }
        if !(self.mean_sd >= 0.0 && self.mean_center.is_finite()) {
            return Err(Error::InvalidInput("invalid mean distribution".into()));
        }
        match &self.transform {
            Transform::Polynomial(poly) if !poly.is_strictly_increasing() => {
                return Err(Error::InvalidInput(
                    "simulation polynomial must be strictly increasing on [0, inf)".into(),
                ))
            }
            Transform::CustomTaylor(_) => {
                return Err(Error::InvalidInput(
                    "custom tables have no inverse and cannot drive a simulation".into(),
                ))
            }
            _ => {}
        }
        if let LatentDist::GammaSpherical { shape, scale } = self.latent_dist {
            if !(shape > 0.0 && scale > 0.0) {
                return Err(Error::InvalidInput("gamma radius needs shape, scale > 0".into()));
            }
        }
        if let Some(g) = self.seqdepth {
            if !(g.shape > 0.0 && g.scale > 0.0) {
                return Err(Error::InvalidInput("depth gamma needs shape, scale > 0".into()));
            }
        }
        Ok(())
    }

    /// `key = value` lines describing the configuration.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let list = |a: &Array1<f64>| {
            a.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
        };
        let transform = match &self.transform {
            Transform::Identity => "identity".to_string(),
            Transform::Polynomial(p) => format!(
                "poly:{}",
                p.coeffs().iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(",")
            ),
            Transform::Log(lp) => format!("log:{:?},{},{}", lp.center, lp.order, lp.switch),
            Transform::CustomTaylor(t) => format!("custom:{} entries", t.len()),
        };
        let poly_note = match self.transform {
            Transform::Polynomial(_) | Transform::Identity => {
                format!("draws below f(0) clamped to lambda = {CLAMPED_LAMBDA:e}")
            }
            _ => "none".to_string(),
        };
        vec![
            ("n".into(), self.n.to_string()),
            ("p".into(), self.p.to_string()),
            ("eigenvalues".into(), list(&self.eigenvalues)),
            ("transform".into(), transform),
            ("latent_dist".into(), self.latent_dist.to_string()),
            (
                "mean_dist".into(),
                format!("normal({:?},{:?})", self.mean_center, self.mean_sd),
            ),
            (
                "seqdepth".into(),
                match self.seqdepth {
                    None => "none".into(),
                    Some(g) => format!("gamma(shape={:?},scale={:?})", g.shape, g.scale),
                },
            ),
            ("compositional".into(), self.compositional.to_string()),
            ("out_of_range_handling".into(), poly_note),
            ("replicates".into(), self.replicates.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// One simulated dataset and its ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub counts: CountMatrix,
    /// Covariance `M` of the transformed latent rows.
    pub sigma_true: Array2<f64>,
    pub v_true: Array2<f64>,
    pub depths: Option<SequencingDepths>,
    /// Mean vector of the transformed latent rows.
    pub means: Array1<f64>,
    /// Transformed latent rows `T`.
    pub latent: Array2<f64>,
    /// Poisson means before depth scaling.
    pub lambda: Array2<f64>,
    /// Entries whose draw fell outside the transform's range.
    pub clamped: usize,
}

/// `f⁻¹(y)` for a polynomial that is strictly increasing on `[0, ∞)`.
/// Bisection to bracket, then safeguarded Newton.
pub fn invert_monotone_poly(poly: &Polynomial, y: f64) -> Result<f64> {
    let f0 = poly.eval(0.0);
    if !y.is_finite() {
        return Err(Error::NonFinite("polynomial inverse target".into()));
    }
    if y < f0 {
        return Err(Error::InvalidInput(format!(
            "{y} lies below f(0) = {f0}; no nonnegative preimage"
        )));
    }
    if y == f0 {
        return Ok(0.0);
    }
    let tol = 1e-10 * (1.0 + y.abs());
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while poly.eval(hi) < y {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NonFinite("polynomial inverse bracket".into()));
        }
    }
    let dcoeffs = poly.derivative();
    let deriv = |x: f64| dcoeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = poly.eval(x) - y;
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = deriv(x);
        let newton = x - fx / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let fx = poly.eval(x) - y;
    if fx.abs() <= tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            what: format!("polynomial inverse at y = {y}"),
            iterations: 200,
        })
    }
}

/// Symmetric square root `V diag(√d) Vᵀ`.
fn sqrt_cov(v: &Array2<f64>, d: &Array1<f64>) -> Array2<f64> {
    SymEigen {
        values: d.mapv(f64::sqrt),
        vectors: v.clone(),
    }
    .reconstruct()
}

/// Rows with zero mean and identity covariance.
fn standard_rows<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    dist: LatentDist,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let mut z: Array2<f64> = Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(rng));
    if let LatentDist::GammaSpherical { shape, scale } = dist {
        let gamma = Gamma::new(shape, scale)
            .map_err(|e| Error::InvalidInput(format!("gamma radius: {e}")))?;
        let center = shape * scale;
        // Var(radius) = shape·scale²; cov of radius·direction is that over p
        let whiten = (p as f64 / (shape * scale * scale)).sqrt();
        for mut row in z.axis_iter_mut(Axis(0)) {
            let norm = row.dot(&row).sqrt();
            let radius = gamma.sample(rng) - center;
            row *= radius * whiten / norm;
        }
    }
    Ok(z)
}

fn inverse_transform(transform: &Transform, t: f64) -> Result<Option<f64>> {
    match transform {
        Transform::Identity => Ok((t >= 0.0).then_some(t)),
        Transform::Log(_) => Ok(Some(t.exp())),
        Transform::Polynomial(poly) => {
            if t < poly.eval(0.0) {
                Ok(None)
            } else {
                invert_monotone_poly(poly, t).map(Some)
            }
        }
        Transform::CustomTaylor(_) => Err(Error::InvalidInput(
            "custom tables have no inverse".into(),
        )),
    }
}

/// Draws one dataset: `M = V diag(d) Vᵀ`, latent rows `T ~ (m, M)`,
/// `Λ = f⁻¹(T)`, optional depths `S ~ Gamma`, and `X ~ Po(S Λ)`.
pub fn gen_dataset<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R) -> Result<Dataset> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let v = if config.compositional {
        gen_orthogonal_compositional(p, rng)
    } else {
        gen_orthogonal(p, rng)
    };
    let d = &config.eigenvalues;
    let sigma_true = SymEigen {
        values: d.clone(),
        vectors: v.clone(),
    }
    .reconstruct();
    let mean_dist = Normal::new(config.mean_center, config.mean_sd)
        .map_err(|e| Error::InvalidInput(format!("mean distribution: {e}")))?;
    let means = Array1::from_shape_simple_fn(p, || mean_dist.sample(rng));
    let z = standard_rows(n, p, config.latent_dist, rng)?;
    let root = sqrt_cov(&v, d);
    let latent = z.dot(&root) + means.view().insert_axis(Axis(0));

    let mut clamped = 0;
    let mut lambda = Array2::zeros((n, p));
    for (out, &t) in lambda.iter_mut().zip(latent.iter()) {
        *out = match inverse_transform(&config.transform, t)? {
            Some(l) => l,
            None => {
                clamped += 1;
                CLAMPED_LAMBDA
            }
        };
    }
    if clamped > 0 {
        log::debug!("{clamped} latent draws clamped to {CLAMPED_LAMBDA:e}");
    }

    let depths = match config.seqdepth {
        None => None,
        Some(g) => {
            let gamma = Gamma::new(g.shape, g.scale)
                .map_err(|e| Error::InvalidInput(format!("depth gamma: {e}")))?;
            let s = Array1::from_shape_simple_fn(n, || gamma.sample(rng).max(f64::MIN_POSITIVE));
            Some(SequencingDepths::new(s)?)
        }
    };
    let mut counts = Array2::<u64>::zeros((n, p));
    for i in 0..n {
        let s = depths.as_ref().map_or(1.0, |d| d.values()[i]);
        for j in 0..p {
            counts[[i, j]] = sample_poisson(s * lambda[[i, j]], rng);
        }
    }
    Ok(Dataset {
        counts: CountMatrix::new(counts)?,
        sigma_true,
        v_true: v,
        depths,
        means,
        latent,
        lambda,
        clamped,
    })
}
