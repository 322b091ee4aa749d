//! Projection of observed counts onto an estimated log-scale principal
//! component space.
//!
//! For each sample, with `log Λ = μ + V a`, minimise
//!
//! `L(a) = ½ (a − a_[r])ᵀ D⁻¹ (a − a_[r]) + 1ᵀΛ − xᵀ log Λ`
//!
//! whose gradient is `D⁻¹(a − a_[r]) + Vᵀ(Λ − x)` and Hessian
//! `D⁻¹ I_{i>r} + Vᵀ diag(Λ) V`. Solved by Newton's method with
//! step halving.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::types::{CountMatrix, LatentPCA, Scores};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Gradient sup-norm tolerance, scaled by `1 + ‖x‖₁`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Discarded-component eigenvalues are floored at `floor · λ_1`.
    pub eigen_floor: f64,
    /// Stand-in for zero counts when building the starting point.
    pub init_zero_count: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            max_halvings: 30,
            eigen_floor: 1e-8,
            init_zero_count: 0.5,
        }
    }
}

/// Per-row outcome of the Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSolution {
    pub a: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective value after every accepted step, starting point first.
    pub objective_trace: Vec<f64>,
}

/// The per-sample optimisation problem for a fixed PCA and rank.
#[derive(Debug, Clone)]
pub struct ProjectionProblem<'a> {
    pca: &'a LatentPCA,
    rank: usize,
    /// `1/λ_i` for discarded components, zero for retained ones.
    precision: Array1<f64>,
    options: ProjectionOptions,
}

impl<'a> ProjectionProblem<'a> {
    pub fn new(pca: &'a LatentPCA, rank: usize, options: ProjectionOptions) -> Result<Self> {
        let p = pca.dim();
        if rank == 0 || rank > p {
            return Err(Error::InvalidInput(format!(
                "rank must be in 1..={p}, got {rank}"
            )));
        }
        let values = pca.eigenvalues();
        let mut precision = Array1::zeros(p);
        if rank < p {
            let top = values[0];
            if !(top > 0.0) {
                return Err(Error::InvalidInput(
                    "leading eigenvalue must be positive to penalise discarded components".into(),
                ));
            }
            let floor = options.eigen_floor * top;
            for i in rank..p {
                precision[i] = 1.0 / values[i].max(floor);
            }
        }
        Ok(Self {
            pca,
            rank,
            precision,
            options,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    fn log_means(&self, a: &Array1<f64>) -> Array1<f64> {
        &self.pca.center() + &self.pca.vectors().dot(a)
    }

    pub fn objective(&self, x: ArrayView1<f64>, a: &Array1<f64>) -> f64 {
        let eta = self.log_means(a);
        let penalty: f64 = self
            .precision
            .iter()
            .zip(a.iter())
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            * 0.5;
        let fit: f64 = eta
            .iter()
            .zip(x.iter())
            .map(|(e, xi)| e.exp() - xi * e)
            .sum();
        penalty + fit
    }

    pub fn gradient(&self, x: ArrayView1<f64>, a: &Array1<f64>) -> Array1<f64> {
        let lambda = self.log_means(a).mapv(f64::exp);
        let resid = &lambda - &x;
        &self.precision * a + self.pca.vectors().t().dot(&resid)
    }

    pub fn hessian(&self, a: &Array1<f64>) -> Array2<f64> {
        let lambda = self.log_means(a).mapv(f64::exp);
        let v = self.pca.vectors();
        let weighted = &v * &lambda.view().insert_axis(Axis(1));
        let mut h = v.t().dot(&weighted);
        for (i, w) in self.precision.iter().enumerate() {
            h[[i, i]] += w;
        }
        h
    }

    /// Starting point: rotate `log x − μ`, with zero counts replaced.
    pub fn initial_point(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let zero_log = self.options.init_zero_count.ln();
        let ell = x.mapv(|v| if v > 0.0 { v.ln() } else { zero_log });
        self.pca.vectors().t().dot(&(&ell - &self.pca.center()))
    }

    pub fn solve_from(&self, x: ArrayView1<f64>, start: Array1<f64>) -> RowSolution {
        let tol = self.options.tolerance * (1.0 + x.iter().map(|v| v.abs()).sum::<f64>());
        let mut a = start;
        let mut current = self.objective(x, &a);
        let mut trace = vec![current];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.options.max_iterations {
            let grad = self.gradient(x, &a);
            if grad.iter().all(|g| g.abs() <= tol) {
                converged = true;
                // one extra full step; the objective is flat to rounding here, so
                // judge it by the gradient instead
                if let Some(step) = cholesky_solve(self.hessian(&a).view(), &grad) {
                    let trial = &a - &step;
                    let value = self.objective(x, &trial);
                    let before = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
                    let after = self.gradient(x, &trial).iter().fold(0.0_f64, |m, g| m.max(g.abs()));
                    if value.is_finite() && after <= before {
                        a = trial;
                        current = value.min(current);
                        trace.push(current);
                    }
                }
                break;
            }
            iterations += 1;
            let step = self.newton_step(&a, &grad);
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..=self.options.max_halvings {
                let trial = &a - &(&step * scale);
                let value = self.objective(x, &trial);
                if value.is_finite() && value <= current {
                    a = trial;
                    current = value;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                // objective flat to rounding: fall back to gradient decrease
                let trial = &a - &step;
                let before = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
                let after = self.gradient(x, &trial).iter().fold(0.0_f64, |m, g| m.max(g.abs()));
                let value = self.objective(x, &trial);
                let flat = (value - current).abs() <= 1e-12 * (1.0 + current.abs());
                if !(flat && after < before) {
                    break;
                }
                a = trial;
                current = value.min(current);
            }
            trace.push(current);
        }
        if !converged {
            converged = self.gradient(x, &a).iter().all(|g| g.abs() <= tol);
        }
        RowSolution {
            a,
            converged,
            iterations,
            objective_trace: trace,
        }
    }

    fn newton_step(&self, a: &Array1<f64>, grad: &Array1<f64>) -> Array1<f64> {
        let h = self.hessian(a);
        if let Some(s) = cholesky_solve(h.view(), grad) {
            return s;
        }
        let ridge = h.diag().iter().fold(0.0_f64, |m, v| m.max(v.abs())) * 1e-10 + 1e-12;
        let mut hr = h;
        for i in 0..hr.nrows() {
            hr[[i, i]] += ridge;
        }
        cholesky_solve(hr.view(), grad).unwrap_or_else(|| grad.clone())
    }

    pub fn solve(&self, x: ArrayView1<f64>) -> RowSolution {
        self.solve_from(x, self.initial_point(x))
    }
}

fn check_dims(counts: &CountMatrix, pca: &LatentPCA) -> Result<()> {
    if counts.p() != pca.dim() {
        return Err(Error::DimensionMismatch {
            what: "count columns vs PCA dimension",
            expected: pca.dim(),
            found: counts.p(),
        });
    }
    Ok(())
}

fn assemble(pca: &LatentPCA, rank: usize, a: Array2<f64>, converged: Vec<bool>, iterations: Vec<usize>, fitted_from_truncated: bool) -> Scores {
    let mut truncated = a.clone();
    truncated.slice_mut(ndarray::s![.., rank..]).fill(0.0);
    let center = pca.center().insert_axis(Axis(0));
    let reconstruction = &truncated.dot(&pca.vectors().t()) + &center;
    let eta = if fitted_from_truncated {
        reconstruction.clone()
    } else {
        &a.dot(&pca.vectors().t()) + &center
    };
    Scores {
        a,
        rank,
        reconstruction,
        lambda_hat: eta.mapv(f64::exp),
        converged,
        iterations,
    }
}

/// Newton projection of every row of `counts` for the log transform.
///
/// Rows are solved independently (in parallel). Rows that hit the iteration
/// cap keep their last iterate and are flagged in [`Scores::converged`].
pub fn project_scores(
    counts: &CountMatrix,
    pca: &LatentPCA,
    rank: usize,
    options: ProjectionOptions,
) -> Result<Scores> {
    check_dims(counts, pca)?;
    let problem = ProjectionProblem::new(pca, rank, options)?;
    let x = counts.to_f64();
    let solutions: Vec<RowSolution> = (0..x.nrows())
        .into_par_iter()
        .map(|i| problem.solve(x.row(i)))
        .collect();
    let p = pca.dim();
    let mut a = Array2::zeros((counts.n(), p));
    let mut converged = Vec::with_capacity(counts.n());
    let mut iterations = Vec::with_capacity(counts.n());
    for (i, sol) in solutions.into_iter().enumerate() {
        a.row_mut(i).assign(&sol.a);
        converged.push(sol.converged);
        iterations.push(sol.iterations);
    }
    let failed = converged.iter().filter(|c| !**c).count();
    if failed > 0 {
        log::warn!("{failed} of {} rows did not converge", counts.n());
    }
    Ok(assemble(pca, rank, a, converged, iterations, false))
}

/// Log-transform-then-rotate projection: `a = Vᵀ(ℓ − μ)` truncated to the
/// first `rank` components, `ℓ_i = log x_i` or `zero_log` when `x_i = 0`.
pub fn naive_log_project(
    counts: &CountMatrix,
    pca: &LatentPCA,
    rank: usize,
    zero_log: f64,
) -> Result<Scores> {
    check_dims(counts, pca)?;
    let p = pca.dim();
    if rank == 0 || rank > p {
        return Err(Error::InvalidInput(format!(
            "rank must be in 1..={p}, got {rank}"
        )));
    }
    let ell = counts
        .data()
        .mapv(|v| if v > 0 { (v as f64).ln() } else { zero_log });
    let centered = &ell - &pca.center().insert_axis(Axis(0));
    let mut a = centered.dot(&pca.vectors());
    a.slice_mut(ndarray::s![.., rank..]).fill(0.0);
    let n = counts.n();
    Ok(assemble(pca, rank, a, vec![true; n], vec![0; n], true))
}

pub const DEFAULT_ZERO_LOG: f64 = -3.0;
