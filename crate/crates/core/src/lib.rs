//! Poisson measurement-error corrected principal component analysis.
//!
//! Counts `X_ij ~ Po(Λ_ij)` are observed instead of the latent means `Λ`.
//! This crate estimates the covariance of `f(Λ)` for identity, polynomial and
//! log transforms, corrects for per-sample sequencing depth, projects samples
//! onto the latent principal components, and provides the simulation harness
//! used to compare against naive PCA.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod moments;
pub mod projection;
pub mod seqdepth;
pub mod simbench;
pub mod types;

pub use error::{Error, Result};
pub use estimators::{estimate_cov_identity, estimate_cov_seqdepth, estimate_cov_transformed};
pub use moments::{LogParams, Polynomial, Transform};
pub use projection::{naive_log_project, project_scores, ProjectionOptions};
pub use seqdepth::{compositional_correct, minvar_correct, MinVarReport};
pub use types::{CountMatrix, CovarianceEstimate, LatentPCA, Scores, SequencingDepths, TransformTag};
