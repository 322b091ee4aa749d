// Scores for new samples under a log-scale latent PCA.

use ndarray::{s, Array2};
use poisson_pca::simbench::{gen_dataset, replicate_rng, Preset, SimulationConfig};
use poisson_pca::{
    estimate_cov_transformed, naive_log_project, project_scores, LatentPCA, ProjectionOptions,
    Result, Transform,
};

pub fn run_example() -> Result<(f64, f64)> {
    let mut cfg = SimulationConfig::preset(Preset::Log, 2_000, 10);
    cfg.seed = 5;
    let ds = gen_dataset(&cfg, &mut replicate_rng(cfg.seed, 0))?;
    let est = estimate_cov_transformed(&ds.counts, &Transform::log_default())?;
    let pca = LatentPCA::from_covariance(est.sigma(), est.mean_g().to_owned())?;

    let rank = 2;
    let newton = project_scores(&ds.counts, &pca, rank, ProjectionOptions::default())?;
    let naive = naive_log_project(&ds.counts, &pca, rank, -3.0)?;
    println!("converged rows: {}/{}", newton.converged.iter().filter(|c| **c).count(), ds.counts.n());

    // compare reconstructed log means against the truth
    let truth = ds.lambda.mapv(f64::ln);
    let mse = |m: &Array2<f64>| (m - &truth).mapv(|e| e * e).mean().unwrap();
    let (m_newton, m_naive) = (mse(&newton.reconstruction), mse(&naive.reconstruction));
    println!("log-mean reconstruction MSE at rank {rank}: newton {m_newton:.4}, naive {m_naive:.4}");
    println!("first scores:\n{:.3}", newton.a.slice(s![..3, ..rank]));
    Ok((m_newton, m_naive))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
