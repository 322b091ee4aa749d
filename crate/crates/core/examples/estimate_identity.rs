// Covariance of Poisson means from raw counts, next to the naive sample covariance.

use ndarray::{array, Array2, Axis};
use poisson_pca::simbench::{gen_dataset, replicate_rng, Preset, SimulationConfig};
use poisson_pca::{estimate_cov_identity, Result};

pub fn run_example() -> Result<(f64, f64)> {
    let tiny = poisson_pca::CountMatrix::new(array![[2, 0], [0, 2]])?;
    println!("2x2 example:\n{}", estimate_cov_identity(&tiny)?.sigma());

    let mut cfg = SimulationConfig::preset(Preset::Fig1, 5_000, 6);
    cfg.seed = 1;
    let ds = gen_dataset(&cfg, &mut replicate_rng(cfg.seed, 0))?;
    let est = estimate_cov_identity(&ds.counts)?;

    let x = ds.counts.to_f64();
    let centred = &x - &x.mean_axis(Axis(0)).unwrap();
    let naive: Array2<f64> = centred.t().dot(&centred) / (x.nrows() as f64 - 1.0);

    let err = |m: &Array2<f64>| (m - &ds.sigma_true).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let (e_est, e_naive) = (err(&est.sigma().to_owned()), err(&naive));
    println!("max |error| vs true covariance: corrected {e_est:.2}, naive {e_naive:.2}");
    Ok((e_est, e_naive))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
