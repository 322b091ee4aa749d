// Known per-sample depths: covariance of the normalised rates.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};

use poisson_pca::simbench::sample_poisson;
use poisson_pca::{estimate_cov_seqdepth, CountMatrix, Result, SequencingDepths};

pub fn run_example() -> Result<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (n, p) = (3_000, 4);
    let mut rates = Array2::from_shape_simple_fn((n, p), || rng.random_range(0.1..1.0));
    for mut row in rates.rows_mut() {
        let total = row.sum();
        row /= total;
    }
    let gamma = Gamma::new(4.0, 100.0).unwrap();
    let s = Array1::from_shape_simple_fn(n, || gamma.sample(&mut rng));
    let means = &rates * &s.view().insert_axis(Axis(1));
    let counts = CountMatrix::new(means.mapv(|l| sample_poisson(l, &mut rng)))?;

    let est = estimate_cov_seqdepth(&counts, &SequencingDepths::new(s)?)?;
    let centred = &rates - &rates.mean_axis(Axis(0)).unwrap();
    let target = centred.t().dot(&centred) / (n as f64 - 1.0);
    let err = (&est.sigma() - &target).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    println!("estimated rate covariance:\n{:.5}", est.sigma());
    println!("sample covariance of the true rates:\n{target:.5}");
    println!("max |difference| {err:.2e}");
    Ok(err)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
