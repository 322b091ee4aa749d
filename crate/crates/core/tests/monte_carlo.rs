//! Monte Carlo checks of the estimators and the simulator.

mod common;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use poisson_pca::moments::pairwise_condvar;
use poisson_pca::simbench::{
    gen_dataset, gen_orthogonal, replicate_rng, sample_poisson, LatentDist, Preset,
    SimulationConfig, FIG2_POLY,
};
use poisson_pca::{estimate_cov_identity, estimate_cov_transformed, CountMatrix, Polynomial, Transform};

fn poisson_matrix<R: Rng>(means: &Array2<f64>, rng: &mut R) -> CountMatrix {
    CountMatrix::new(means.mapv(|l| sample_poisson(l, rng))).unwrap()
}

#[test]
fn polynomial_estimator_is_unbiased() {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let poly = Polynomial::new(FIG2_POLY.to_vec()).unwrap();
    let lambda = Array2::from_shape_simple_fn((40, 3), || rng.random_range(20.0..80.0));
    let target = common::sample_cov(&lambda.mapv(|l| poly.eval(l)));
    let transform = Transform::Polynomial(poly);
    let estimates: Vec<Array2<f64>> = (0..1500)
        .map(|_| {
            let x = poisson_matrix(&lambda, &mut rng);
            estimate_cov_transformed(&x, &transform).unwrap().into_parts().0
        })
        .collect();
    let (mean, se) = common::mean_and_se(&estimates);
    for ((m, s), t) in mean.iter().zip(se.iter()).zip(target.iter()) {
        assert!((m - t).abs() <= 4.0 * s, "mean {m}, target {t}, se {s}");
    }
}

#[test]
fn identity_estimator_recovers_simulated_covariance() {
    let mut cfg = SimulationConfig::preset(Preset::Fig1, 20_000, 5);
    cfg.seed = 3;
    let ds = gen_dataset(&cfg, &mut replicate_rng(cfg.seed, 0)).unwrap();
    let latent_cov = common::sample_cov(&ds.latent);
    assert!(common::max_abs(&(&latent_cov - &ds.sigma_true)) < 1.5);
    let est = estimate_cov_identity(&ds.counts).unwrap();
    // Poisson noise adds roughly sqrt(Var(X)²·2/n) ≈ 1 to each entry's spread
    assert!(common::max_abs(&(&est.sigma() - &common::sample_cov(&ds.lambda))) < 4.0);
    // the uncorrected diagonal carries the Poisson noise, about 100 per coordinate
    let naive = common::sample_cov(&ds.counts.to_f64());
    assert!(naive.diag().iter().zip(ds.sigma_true.diag()).all(|(a, b)| a - b > 50.0));
}

#[test]
fn log_estimator_is_close_at_large_means() {
    let mut cfg = SimulationConfig::preset(Preset::Log, 20_000, 5);
    cfg.mean_center = 5.0;
    cfg.mean_sd = 0.2;
    cfg.seed = 4;
    let ds = gen_dataset(&cfg, &mut replicate_rng(cfg.seed, 0)).unwrap();
    let est = estimate_cov_transformed(&ds.counts, &Transform::log_default()).unwrap();
    let err = common::max_abs(&(&est.sigma() - &ds.sigma_true));
    assert!(err < 0.06, "max error {err}");
}

#[test]
fn gamma_spherical_latents_have_target_covariance() {
    let mut cfg = SimulationConfig::preset(Preset::Fig1, 60_000, 4);
    cfg.latent_dist = LatentDist::gamma_spherical();
    cfg.seed = 5;
    let ds = gen_dataset(&cfg, &mut replicate_rng(cfg.seed, 0)).unwrap();
    let cov = common::sample_cov(&ds.latent);
    let err = common::max_abs(&(&cov - &ds.sigma_true)) / 25.0;
    assert!(err < 0.08, "relative error {err}");
    let mean = ds.latent.mean_axis(Axis(0)).unwrap();
    assert!((&mean - &ds.means).iter().all(|d| d.abs() < 0.3));
}

#[test]
fn simulated_depths_follow_gamma_moments() {
    let mut cfg = SimulationConfig::preset(Preset::Depth, 20_000, 4);
    cfg.seed = 6;
    let ds = gen_dataset(&cfg, &mut replicate_rng(cfg.seed, 0)).unwrap();
    let s = ds.depths.unwrap();
    let v = s.values();
    let mean = v.mean().unwrap();
    let var = v.var(1.0);
    assert!((mean / 400.0 - 1.0).abs() < 0.02, "mean {mean}");
    assert!((var / 40_000.0 - 1.0).abs() < 0.06, "variance {var}");
}

#[test]
fn haar_entries_have_uniform_second_moment() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let p = 5;
    let draws = 6000;
    let mut first = Array1::<f64>::zeros(draws);
    let mut sq = Array2::<f64>::zeros((p, p));
    for k in 0..draws {
        let v = gen_orthogonal(p, &mut rng);
        first[k] = v[[0, 0]];
        sq += &v.mapv(|e| e * e);
    }
    sq /= draws as f64;
    assert!(first.mean().unwrap().abs() < 0.02);
    for e in sq.iter() {
        assert!((e - 1.0 / p as f64).abs() < 0.015, "E[v²] = {e}");
    }
}

#[test]
fn pairwise_estimator_weights_form_a_distribution() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let lambda: f64 = 3.0;
    let column: Vec<u64> = (0..400).map(|_| sample_poisson(lambda, &mut rng)).collect();
    let top = 2 * column.iter().copied().max().unwrap();
    let total: f64 = (0..=top)
        .map(|n| pairwise_condvar(&column, n).unwrap() * 2f64.powi(n as i32))
        .sum();
    assert!((total - 1.0).abs() < 1e-12, "total {total}");
}

#[test]
fn pairwise_estimator_is_near_poisson_mass_at_the_mode() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let lambda: f64 = 3.0;
    let reps = 200;
    let n_index = 6u64;
    let mut total = 0.0;
    for _ in 0..reps {
        let column: Vec<u64> = (0..400).map(|_| sample_poisson(lambda, &mut rng)).collect();
        total += pairwise_condvar(&column, n_index).unwrap();
    }
    let mean = total / reps as f64;
    let target = (-2.0 * lambda).exp() * lambda.powi(6) / 720.0;
    // biased by construction; only the order of magnitude is meaningful
    assert!(mean / target > 0.5 && mean / target < 2.0, "mean {mean}, target {target}");
}
