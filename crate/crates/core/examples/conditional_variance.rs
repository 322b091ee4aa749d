// The associated-Stirling coefficient table and the log-count conditional variance.

use poisson_pca::moments::{assoc_stirling, compute_condvar_coeffs, log_condvar};
use poisson_pca::Result;

pub fn run_example() -> Result<Vec<f64>> {
    for n in 2..=6 {
        let row: Vec<String> = (1..=n / 2).map(|k| assoc_stirling(n, k).to_string()).collect();
        println!("n = {n}: {}", row.join(" "));
    }
    let coeffs = compute_condvar_coeffs(9)?;
    let exact: Vec<String> = coeffs.exact().iter().map(|r| r.to_string()).collect();
    println!("coefficients: {}", exact.join(", "));
    let values: Vec<f64> = [5u64, 20, 100].iter().map(|&x| log_condvar(x, &coeffs)).collect();
    for (x, v) in [5, 20, 100].iter().zip(&values) {
        println!("x = {x:>3}: estimated Var(log) {v:.5}, 1/x = {:.5}", 1.0 / *x as f64);
    }
    Ok(values)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
