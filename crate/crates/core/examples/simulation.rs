// A small method comparison: cumulative variance captured per component.

use poisson_pca::simbench::{run_comparison, Correction, Method, Preset, SimulationConfig};
use poisson_pca::Result;

pub fn run_example() -> Result<Vec<f64>> {
    let mut cfg = SimulationConfig::preset(Preset::Fig1, 2_000, 8);
    cfg.replicates = 4;
    cfg.seed = 6;
    let result = run_comparison(&cfg, &[Method::PoissonPca, Method::NaivePca], Correction::None)?;
    println!("{:>12} {}", "k", (1..=4).map(|k| format!("{k:>8}")).collect::<String>());
    let mut firsts = Vec::new();
    for curve in result.mean_curves.iter().chain(std::iter::once(&result.mean_truth)) {
        let row: String = curve.cumulative.iter().take(4).map(|v| format!("{v:>8.2}")).collect();
        println!("{:>12} {row}", curve.method);
        firsts.push(curve.cumulative[0]);
    }
    Ok(firsts)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
