//! Watch the k-NN entropy estimate converge on a standard gaussian, and the
//! mutual-information decomposition recover the closed form for correlated
//! pairs.
//!
//! Run: cargo run --release --example gaussian_convergence

use knn_entropy::experiments::{run_sweep, ExperimentConfig, ExperimentKind, KRule};
use knn_entropy::{mutual_information, Dataset, Distribution, MetricSpace, Mode};

fn main() -> Result<(), knn_entropy::Error> {
    let dist = Distribution::gaussian(1, 1.0)?;
    let truth = dist.true_entropy();
    println!("Entropy of N(0,1): truth = {truth:.6} nats");
    println!("{:>6} {:>12} {:>12} {:>12}", "n", "estimate", "|bias|", "variance");
    println!("{}", "-".repeat(46));

    let mut cfg = ExperimentConfig::new(ExperimentKind::VarianceSweep, dist);
    cfg.n_grid = vec![125, 250, 500, 1000, 2000, 4000];
    cfg.k_rule = KRule::Fixed(1);
    cfg.trials = 100;
    cfg.base_seed = 42;
    let sweep = run_sweep(&cfg)?;
    for row in &sweep.rows {
        println!(
            "{:>6} {:>12.6} {:>12.6} {:>12.3e}",
            row.n,
            row.mean,
            row.bias.abs(),
            row.variance
        );
    }
    if let Some(fit) = &sweep.fit {
        println!(
            "variance ~ n^{:.3} (r^2 = {:.4}); the theory says n^-1\n",
            fit.slope, fit.r_squared
        );
    }

    println!("Mutual information of a correlated gaussian pair (n = 5000, k = 3):");
    println!("{:>6} {:>12} {:>12}", "rho", "truth", "estimate");
    println!("{}", "-".repeat(32));
    let pair_source = Distribution::gaussian(2, 1.0)?;
    let line = MetricSpace::euclidean(1)?;
    for rho in [0.0, 0.3, 0.5, 0.7, 0.9] {
        let z = pair_source.sample(5000, 7)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for p in z.iter_points() {
            xs.push(vec![p[0]]);
            ys.push(vec![rho * p[0] + (1.0f64 - rho * rho).sqrt() * p[1]]);
        }
        let x = Dataset::from_rows(line, &xs)?;
        let y = Dataset::from_rows(line, &ys)?;
        let mi = mutual_information(&x, &y, 3, Mode::Strict)?;
        let mi_truth = -0.5 * (1.0 - rho * rho).ln();
        println!("{rho:>6.2} {mi_truth:>12.4} {mi:>12.4}");
    }
    Ok(())
}
