//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them).
//!
//! Every criterion is seeded, so outcomes are reproducible bit-for-bit;
//! statistical margins (3 standard errors, Hoeffding 99%) refer to the
//! randomness across the fixed seeds.

use knn_entropy::bounds;
use knn_entropy::experiments::{
    run_concentration, run_identity, run_moments, run_sweep, ExperimentConfig, ExperimentKind,
    KRule,
};
use knn_entropy::knn::Neighbor;
use knn_entropy::{
    kl_entropy, mutual_information, Dataset, Distribution, KnnIndex, MetricSpace, Mode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(id: u32, name: &str, detail: &str) {
    println!("criterion {id:2} ({name}): PASS  [{detail}]");
}

// ---------------------------------------------------------------------------
// 1. Oracle equivalence: k-d tree vs brute-force k-NN, bitwise, same tie rule.
// ---------------------------------------------------------------------------

fn oracle_sort(data: &Dataset, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
    let mut all: Vec<(f64, usize)> = data
        .iter_points()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, p)| (data.space().distance_sq(x, p), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all.into_iter()
        .map(|(d2, i)| Neighbor {
            distance: d2.sqrt(),
            index: i,
        })
        .collect()
}

#[test]
fn criterion_01_oracle_equivalence() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE01);
    let mut checked = 0usize;
    for trial in 0..1000 {
        let dim = rng.gen_range(1..=5);
        let n = rng.gen_range(2..=200);
        let space = if trial % 2 == 0 {
            MetricSpace::euclidean(dim).unwrap()
        } else {
            MetricSpace::flat_torus(dim).unwrap()
        };
        // Mix a coarse grid in so exact distance ties actually occur.
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            rng.gen_range(0..6) as f64 / 6.0
                        } else {
                            rng.gen::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        let data = Dataset::from_rows(space, &rows).unwrap();
        let tree = KnnIndex::build(&data);
        let k = rng.gen_range(1..=(n - 1).min(10));

        // Leave-one-out on a sample of points (full-loo equivalence is
        // covered by the knn unit tests).
        let loo = tree.loo_knn_distances(k).unwrap();
        for _ in 0..10 {
            let i = rng.gen_range(0..n);
            let want = oracle_sort(&data, data.point(i), k, Some(i));
            assert_eq!(
                loo.eps[i].to_bits(),
                want[k - 1].distance.to_bits(),
                "loo eps mismatch (space {space}, n={n}, k={k}, i={i})"
            );
            let got: Vec<usize> = loo.neighbor_indices[i].clone();
            let expect: Vec<usize> = want.iter().map(|c| c.index).collect();
            assert_eq!(got, expect, "loo neighbor order mismatch");
            checked += 1;
        }
        // One standalone query point.
        let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let got = tree.knn_query(&x, k, None).unwrap();
        let want = oracle_sort(&data, &x, k, None);
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.distance.to_bits(), w.distance.to_bits());
            assert_eq!(g.index, w.index);
        }
        checked += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "oracle equivalence took {elapsed:.1}s");
    pass(
        1,
        "oracle equivalence",
        &format!("1000 configurations, {checked} queries, {elapsed:.2}s"),
    );
}

// ---------------------------------------------------------------------------
// 2. Estimator algebra: exact translation invariance, scale equivariance.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_estimator_algebra() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE02);
    let mut worst_scale_err = 0.0f64;
    for _ in 0..100 {
        let dim = rng.gen_range(1..=3);
        let n = rng.gen_range(10..=120);
        let k = rng.gen_range(1..=3.min(n - 1));
        let space = MetricSpace::euclidean(dim).unwrap();

        // Dyadic coordinates and shift: x + t is exact, so the estimate is
        // bit-identical under translation.
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| rng.gen_range(0u32..1 << 20) as f64 / (1 << 20) as f64)
                    .collect()
            })
            .collect();
        let shift: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(0u32..1 << 10) as f64 / (1 << 10) as f64 - 0.5)
            .collect();
        let translated: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&shift).map(|(a, t)| a + t).collect())
            .collect();
        let h0 = kl_entropy(&Dataset::from_rows(space, &rows).unwrap(), k, Mode::Strict).unwrap();
        let h1 = kl_entropy(
            &Dataset::from_rows(space, &translated).unwrap(),
            k,
            Mode::Strict,
        )
        .unwrap();
        assert_eq!(
            h0.value.to_bits(),
            h1.value.to_bits(),
            "translation changed the estimate"
        );

        // Scale equivariance: H(aX) - H(X) = D ln a within 1e-9.
        let a = rng.gen_range(0.1..10.0);
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|&c| a * c).collect())
            .collect();
        let hs = kl_entropy(
            &Dataset::from_rows(space, &scaled).unwrap(),
            k,
            Mode::Strict,
        )
        .unwrap();
        let err = (hs.value - h0.value - dim as f64 * a.ln()).abs();
        worst_scale_err = worst_scale_err.max(err);
        assert!(err <= 1e-9, "scale equivariance off by {err:.2e} (a={a})");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "estimator algebra took {elapsed:.1}s");
    pass(
        2,
        "estimator algebra",
        &format!("worst scale error {worst_scale_err:.2e}, {elapsed:.2}s"),
    );
}

// ---------------------------------------------------------------------------
// 3. Digamma identity on the uniform torus.
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_digamma_identity() {
    let dist = Distribution::uniform_torus(1).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::DigammaIdentity, dist);
    cfg.n_grid = vec![1000];
    cfg.trials = 200;
    cfg.k_list = vec![1, 2, 5];
    cfg.base_seed = 0xACCE03;
    let res = run_identity(&cfg).unwrap();
    let mut detail = String::new();
    for row in &res.rows {
        assert!(
            (row.mean_log_ball_prob - row.target).abs() <= 3.0 * row.std_error,
            "k={}: mean {} vs psi(k)-psi(n) {} (3 SE = {})",
            row.k,
            row.mean_log_ball_prob,
            row.target,
            3.0 * row.std_error
        );
        detail.push_str(&format!("k={} z={:+.2} ", row.k, row.z_score));
    }
    pass(3, "digamma identity", detail.trim());
}

// ---------------------------------------------------------------------------
// 4. Exact unbiasedness on the torus.
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_torus_unbiasedness() {
    let mut detail = String::new();
    for dim in [1usize, 2] {
        for n in [100usize, 1000] {
            for k in [1usize, 3] {
                let dist = Distribution::uniform_torus(dim).unwrap();
                let mut cfg = ExperimentConfig::new(ExperimentKind::BiasSweep, dist);
                cfg.n_grid = vec![n];
                cfg.k_rule = KRule::Fixed(k);
                cfg.trials = 200;
                cfg.base_seed = 0xACCE04 + (dim * 1000 + n + k) as u64;
                let res = run_sweep(&cfg).unwrap();
                let row = &res.rows[0];
                assert!(
                    row.bias.abs() <= 3.0 * row.se_mean,
                    "D={dim} n={n} k={k}: bias {} exceeds 3 SE {}",
                    row.bias,
                    row.se_mean
                );
                detail.push_str(&format!(
                    "D{dim}/n{n}/k{k} z={:+.2} ",
                    row.bias / row.se_mean
                ));
            }
        }
    }
    pass(4, "torus unbiasedness", detail.trim());
}

// ---------------------------------------------------------------------------
// 5. Gaussian entropy recovery.
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_gaussian_recovery() {
    let dist = Distribution::gaussian(1, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::BiasSweep, dist);
    cfg.n_grid = vec![10_000];
    cfg.k_rule = KRule::Fixed(1);
    cfg.trials = 50;
    cfg.base_seed = 0xACCE05;
    let res = run_sweep(&cfg).unwrap();
    let mean = res.rows[0].mean;
    let err = (mean - 1.4189385).abs();
    assert!(err <= 0.05, "mean {mean} misses 1.4189385 by {err}");
    pass(
        5,
        "gaussian entropy recovery",
        &format!("mean {mean:.5}, |err| {err:.4} <= 0.05"),
    );
}

// ---------------------------------------------------------------------------
// 6. Variance rate ~ 1/n.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_variance_rate() {
    let dist = Distribution::gaussian(1, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::VarianceSweep, dist);
    cfg.n_grid = vec![250, 500, 1000, 2000, 4000];
    cfg.k_rule = KRule::Fixed(1);
    cfg.trials = 200;
    cfg.base_seed = 0xACCE06;
    let res = run_sweep(&cfg).unwrap();
    for w in res.rows.windows(2) {
        assert!(w[0].variance.is_finite() && w[1].variance.is_finite());
        assert!(
            w[1].variance < w[0].variance,
            "variance not decreasing along the n grid"
        );
    }
    let fit = res.fit.as_ref().expect("multi-point grid");
    let slope = fit.slope;
    assert!(
        (-1.3..=-0.7).contains(&slope),
        "variance log-log slope {slope} outside [-1.3, -0.7]"
    );
    pass(
        6,
        "variance rate",
        &format!("slope {slope:.3} in [-1.3, -0.7], r^2 {:.3}", fit.r_squared),
    );
}

// ---------------------------------------------------------------------------
// 7. Bias rate for a smooth density in D = 5.
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_bias_rate() {
    let start = std::time::Instant::now();
    let dist = Distribution::gaussian(5, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::BiasSweep, dist);
    cfg.n_grid = vec![500, 1000, 2000, 4000, 8000];
    cfg.k_rule = KRule::Fixed(1);
    cfg.trials = 200;
    cfg.base_seed = 0xACCE07;
    let res = run_sweep(&cfg).unwrap();
    let biases: Vec<f64> = res.rows.iter().map(|r| r.bias.abs()).collect();
    for w in biases.windows(2) {
        assert!(
            w[1] < w[0],
            "|bias| not decreasing along the n grid: {biases:?}"
        );
    }
    let slope = res.fit.as_ref().expect("multi-point grid").slope;
    assert!(
        (-0.8..=-0.15).contains(&slope),
        "bias log-log slope {slope} outside [-0.8, -0.15] (predicted -0.4)"
    );
    pass(
        7,
        "bias rate",
        &format!(
            "|bias| {:.4} -> {:.4}, slope {slope:.3} in [-0.8, -0.15], {:.0}s",
            biases[0],
            biases[biases.len() - 1],
            start.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Concentration domination on the torus.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_concentration_domination() {
    let mut detail = String::new();
    for k in [1usize, 2] {
        let dist = Distribution::uniform_torus(1).unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Concentration, dist);
        cfg.n_grid = vec![100];
        cfg.k_rule = KRule::Fixed(k);
        cfg.r_points = 20;
        cfg.trials = 100_000;
        cfg.base_seed = 0xACCE08 + k as u64;
        let res = run_concentration(&cfg).unwrap();
        assert_eq!(res.rows.len(), 40);
        let mut worst_margin = f64::NEG_INFINITY;
        for row in &res.rows {
            assert!(
                row.bound.valid,
                "k={k}: r={} escaped validity window",
                row.r
            );
            let slack = row.bound.clamped - (row.empirical - row.hoeffding_margin);
            worst_margin = worst_margin.max(-slack);
            assert!(
                slack >= 0.0,
                "k={k} {} tail at r={}: empirical {} - margin {} exceeds bound {}",
                row.tail,
                row.r,
                row.empirical,
                row.hoeffding_margin,
                row.bound.clamped
            );
        }
        detail.push_str(&format!("k={k} max(excess)={worst_margin:.2e} "));
    }
    pass(8, "concentration domination", detail.trim());
}

// ---------------------------------------------------------------------------
// 9. Moment bounds at a fixed query point.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_moment_bounds() {
    let dist = Distribution::uniform_torus(1).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Moments, dist);
    cfg.n_grid = vec![99];
    cfg.k_rule = KRule::Fixed(1);
    cfg.alphas = vec![1.0, -0.5];
    cfg.trials = 20_000;
    cfg.base_seed = 0xACCE09;
    let res = run_moments(&cfg).unwrap();

    let first = &res.rows[0];
    assert_eq!(first.alpha, Some(1.0));
    // Order-statistics truth: E[eps_1] = 1/(2(n+1)) = 1/200 at n = 99.
    let truth = 1.0 / 200.0;
    assert!(
        (first.empirical - truth).abs() <= 3.0 * first.std_error,
        "E[eps] {} vs truth {truth} (3 SE = {})",
        first.empirical,
        3.0 * first.std_error
    );
    assert!(first.empirical <= 0.015, "E[eps] above C_2 k/(gamma n)");
    assert!(first.empirical <= first.bound);

    let neg = &res.rows[1];
    assert_eq!(neg.alpha, Some(-0.5));
    assert!(
        neg.empirical <= neg.bound,
        "E[eps^-1/2] {} above C_3 bound {}",
        neg.empirical,
        neg.bound
    );
    pass(
        9,
        "moment bounds",
        &format!(
            "E[eps]={:.5} (truth 0.005, bound {:.5}); E[eps^-1/2]={:.2} <= {:.2}",
            first.empirical, first.bound, neg.empirical, neg.bound
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. Quadrature / closed-form consistency of the expectation bounds.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_quadrature_consistency() {
    let start = std::time::Instant::now();
    let rel = 1e-6;
    let mut combos = 0usize;
    let mut worst = 0.0f64;
    for &k in &[1usize, 2, 3, 5, 8] {
        for &n in &[100usize, 1000, 31_623] {
            for &gamma_star in &[0.5f64, 2.0] {
                for &ratio in &[1.0f64, 2.0] {
                    for &dim in &[1usize, 3] {
                        let gamma_sup = gamma_star * ratio;
                        // f = ln against the closed upper log-moment bound.
                        let q = bounds::expectation_upper_bound(
                            |x| x.ln(),
                            |x| 1.0 / x,
                            k,
                            n,
                            dim,
                            gamma_star,
                            0.0,
                        )
                        .unwrap();
                        let c = bounds::log_moment_upper_closed(k, n, dim, gamma_star).unwrap();
                        let e_log_u = (q - c).abs() / c.abs().max(1e-300);

                        // f = x (alpha = 1) against the sharp positive-moment form.
                        let q5 = bounds::expectation_upper_bound(
                            |x| x,
                            |_| 1.0,
                            k,
                            n,
                            dim,
                            gamma_star,
                            0.0,
                        )
                        .unwrap();
                        let c5 =
                            bounds::positive_moment_closed(1.0, k, n, dim, gamma_star).unwrap();
                        let e_mom_u = (q5 - c5).abs() / c5.abs();

                        // f = ln against the C_1 closed form of the lower log bound.
                        let q4 = bounds::expectation_lower_bound(
                            |x| x.ln(),
                            |x| 1.0 / x,
                            k,
                            n,
                            dim,
                            gamma_star,
                            gamma_sup,
                            0.0,
                        )
                        .unwrap();
                        let c4 = bounds::log_moment_lower_closed(k, n, dim, gamma_star, gamma_sup)
                            .unwrap();
                        let e_log_l = (q4 - c4).abs() / c4.abs();

                        // f = -x^alpha at alpha = -kappa/2 against the C_3 form.
                        let alpha = -0.5 * dim as f64 * k as f64 * gamma_star / gamma_sup;
                        let q7 = bounds::expectation_lower_bound(
                            move |x| -x.powf(alpha),
                            move |x| -alpha * x.powf(alpha - 1.0),
                            k,
                            n,
                            dim,
                            gamma_star,
                            gamma_sup,
                            0.0,
                        )
                        .unwrap();
                        let c7 =
                            bounds::moment_bound(alpha, k, n, dim, gamma_star, gamma_sup).unwrap();
                        let e_mom_l = (q7 - c7).abs() / c7.abs();

                        for (tag, e) in [
                            ("log_upper", e_log_u),
                            ("moment_upper", e_mom_u),
                            ("log_lower", e_log_l),
                            ("moment_lower", e_mom_l),
                        ] {
                            assert!(
                                e <= rel,
                                "{tag} closed form mismatch {e:.2e} at k={k} n={n} \
                                 gamma=({gamma_star},{gamma_sup}) D={dim}"
                            );
                            worst = worst.max(e);
                        }
                        combos += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "quadrature consistency took {elapsed:.1}s");
    pass(
        10,
        "quadrature consistency",
        &format!("{combos} parameter points, worst rel err {worst:.1e}, {elapsed:.1}s"),
    );
}

// ---------------------------------------------------------------------------
// 11. Mutual information sanity.
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_mi_sanity() {
    let n = 10_000;
    let trials = 50;
    let k = 3;
    let space = MetricSpace::euclidean(1).unwrap();

    // Independent uniforms: I = 0.
    let cube = Distribution::uniform_cube(1).unwrap();
    let mut total = 0.0;
    for t in 0..trials {
        let x = cube.sample(n, 0xACCE11 + 2 * t as u64).unwrap();
        let y = cube.sample(n, 0xACCE11 + 2 * t as u64 + 1).unwrap();
        total += mutual_information(&x, &y, k, Mode::Strict).unwrap();
    }
    let mean_indep = total / trials as f64;
    assert!(
        mean_indep.abs() <= 0.02,
        "independent uniforms: mean MI {mean_indep}"
    );

    // Bivariate gaussian with rho = 0.5: I = -ln(1 - rho^2)/2.
    let rho: f64 = 0.5;
    let gauss2 = Distribution::gaussian(2, 1.0).unwrap();
    let mut total = 0.0;
    for t in 0..trials {
        let z = gauss2.sample(n, 0xACCE12 + t as u64).unwrap();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for p in z.iter_points() {
            xs.push(vec![p[0]]);
            ys.push(vec![rho * p[0] + (1.0 - rho * rho).sqrt() * p[1]]);
        }
        let x = Dataset::from_rows(space, &xs).unwrap();
        let y = Dataset::from_rows(space, &ys).unwrap();
        total += mutual_information(&x, &y, k, Mode::Strict).unwrap();
    }
    let mean_dep = total / trials as f64;
    let truth = -0.5 * (1.0 - rho * rho).ln();
    assert!(
        (mean_dep - truth).abs() <= 0.05,
        "bivariate gaussian: mean MI {mean_dep} vs {truth}"
    );
    pass(
        11,
        "mutual information sanity",
        &format!("independent {mean_indep:+.4}; correlated {mean_dep:.4} vs {truth:.4}"),
    );
}

// ---------------------------------------------------------------------------
// 12. Determinism across worker counts.
// ---------------------------------------------------------------------------

#[test]
fn criterion_12_worker_determinism() {
    let dist = Distribution::gaussian(1, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::VarianceSweep, dist);
    cfg.n_grid = vec![100, 200];
    cfg.trials = 16;
    cfg.base_seed = 0xACCE12;

    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_sweep(&cfg).unwrap().to_csv())
    };
    let one = run_with(1);
    let eight = run_with(8);
    assert_eq!(one, eight, "CSV differs between 1 and 8 workers");
    // And a rerun with the same config reproduces the same bytes.
    assert_eq!(one, run_with(3));
    pass(
        12,
        "worker determinism",
        &format!("{} bytes identical across 1/3/8 workers", one.len()),
    );
}
