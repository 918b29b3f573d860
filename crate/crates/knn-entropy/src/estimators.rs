//! The Kozachenko-Leonenko entropy estimator, mutual information via entropy
//! decomposition, and the ball-averaged density diagnostic `p_eps`.
//!
//! The estimator over `n` samples with leave-one-out k-NN distances is
//!
//! ```text
//! H_k = psi(n) - psi(k) + ln c_D + (D/n) sum_i ln eps_k(X_i)
//! ```
//!
//! in nats. Note the convention: `eps_k(X_i)` is taken among the *other*
//! `n - 1` samples while the digamma term is `psi(n)`, matching the identity
//! `E[ln P(B(X_i, eps_k(X_i)))] = psi(k) - psi(n)`. (Analyses sometimes
//! reserve one extra sample and write the same formula with an off-by-one
//! sample count; this implementation uses the standard n-sample form.)
//!
//! Mutual information joins the marginal coordinates into one Euclidean
//! space (`I(X;Y) = H(X) + H(Y) - H(X,Y)`); the max-norm construction used
//! by data-dependent-k estimators is out of scope here.

use crate::distributions::Distribution;
use crate::knn::{Dataset, KnnIndex};
use crate::quad;
use crate::space::SpaceKind;
use crate::special::digamma;
use crate::{Error, Result};

/// How duplicate points (zero k-NN distance, `ln eps` undefined) are handled.
///
/// Atom-free distributions produce duplicates with probability zero, so
/// strict mode treats them as data errors. Lenient mode drops the affected
/// points from the estimator sum, renormalizing by the retained count, and
/// reports how many were dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Lenient,
}

/// An entropy estimate in nats with its bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct EntropyEstimate {
    /// Estimate in nats.
    pub value: f64,
    pub n: usize,
    pub k: usize,
    /// Points dropped in lenient mode (always 0 in strict mode).
    pub dropped_points: usize,
}

/// Kozachenko-Leonenko entropy estimate of a dataset. Requires
/// `2 <= k + 1 <= n`.
pub fn kl_entropy(data: &Dataset, k: usize, mode: Mode) -> Result<EntropyEstimate> {
    let index = KnnIndex::build(data);
    kl_entropy_with_index(&index, k, mode)
}

/// Same as [`kl_entropy`] over a prebuilt index.
pub fn kl_entropy_with_index(index: &KnnIndex, k: usize, mode: Mode) -> Result<EntropyEstimate> {
    let data = index.dataset();
    let n = data.n();
    let eps = index.loo_eps(k)?;

    let mut log_sum = 0.0;
    let mut retained = 0usize;
    for (i, &e) in eps.iter().enumerate() {
        if e == 0.0 {
            if mode == Mode::Strict {
                return Err(Error::ZeroDistance { index: i });
            }
        } else {
            log_sum += e.ln();
            retained += 1;
        }
    }
    if retained == 0 {
        return Err(Error::Domain(
            "all points dropped: every k-NN distance is zero".into(),
        ));
    }

    let d = data.dim() as f64;
    let c_d = data.space().ball_volume_constant();
    let value = digamma(n as f64)? - digamma(k as f64)? + c_d.ln() + d * log_sum / retained as f64;
    Ok(EntropyEstimate {
        value,
        n,
        k,
        dropped_points: n - retained,
    })
}

/// Mutual information `I(X;Y) = H(X) + H(Y) - H(X,Y)` in nats, with the
/// joint entropy estimated on the concatenated Euclidean space.
///
/// Degenerate inputs (e.g. `Y` a deterministic function of `X`) are not
/// absolutely continuous on the joint space; the estimator still runs and
/// reports a value, but the population quantity it targets is divergent.
pub fn mutual_information(x_data: &Dataset, y_data: &Dataset, k: usize, mode: Mode) -> Result<f64> {
    if x_data.n() != y_data.n() {
        return Err(Error::LengthMismatch(x_data.n(), y_data.n()));
    }
    if x_data.space().kind() != SpaceKind::Euclidean
        || y_data.space().kind() != SpaceKind::Euclidean
    {
        return Err(Error::Domain(
            "mutual information requires Euclidean marginal spaces".into(),
        ));
    }
    let joint = join_euclidean(x_data, y_data)?;
    let h_x = kl_entropy(x_data, k, mode)?.value;
    let h_y = kl_entropy(y_data, k, mode)?.value;
    let h_xy = kl_entropy(&joint, k, mode)?.value;
    Ok(h_x + h_y - h_xy)
}

fn join_euclidean(x_data: &Dataset, y_data: &Dataset) -> Result<Dataset> {
    let space = crate::space::MetricSpace::euclidean(x_data.dim() + y_data.dim())?;
    let mut coords = Vec::with_capacity(x_data.n() * space.dim());
    for (px, py) in x_data.iter_points().zip(y_data.iter_points()) {
        coords.extend_from_slice(px);
        coords.extend_from_slice(py);
    }
    Dataset::from_flat(space, coords)
}

/// A smoothed-density value with a standard error when it came from Monte
/// Carlo integration (exact and quadrature paths report `None`).
#[derive(Debug, Clone, Copy)]
pub struct SmoothedDensity {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Ball-averaged density `p_eps(x) = P(B(x, eps)) / (c_D eps^D)`.
///
/// `P(B(x, eps))` is exact on the uniform torus, adaptive quadrature
/// (relative tolerance 1e-8) for D = 1 families, and Monte Carlo with 1e5
/// fixed-seed draws otherwise (standard error reported).
pub fn smoothed_density(dist: &Distribution, x: &[f64], eps: f64) -> Result<SmoothedDensity> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!("eps must be > 0, got {eps}")));
    }
    let space = dist.space();
    let dim = space.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let denom = space.ball_volume_constant() * eps.powi(dim as i32);

    if space.kind() == SpaceKind::FlatTorus {
        // Uniform density: P(B) is the ball volume, exactly c_D eps^D up to
        // the injectivity radius and exactly 1 once the ball covers the
        // whole torus.
        if eps <= 0.5 {
            return Ok(SmoothedDensity {
                value: 1.0,
                std_error: None,
            });
        }
        if eps >= space.max_distance() {
            return Ok(SmoothedDensity {
                value: 1.0 / denom,
                std_error: None,
            });
        }
        // Self-overlapping ball on a higher-dimensional torus: Monte Carlo.
        return smoothed_density_mc(dist, x, eps, 100_000, 0xBA11);
    }
    if dim == 1 {
        let center = x[0];
        let p = quad::integrate(|t| dist.density(&[t]), center - eps, center + eps, 1e-8)?;
        return Ok(SmoothedDensity {
            value: p / denom,
            std_error: None,
        });
    }
    smoothed_density_mc(dist, x, eps, 100_000, 0xBA11)
}

/// Monte Carlo `p_eps(x)` with explicit draw count and seed.
pub fn smoothed_density_mc(
    dist: &Distribution,
    x: &[f64],
    eps: f64,
    draws: usize,
    seed: u64,
) -> Result<SmoothedDensity> {
    if draws < 2 {
        return Err(Error::Domain("mc draws must be >= 2".into()));
    }
    let space = dist.space();
    let mut x = x.to_vec();
    space.canonicalize(&mut x);
    let denom = space.ball_volume_constant() * eps.powi(space.dim() as i32);
    let sample = dist.sample(draws, seed)?;
    let hits = sample
        .iter_points()
        .filter(|p| space.distance(p, &x) < eps)
        .count() as f64;
    let p_hat = hits / draws as f64;
    let se = (p_hat * (1.0 - p_hat) / draws as f64).sqrt();
    Ok(SmoothedDensity {
        value: p_hat / denom,
        std_error: Some(se / denom),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::MetricSpace;
    use crate::special::digamma;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset_1d(space: MetricSpace, xs: &[f64]) -> Dataset {
        Dataset::from_rows(space, &xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn hand_computed_example() {
        // {0, 1, 3} on R, k = 1: loo eps = (1, 1, 2), so
        // H = psi(3) - psi(1) + ln 2 + (1/3) ln 2 = 3/2 + (4/3) ln 2.
        let ds = dataset_1d(MetricSpace::euclidean(1).unwrap(), &[0.0, 1.0, 3.0]);
        let est = kl_entropy(&ds, 1, Mode::Strict).unwrap();
        let expected = 1.5 + 2.0f64.ln() * (4.0 / 3.0);
        assert!(
            (est.value - expected).abs() < 1e-12,
            "{} vs {expected}",
            est.value
        );
        assert_eq!(est.n, 3);
        assert_eq!(est.dropped_points, 0);
    }

    #[test]
    fn scaling_shifts_by_d_ln_a() {
        let space = MetricSpace::euclidean(1).unwrap();
        let base = kl_entropy(&dataset_1d(space, &[0.0, 1.0, 3.0]), 1, Mode::Strict)
            .unwrap()
            .value;
        let scaled = kl_entropy(&dataset_1d(space, &[0.0, 10.0, 30.0]), 1, Mode::Strict)
            .unwrap()
            .value;
        assert!((scaled - base - 10.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn translation_invariance_is_exact_on_dyadics() {
        // Dyadic coordinates and shifts make x + t exact, so the k-NN
        // distances and the estimate are bit-identical.
        let space = MetricSpace::euclidean(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xadd);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                (0..2)
                    .map(|_| rng.gen_range(0u32..1 << 20) as f64 / (1 << 20) as f64)
                    .collect()
            })
            .collect();
        let t = [
            rng.gen_range(0u32..1 << 10) as f64 / (1 << 10) as f64,
            rng.gen_range(0u32..1 << 10) as f64 / (1 << 10) as f64,
        ];
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r[0] + t[0], r[1] + t[1]])
            .collect();
        let a = kl_entropy(&Dataset::from_rows(space, &rows).unwrap(), 2, Mode::Strict).unwrap();
        let b = kl_entropy(
            &Dataset::from_rows(space, &shifted).unwrap(),
            2,
            Mode::Strict,
        )
        .unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn permutation_invariance() {
        let space = MetricSpace::euclidean(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let a = kl_entropy(&Dataset::from_rows(space, &rows).unwrap(), 2, Mode::Strict).unwrap();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(0, 7);
        let b = kl_entropy(
            &Dataset::from_rows(space, &shuffled).unwrap(),
            2,
            Mode::Strict,
        )
        .unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn duplicate_handling() {
        let space = MetricSpace::euclidean(1).unwrap();
        let ds = dataset_1d(space, &[0.0, 0.0, 1.0, 3.0]);
        assert!(matches!(
            kl_entropy(&ds, 1, Mode::Strict),
            Err(Error::ZeroDistance { .. })
        ));
        // Lenient: drops both zero-eps points, renormalizes by the retained 2.
        let est = kl_entropy(&ds, 1, Mode::Lenient).unwrap();
        assert_eq!(est.dropped_points, 2);
        let expected = digamma(4.0).unwrap() - digamma(1.0).unwrap()
            + 2.0f64.ln()
            + (1.0f64.ln() + 2.0f64.ln()) / 2.0;
        assert!((est.value - expected).abs() < 1e-12);
    }

    #[test]
    fn k_range_is_enforced() {
        let space = MetricSpace::euclidean(1).unwrap();
        let ds = dataset_1d(space, &[0.0, 1.0, 3.0]);
        assert!(kl_entropy(&ds, 2, Mode::Strict).is_ok()); // k = n - 1
        assert!(matches!(
            kl_entropy(&ds, 3, Mode::Strict),
            Err(Error::KOutOfRange { .. })
        ));
        let single = dataset_1d(space, &[1.0]);
        assert!(kl_entropy(&single, 1, Mode::Strict).is_err());
    }

    #[test]
    fn mi_is_symmetric_and_checks_lengths() {
        let space = MetricSpace::euclidean(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let xs: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen::<f64>()]).collect();
        let ys: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen::<f64>()]).collect();
        let dx = Dataset::from_rows(space, &xs).unwrap();
        let dy = Dataset::from_rows(space, &ys).unwrap();
        let a = mutual_information(&dx, &dy, 3, Mode::Strict).unwrap();
        let b = mutual_information(&dy, &dx, 3, Mode::Strict).unwrap();
        assert!((a - b).abs() < 1e-12);

        let short = Dataset::from_rows(space, &xs[..100]).unwrap();
        assert!(matches!(
            mutual_information(&dx, &short, 3, Mode::Strict),
            Err(Error::LengthMismatch(200, 100))
        ));
        let torus = Dataset::from_rows(MetricSpace::flat_torus(1).unwrap(), &ys).unwrap();
        assert!(mutual_information(&dx, &torus, 3, Mode::Strict).is_err());
    }

    #[test]
    fn mi_runs_on_degenerate_input() {
        // Y = X + 1: singular joint distribution; estimator must still run.
        let space = MetricSpace::euclidean(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let xs: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen::<f64>()]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|r| vec![r[0] + 1.0]).collect();
        let dx = Dataset::from_rows(space, &xs).unwrap();
        let dy = Dataset::from_rows(space, &ys).unwrap();
        let mi = mutual_information(&dx, &dy, 1, Mode::Strict).unwrap();
        assert!(mi.is_finite());
        assert!(mi > 0.0);
    }

    #[test]
    fn smoothed_density_torus_is_one() {
        let d = Distribution::uniform_torus(1).unwrap();
        let s = smoothed_density(&d, &[0.37], 0.25).unwrap();
        assert_eq!(s.value, 1.0);
        assert!(s.std_error.is_none());
        let d2 = Distribution::uniform_torus(3).unwrap();
        assert_eq!(
            smoothed_density(&d2, &[0.1, 0.5, 0.9], 0.4).unwrap().value,
            1.0
        );
        // Past the injectivity radius the circle ball saturates: P = 1, so
        // p_eps = 1/(2 eps).
        let s = smoothed_density(&d, &[0.37], 0.8).unwrap();
        assert!((s.value - 1.0 / 1.6).abs() < 1e-15);
        // Self-overlapping 2-torus ball: MC path with a standard error; the
        // smoothed value must stay near P <= 1 over c_D eps^D.
        let dt2 = Distribution::uniform_torus(2).unwrap();
        let s = smoothed_density(&dt2, &[0.2, 0.2], 0.6).unwrap();
        assert!(s.std_error.is_some());
        assert!(s.value <= 1.0 / (std::f64::consts::PI * 0.36) + 1e-9);
    }

    #[test]
    fn smoothed_density_gaussian_below_peak() {
        let d = Distribution::gaussian(1, 1.0).unwrap();
        for eps in [0.1, 0.5, 1.0] {
            let s = smoothed_density(&d, &[0.0], eps).unwrap();
            assert!(
                s.value < d.density(&[0.0]),
                "p_eps(0) = {} not below p(0)",
                s.value
            );
        }
        assert!(smoothed_density(&d, &[0.0], 0.0).is_err());
    }

    #[test]
    fn smoothed_density_sine_bump_matches_closed_form() {
        // P(B(0.5, 0.1)) = (cos(0.4 pi) - cos(0.6 pi)) / 2 = cos(0.4 pi),
        // so p_eps = cos(0.4 pi) / 0.2.
        let d = Distribution::sine_bump(1).unwrap();
        let s = smoothed_density(&d, &[0.5], 0.1).unwrap();
        let expected = (0.4 * std::f64::consts::PI).cos() / 0.2;
        assert!((s.value - expected).abs() < 1e-8 * expected);
    }

    #[test]
    fn smoothed_density_mc_brackets_quadrature() {
        let d = Distribution::gaussian(1, 1.0).unwrap();
        let q = smoothed_density(&d, &[0.3], 0.4).unwrap();
        let mc = smoothed_density_mc(&d, &[0.3], 0.4, 200_000, 7).unwrap();
        let se = mc.std_error.unwrap();
        assert!(
            (mc.value - q.value).abs() < 5.0 * se,
            "{} vs {}",
            mc.value,
            q.value
        );
    }

    #[test]
    fn smoothed_density_matches_chi_square_truth_in_2d() {
        // At the origin of a 2-D standard gaussian, P(B(0, eps)) is the
        // chi-square(2) CDF: 1 - exp(-eps^2/2).
        let d = Distribution::gaussian(2, 1.0).unwrap();
        let eps = 0.5;
        let s = smoothed_density(&d, &[0.0, 0.0], eps).unwrap();
        let truth = (1.0 - (-eps * eps / 2.0f64).exp()) / (std::f64::consts::PI * eps * eps);
        let se = s.std_error.expect("MC path reports a standard error");
        assert!(
            (s.value - truth).abs() <= 5.0 * se,
            "p_eps(0) = {} vs truth {truth} (se {se})",
            s.value
        );
        assert!(s.value < d.density(&[0.0, 0.0]));
    }
}
