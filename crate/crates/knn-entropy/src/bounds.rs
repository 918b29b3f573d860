//! Finite-sample bounds on k-NN distance statistics and on the entropy
//! estimator, evaluated as numeric curves.
//!
//! Notation: `gamma_star <= gamma_sup` are pointwise envelope values with
//! `gamma_star r^D <= P(B(x, r)) <= gamma_sup r^D` for `r <= rho`; `c_t` is
//! the tail constant of the expectation bounds; `kappa = D k gamma_star /
//! gamma_sup` recurs in every lower-tail formula.
//!
//! Probability bounds report both the raw formula value and its clamp to
//! `[0, 1]`: the formulas can be vacuous (> 1) well inside their validity
//! windows, and rate plots need the raw curve. Evaluations outside a
//! validity window are flagged, never silently returned as if valid.
//!
//! The generic expectation evaluators integrate in a rescaled form so that
//! large `k` neither overflows (`Gamma(k, k)` grows super-exponentially)
//! nor underflows (`(e/k)^k`).

use crate::quad;
use crate::special::{digamma, ln_upper_incomplete_gamma, log_gamma};
use crate::{Error, Result};

/// A bound evaluation: the raw formula value, its clamp to the meaningful
/// range (equal to `raw` for non-probability bounds), and whether the inputs
/// satisfied the formula's validity conditions.
#[derive(Debug, Clone, Copy)]
pub struct BoundValue {
    pub raw: f64,
    pub clamped: f64,
    pub valid: bool,
}

impl BoundValue {
    fn probability(raw: f64, valid: bool) -> Self {
        Self {
            raw,
            clamped: raw.clamp(0.0, 1.0),
            valid,
        }
    }
}

fn check_envelopes(gamma_star: f64, gamma_sup: f64) -> Result<()> {
    if !gamma_star.is_finite() || gamma_star <= 0.0 {
        return Err(Error::Domain(format!(
            "gamma_star must be finite > 0, got {gamma_star}"
        )));
    }
    if gamma_sup.is_nan() || gamma_sup < gamma_star {
        return Err(Error::Domain(format!(
            "envelope order violated: gamma_star {gamma_star} > gamma_sup {gamma_sup}"
        )));
    }
    Ok(())
}

/// Left edge of the upper-tail validity window, `(k / (gamma_star n))^{1/D}`.
pub fn upper_window_start(k: usize, n: usize, dim: usize, gamma_star: f64) -> f64 {
    (k as f64 / (gamma_star * n as f64)).powf(1.0 / dim as f64)
}

/// Right edge of the lower-tail validity window,
/// `min((k / (gamma_sup n))^{1/D}, rho)`.
pub fn lower_window_end(k: usize, n: usize, dim: usize, gamma_sup: f64, rho: f64) -> f64 {
    (k as f64 / (gamma_sup * n as f64))
        .powf(1.0 / dim as f64)
        .min(rho)
}

/// Upper tail: `P[eps_k(x) > r] <= e^{-a} (e a / k)^k` with
/// `a = gamma_star r^D n`, valid for `r` in
/// `[(k/(gamma_star n))^{1/D}, rho]`.
pub fn concentration_upper(
    r: f64,
    k: usize,
    n: usize,
    dim: usize,
    gamma_star: f64,
    rho: f64,
) -> BoundValue {
    let kf = k as f64;
    let a = gamma_star * r.powi(dim as i32) * n as f64;
    // ln bound = -a + k (1 + ln(a/k)); <= 0 exactly when a >= k.
    let ln_bound = -a + kf * (1.0 + (a / kf).ln());
    let valid = r >= upper_window_start(k, n, dim, gamma_star) && r <= rho;
    BoundValue::probability(ln_bound.exp(), valid)
}

/// Lower tail: `P[eps_k(x) <= r] <= (e gamma_sup r^D n / k)^{k gamma_star /
/// gamma_sup}`, valid for `0 <= r <= min((k/(gamma_sup n))^{1/D}, rho)`.
pub fn concentration_lower(
    r: f64,
    k: usize,
    n: usize,
    dim: usize,
    gamma_star: f64,
    gamma_sup: f64,
    rho: f64,
) -> BoundValue {
    let kappa_over_d = k as f64 * gamma_star / gamma_sup;
    let base = std::f64::consts::E * gamma_sup * r.powi(dim as i32) * n as f64 / k as f64;
    let raw = if r == 0.0 {
        0.0
    } else {
        base.powf(kappa_over_d)
    };
    let valid = (0.0..=lower_window_end(k, n, dim, gamma_sup, rho)).contains(&r);
    BoundValue::probability(raw, valid)
}

/// Generic upper expectation bound for increasing differentiable `f`:
///
/// ```text
/// E[f_+(eps_k(x))] <= f_+((k/(gamma_star n))^{1/D}) + C_T/n
///   + (e/k)^k / (D (n gamma_star)^{1/D})
///     * int_k^inf e^{-y} y^{k + 1/D - 1} f'((y/(n gamma_star))^{1/D}) dy
/// ```
///
/// The integral is evaluated with the `(e/k)^k e^{-y} y^k` magnitude factored
/// into `exp(k - y + (k + 1/D - 1) ln(y/k))`, which is `O(f')` at `y = k` for
/// any `k`.
pub fn expectation_upper_bound<F, G>(
    f: F,
    f_prime: G,
    k: usize,
    n: usize,
    dim: usize,
    gamma_star: f64,
    c_t: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    check_envelopes(gamma_star, gamma_star)?;
    let kf = k as f64;
    let d = dim as f64;
    let ng = n as f64 * gamma_star;
    let term1 = f((kf / ng).powf(1.0 / d)).max(0.0);
    let term2 = c_t / n as f64;
    let expo = kf + 1.0 / d - 1.0;
    let integral = quad::integrate_to_inf(
        |y| (kf - y + expo * (y / kf).ln()).exp() * f_prime((y / ng).powf(1.0 / d)),
        kf,
        1e-9,
    )?;
    let prefactor = kf.powf(1.0 / d - 1.0) / (d * ng.powf(1.0 / d));
    Ok(term1 + term2 + prefactor * integral)
}

/// Generic lower expectation bound for increasing differentiable `f`:
///
/// ```text
/// E[f_-(eps_k(x))] <= f_-(abar) + C_T/n
///   + (e n gamma_sup / k)^{kappa/D} int_0^abar y^kappa f'(y) dy
/// ```
///
/// with `abar = (k/(gamma_sup n))^{1/D}` and `kappa = D k gamma_star /
/// gamma_sup`. Substituting `y = abar u` collapses the prefactor to
/// `e^{kappa/D}`, removing the overflow at large `k`.
pub fn expectation_lower_bound<F, G>(
    f: F,
    f_prime: G,
    k: usize,
    n: usize,
    dim: usize,
    gamma_star: f64,
    gamma_sup: f64,
    c_t: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    check_envelopes(gamma_star, gamma_sup)?;
    let kf = k as f64;
    let d = dim as f64;
    let abar = (kf / (gamma_sup * n as f64)).powf(1.0 / d);
    let kappa = d * kf * gamma_star / gamma_sup;
    let term1 = (-f(abar)).max(0.0);
    let term2 = c_t / n as f64;
    let integral = quad::integrate(|u| u.powf(kappa) * f_prime(abar * u), 0.0, 1.0, 1e-9)?;
    let term3 = (kappa / d).exp() * abar * integral;
    Ok(term1 + term2 + term3)
}

/// Closed form of the upper log-moment bound:
/// `E[ln_+ eps_k(x)] <= (1/D) ln_+(k/(gamma_star n)) + (e/k)^k Gamma(k,k)/D`.
pub fn log_moment_upper_closed(k: usize, n: usize, dim: usize, gamma_star: f64) -> Result<f64> {
    check_envelopes(gamma_star, gamma_star)?;
    let kf = k as f64;
    let d = dim as f64;
    let first = (kf / (gamma_star * n as f64)).ln().max(0.0) / d;
    // (e/k)^k Gamma(k, k) in log space.
    let tail = (kf * (1.0 - kf.ln()) + ln_upper_incomplete_gamma(kf, kf)?).exp() / d;
    Ok(first + tail)
}

/// Closed form of the lower log-moment bound:
/// `E[ln_- eps_k(x)] <= (1/D) ln_-(k/(gamma_sup n)) + C_1`,
/// `C_1 = gamma_sup e^{k gamma_star/gamma_sup} / (D k gamma_star)`.
pub fn log_moment_lower_closed(
    k: usize,
    n: usize,
    dim: usize,
    gamma_star: f64,
    gamma_sup: f64,
) -> Result<f64> {
    check_envelopes(gamma_star, gamma_sup)?;
    let kf = k as f64;
    let d = dim as f64;
    let first = (-(kf / (gamma_sup * n as f64)).ln()).max(0.0) / d;
    let c1 = gamma_sup * (kf * gamma_star / gamma_sup).exp() / (d * kf * gamma_star);
    Ok(first + c1)
}

/// Sharp positive-moment bound (`alpha > 0`):
/// `E[eps_k^alpha] <= (k/(gamma_star n))^{alpha/D}
///   + (e/k)^k alpha Gamma(k + alpha/D, k) / (D (n gamma_star)^{alpha/D})`.
pub fn positive_moment_closed(
    alpha: f64,
    k: usize,
    n: usize,
    dim: usize,
    gamma_star: f64,
) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
    }
    check_envelopes(gamma_star, gamma_star)?;
    let kf = k as f64;
    let d = dim as f64;
    let ng = n as f64 * gamma_star;
    let first = (kf / ng).powf(alpha / d);
    let ln_tail =
        kf * (1.0 - kf.ln()) + ln_upper_incomplete_gamma(kf + alpha / d, kf)? + alpha.ln()
            - d.ln()
            - (alpha / d) * ng.ln();
    Ok(first + ln_tail.exp())
}

/// Simplified moment bound.
///
/// For `alpha > 0`: `C_2 (k/(gamma_star n))^{alpha/D}` with
/// `C_2 = 1 + 2 alpha / D`.
///
/// For `alpha` in `[-D k gamma_star/gamma_sup, 0)`:
/// `C_3 (k/(gamma_sup n))^{alpha/D}` with
/// `C_3 = 1 - alpha gamma_sup e^{k gamma_star/gamma_sup} /
/// (D k gamma_star + alpha gamma_sup)`, which is what the generic lower
/// bound's integral produces (it is a sum of nonnegative terms, so
/// `C_3 >= 1`). At the admissible endpoint the bound is `+inf`.
pub fn moment_bound(
    alpha: f64,
    k: usize,
    n: usize,
    dim: usize,
    gamma_star: f64,
    gamma_sup: f64,
) -> Result<f64> {
    check_envelopes(gamma_star, gamma_sup)?;
    let kf = k as f64;
    let d = dim as f64;
    if alpha >= 0.0 {
        let c2 = 1.0 + 2.0 * alpha / d;
        return Ok(c2 * (kf / (gamma_star * n as f64)).powf(alpha / d));
    }
    let kappa = d * kf * gamma_star / gamma_sup;
    if alpha < -kappa {
        return Err(Error::Domain(format!(
            "alpha {alpha} below the admissible range [-{kappa}, 0]"
        )));
    }
    let denom = d * kf * gamma_star + alpha * gamma_sup;
    if denom <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let c3 = 1.0 - alpha * gamma_sup * (kf * gamma_star / gamma_sup).exp() / denom;
    Ok(c3 * (kf / (gamma_sup * n as f64)).powf(alpha / d))
}

/// Bias bound `|E[H - H_k]| <= C_B (k/n)^{beta/D}` with
/// `C_B = (1 + c_D) C_2 C_beta Gamma_B` and `C_2` evaluated at
/// `alpha = beta`.
pub fn bias_bound(
    k: usize,
    n: usize,
    dim: usize,
    beta: f64,
    c_beta: f64,
    gamma_b: f64,
    c_d: f64,
) -> f64 {
    let d = dim as f64;
    let c2 = 1.0 + 2.0 * beta / d;
    (1.0 + c_d) * c2 * c_beta * gamma_b * (k as f64 / n as f64).powf(beta / d)
}

/// Hoelder-class bias bound with constant
/// `C_H = (1 + c_D) C_2 Gamma L D / (D + beta)`, for densities that vanish
/// on the support boundary. Useful when the `Gamma_B` integral of
/// [`bias_bound`] diverges but `Gamma = E[gamma_sup/gamma_star]` is finite.
pub fn holder_bias_bound(
    k: usize,
    n: usize,
    dim: usize,
    beta: f64,
    l: f64,
    gamma_ratio_mean: f64,
    c_d: f64,
) -> f64 {
    let d = dim as f64;
    let c2 = 1.0 + 2.0 * beta / d;
    (1.0 + c_d) * c2 * gamma_ratio_mean * l * d / (d + beta) * (k as f64 / n as f64).powf(beta / d)
}

/// Variance bound `Var[H_k] <= 5 (3 + k N_k)(3 + 64 k) M_4 / n`, valid for
/// `n >= 16 k`. `N_k` bounds how many points can share a given point among
/// their k nearest neighbors (at most `k` times the kissing number in
/// Euclidean space).
///
/// At fixed `M_4` the displayed formula grows with `k`; the advertised
/// `O(1/(nk))` behavior relies on `M_4` itself decaying like `k^{-4}`
/// through the [`moment_ceiling`] with `lambda` proportional to `k`. That
/// decay is *not* assumed here: callers choose `M_4` (see [`default_m4`]).
pub fn variance_bound(k: usize, n: usize, n_k: u64, m4: f64) -> BoundValue {
    let raw = 5.0 * (3.0 + k as f64 * n_k as f64) * (3.0 + 64.0 * k as f64) * m4 / n as f64;
    BoundValue {
        raw,
        clamped: raw,
        valid: n >= 16 * k,
    }
}

/// Central-moment ceiling `M_ell <= C_M ell! / lambda^ell` for the
/// log-k-NN-distance moments, `ell >= 2`.
pub fn moment_ceiling(ell: u32, lambda: f64, c_m: f64) -> Result<f64> {
    if ell < 2 {
        return Err(Error::Domain(format!("ell must be >= 2, got {ell}")));
    }
    if !lambda.is_finite() || lambda <= 0.0 || !c_m.is_finite() || c_m <= 0.0 {
        return Err(Error::Domain(format!(
            "lambda and C_M must be finite > 0, got {lambda}, {c_m}"
        )));
    }
    let ln = log_gamma(ell as f64 + 1.0)? - ell as f64 * lambda.ln() + c_m.ln();
    Ok(ln.exp())
}

/// Default fourth central moment for [`variance_bound`]: the
/// [`moment_ceiling`] at `lambda = D k gamma_star / (2 gamma_sup)`, the
/// midpoint of the admissible range `(0, Dk/Gamma_0)` with the pointwise
/// ratio as the `Gamma_0` surrogate.
pub fn default_m4(k: usize, dim: usize, gamma_star: f64, gamma_sup: f64, c_m: f64) -> Result<f64> {
    check_envelopes(gamma_star, gamma_sup)?;
    let lambda = dim as f64 * k as f64 * gamma_star / (2.0 * gamma_sup);
    moment_ceiling(4, lambda, c_m)
}

/// MSE bound by bias-variance composition:
/// `bias_bound^2 + variance_bound`.
pub fn mse_bound(
    k: usize,
    n: usize,
    dim: usize,
    beta: f64,
    c_beta: f64,
    gamma_b: f64,
    c_d: f64,
    n_k: u64,
    m4: f64,
) -> BoundValue {
    let b = bias_bound(k, n, dim, beta, c_beta, gamma_b, c_d);
    let v = variance_bound(k, n, n_k, m4);
    BoundValue {
        raw: b * b + v.raw,
        clamped: b * b + v.raw,
        valid: v.valid,
    }
}

/// The MSE-optimal neighbor count
/// `k = max(1, floor(n^{max(0, (2 beta - D)/(2 beta + D))}))`.
pub fn optimal_k(n: usize, beta: f64, dim: usize) -> usize {
    let expo = ((2.0 * beta - dim as f64) / (2.0 * beta + dim as f64)).max(0.0);
    ((n as f64).powf(expo).floor() as usize).max(1)
}

/// Kissing number of `R^D` for small `D` (exact where known, best published
/// upper bounds for D = 5, 6, 7), used to default `N_k <= k K(D)`.
pub fn kissing_number_upper(dim: usize) -> Option<u64> {
    match dim {
        1 => Some(2),
        2 => Some(6),
        3 => Some(12),
        4 => Some(24),
        5 => Some(44),
        6 => Some(78),
        7 => Some(134),
        8 => Some(240),
        _ => None,
    }
}

/// `psi(k) - psi(n)`: the distribution-free mean of
/// `ln P(B(X_i, eps_k(X_i)))` under leave-one-out k-NN.
pub fn digamma_identity_target(k: usize, n: usize) -> Result<f64> {
    Ok(digamma(k as f64)? - digamma(n as f64)?)
}
